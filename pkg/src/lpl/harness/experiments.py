"""Experiments that check the sampler family against exact references.

Every experiment is a pure function of its configuration: replicate ``r``
uses seed ``cfg.seed + r``, and rows are written in a fixed order.
Run times are reported separately from the CSV contract.
"""
import math
import os
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .. import metrics as M
from ..errors import ContractViolation, DivergenceError
from ..potentials import (GaussianLikelihood, LinearOperator, format_gmm, gmm_exact_posterior,
                          logcosh_double_well, quadratic_potential, read_gmm_file)
from ..proximal import MoreauEnvelope, l1_regularizer, prox_tv2d, zero_regularizer
from ..samplers import ChainConfig, Denoiser, run_inexact_psgla, run_iula, run_pnp_psgla, run_pnp_ula
from . import io
from .parallel import pmap

SE_FLOOR = 1e-12

# regression value for shift / c of the inexact-prox experiment at its defaults;
# measured 5.25 to 5.38 over two disjoint seed blocks, stored with ~10% headroom
INEXACT_PROX_RATIO_BOUND = 5.9

# observations used when a built-in prior is run without an explicit y
PRESET_OBSERVATIONS = {"three_mode": (0.0, 0.0), "single_mode": (-1.0, -1.0)}
BUILTIN_PRIORS = ("three_mode", "single_mode", "two_mode")


@dataclass(frozen=True)
class SweepRow:
    param: float
    metric: str
    value: float
    se: float
    n_rep: int
    runtime: float = 0.0


def mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


class SweepResult:
    """Aggregated rows ``(param, metric, value, se)`` plus named pass/fail checks."""

    HEADER = ("experiment", "param_name", "param", "metric", "value", "se", "n_rep")

    def __init__(self, experiment, param_name):
        self.experiment = experiment
        self.param_name = param_name
        self.rows = []
        self.checks = {}
        self.info = {}
        self.artifacts = []

    def add(self, param, metric, values, runtime=0.0):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        m, se = mean_se(values)
        self.rows.append(SweepRow(float(param), metric, m, se, int(values.size), float(runtime)))

    def row(self, param, metric):
        for r in self.rows:
            if r.metric == metric and r.param == float(param):
                return r
        raise KeyError((param, metric))

    def series(self, metric):
        rows = sorted((r for r in self.rows if r.metric == metric), key=lambda r: r.param)
        return (np.array([r.param for r in rows]), np.array([r.value for r in rows]),
                np.array([r.se for r in rows]))

    def check(self, name, passed, detail=""):
        self.checks[name] = (bool(passed), str(detail))

    @property
    def passed(self):
        return all(ok for ok, _ in self.checks.values())

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r.param, r.metric))

    def write(self, out_dir, stem="sweep"):
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{stem}.csv")
        io.write_csv(path, self.HEADER,
                     [(self.experiment, self.param_name, r.param, r.metric, r.value, r.se, r.n_rep)
                      for r in self.sorted_rows()])
        io.write_csv(os.path.join(out_dir, f"{stem}_checks.csv"), ("check", "passed", "detail"),
                     [(k, int(ok), d) for k, (ok, d) in sorted(self.checks.items())])
        # wall-clock times vary run to run, so they live outside the reproducible CSVs
        io.write_csv(os.path.join(out_dir, f"{stem}_timings.csv"), ("param", "metric", "runtime_s"),
                     [(r.param, r.metric, r.runtime) for r in self.sorted_rows()])
        self.artifacts.append(path)
        return path


def _seeds(cfg):
    if cfg.replicates < 1:
        raise ContractViolation("replicates must be at least 1")
    return [cfg.seed + r for r in range(cfg.replicates)]


def _within(value, target, se, k=3.0):
    return abs(value - target) <= k * max(se, SE_FLOOR)


# -- 2D Gaussian-mixture posterior ----------------------------------------

def load_prior(name):
    if name in BUILTIN_PRIORS:
        with resources.as_file(resources.files("lpl") / "data" / f"{name}.gmm") as path:
            return read_gmm_file(path)
    return read_gmm_file(name)


def gmm_observation(cfg, prior):
    """The observation ``y``: from the config, a preset, or ``x + sigma z`` drawn with ``y_seed``."""
    if cfg.y:
        y = np.array(cfg.y, dtype=float)
        source = "config"
    elif cfg.prior in PRESET_OBSERVATIONS:
        y = np.array(PRESET_OBSERVATIONS[cfg.prior], dtype=float)
        source = "preset"
    else:
        rng = np.random.default_rng(cfg.y_seed)
        y = prior.sample(1, rng)[0] + cfg.sigma * rng.standard_normal(prior.d)
        source = f"y_seed={cfg.y_seed}"
    if y.shape != (prior.d,):
        raise ContractViolation(f"observation must have {prior.d} entries")
    return y, source


def gmm_checkpoints(cfg):
    """Configured checkpoints up to ``steps``, always including ``steps`` itself."""
    return sorted({int(n) for n in cfg.checkpoints if 0 < n <= cfg.steps} | {int(cfg.steps)})


def _gmm_replicate(cfg, prior, post, lik, y, grid, truth, seed):
    ref_rng = np.random.default_rng([seed, 1])
    ref = M.EmpiricalMeasure(post.sample(cfg.n_ref, ref_rng))
    runs = {
        "pnp_ula": lambda: run_pnp_ula(
            lik, Denoiser.gmm_mmse(prior, cfg.ula_eps), cfg.ula_eps, cfg.ula_lam,
            ChainConfig(cfg.ula_gamma, cfg.steps, y, seed=seed, burn_in=0), alpha=cfg.ula_alpha),
        "pnp_psgla": lambda: run_pnp_psgla(
            lik, Denoiser.gmm_mmse(prior, math.sqrt(cfg.psgla_gamma)), cfg.psgla_lam,
            ChainConfig(cfg.psgla_gamma, cfg.steps, y, seed=seed, burn_in=0)),
    }
    out = {}
    for alg, make in runs.items():
        t0 = time.perf_counter()
        try:
            run = make()
        except DivergenceError as exc:
            raise DivergenceError(exc.step, f"gmm2d {alg}, seed {seed}: {exc}") from exc
        pts = run.samples
        rec = {"samples": pts, "wp": {}}
        for n in gmm_checkpoints(cfg):
            sub_rng = np.random.default_rng([seed, 2, n])
            chain = M.EmpiricalMeasure(pts[:n]).subsample(cfg.n_sub, sub_rng)
            for p in cfg.p:
                rec["wp"][(p, n)] = (M.wasserstein_exact(chain, ref, p), chain.n, ref.n)
        full = M.EmpiricalMeasure(pts)
        rec["kde_l2"] = M.kde_l2_error(full, truth)
        rec["occupancy"] = M.mode_occupancy(full, post)
        rec["runtime"] = time.perf_counter() - t0
        out[alg] = rec
    return out


def exp_gmm2d(cfg, write=True):
    """PnP-ULA against PnP-PSGLA on a 2D mixture prior with ``A = I``.

    Rows: ``<alg>.W<p>`` at every checkpoint, ``<alg>.kde_l2`` and
    ``<alg>.occupancy.<i>`` at the final step. The exact posterior is written
    to ``posterior.gmm``.
    ``prior = all`` runs every built-in prior (see :func:`exp_gmm2d_suite`).
    """
    if cfg.prior == "all":
        return exp_gmm2d_suite(cfg, write)[0]
    prior = load_prior(cfg.prior)
    if prior.d != 2:
        raise ContractViolation("the 2D experiment needs a 2D prior")
    y, y_source = gmm_observation(cfg, prior)
    lik = GaussianLikelihood(LinearOperator.identity(2), y, cfg.sigma)
    post = gmm_exact_posterior(prior, lik)
    w = cfg.grid_half_width
    grid = M.Grid(((-w, w), (-w, w)), (cfg.grid_cells, cfg.grid_cells))
    truth = M.GridDensity.from_log_function(post.log_density, grid)
    seeds = _seeds(cfg)
    reps = pmap(lambda s: _gmm_replicate(cfg, prior, post, lik, y, grid, truth, s), seeds)

    res = SweepResult("gmm2d", "iteration")
    res.info.update(prior=cfg.prior, y=y, y_source=y_source, posterior=post)
    raw = []
    algs = ("pnp_ula", "pnp_psgla")
    for alg in algs:
        keys = sorted(reps[0][alg]["wp"])
        for p, n in keys:
            vals = [rep[alg]["wp"][(p, n)][0] for rep in reps]
            res.add(n, f"{alg}.W{p}", vals, sum(rep[alg]["runtime"] for rep in reps))
        res.add(cfg.steps, f"{alg}.kde_l2", [rep[alg]["kde_l2"] for rep in reps])
        for i in range(post.k):
            res.add(cfg.steps, f"{alg}.occupancy.{i}", [rep[alg]["occupancy"][i] for rep in reps])
        for seed, rep in zip(seeds, reps):
            for (p, n), (val, na, nb) in sorted(rep[alg]["wp"].items()):
                raw.append((f"{alg}.W{p}", n, val, na, nb, seed))
            raw.append((f"{alg}.kde_l2", cfg.grid_cells, rep[alg]["kde_l2"], cfg.steps, cfg.grid_cells ** 2, seed))
            for i, occ in enumerate(rep[alg]["occupancy"]):
                raw.append((f"{alg}.occupancy", i, occ, cfg.steps, post.k, seed))

    final = cfg.steps
    if 2 in cfg.p:
        u = res.row(final, "pnp_ula.W2")
        s = res.row(final, "pnp_psgla.W2")
        res.check("psgla_w2_below_ula", s.value + 3 * s.se < u.value - 3 * u.se,
                  f"psgla {s.value:.4f}+-{3 * s.se:.4f} vs ula {u.value:.4f}+-{3 * u.se:.4f}")
    occ_lo = [res.row(cfg.steps, f"pnp_psgla.occupancy.{i}") for i in range(post.k)]
    res.check("psgla_covers_modes", all(r.value - 3 * r.se > 0.01 for r in occ_lo),
              " ".join(f"{r.value:.3f}+-{3 * r.se:.3f}" for r in occ_lo))

    if write:
        out = cfg.out_dir
        os.makedirs(out, exist_ok=True)
        res.write(out)
        io.write_csv(os.path.join(out, "metrics.csv"), ("metric", "p_or_param", "value", "n_a", "n_b", "seed"), raw)
        io.write_csv(os.path.join(out, "observation.csv"), ("y_0", "y_1", "source", "sigma"),
                     [(y[0], y[1], y_source, cfg.sigma)])
        with open(os.path.join(out, "posterior.gmm"), "w", encoding="utf-8") as fh:
            fh.write(format_gmm(post))
        if cfg.write_chains:
            for alg in algs:
                io.write_samples_csv(os.path.join(out, f"chain_{alg}_seed{seeds[0]}.csv"), reps[0][alg]["samples"])
        if cfg.svg:
            top = float(truth.values.max())
            levels = [top * f for f in (0.05, 0.2, 0.4, 0.6, 0.8)]
            for alg in algs:
                pts = reps[0][alg]["samples"]
                io.write_scatter_svg(os.path.join(out, f"scatter_{alg}.svg"), pts[:: max(1, pts.shape[0] // 2000)],
                                     ((-w, w), (-w, w)), truth, levels, title=f"{alg} iterates over the posterior")
    return res


def exp_gmm2d_suite(cfg, write=True):
    """Run every built-in prior and add unweighted means of the W_p traces over them."""
    base = cfg.out_dir
    results = {}
    for name in BUILTIN_PRIORS:
        sub = cfg.with_values(prior=name, y=(), out=os.path.join(base, name))
        results[name] = exp_gmm2d(sub, write=write)
    suite = SweepResult("gmm2d-suite", "iteration")
    metrics = sorted({r.metric for r in results[BUILTIN_PRIORS[0]].rows if ".W" in r.metric})
    for metric in metrics:
        for param in results[BUILTIN_PRIORS[0]].series(metric)[0]:
            vals = [results[n].row(param, metric).value for n in BUILTIN_PRIORS]
            suite.add(param, f"unweighted_mean.{metric}", vals)
    for name, res in results.items():
        for check, (ok, detail) in res.checks.items():
            suite.check(f"{name}.{check}", ok, detail)
    if write:
        suite.write(base, "suite")
    return suite, results


# -- one-dimensional targets -------------------------------------------------

def _target(name):
    """Gradient of the 1D potential ``V`` and the unnormalized density ``exp(-V)``."""
    if name == "ou":
        pot = quadratic_potential(1.0, dim=1)
    elif name == "double_well":
        pot = logcosh_double_well(1.0, 2.0, 1.0, dim=1)
    else:
        raise ContractViolation(f"unknown target {name!r}; use ou or double_well")

    def pdf(x):
        lp = -np.array([pot.value(np.array([v])) for v in np.asarray(x, dtype=float)])
        return np.exp(lp - lp.max())

    return pot.gradient, pdf


def exp_stability_sweep(cfg, write=True):
    """Constant drift perturbations ``b2 = b1 + c`` against the unperturbed chain.

    Both chains share their noise (common random numbers), so the measured
    distance isolates the effect of the drift change.
    """
    grad, _ = _target(cfg.target)
    shifts = tuple(sorted(set(cfg.shifts)))
    w = cfg.grid_half_width
    grid = M.Grid(((-w, w),), (cfg.grid_cells,))

    def replicate(seed):
        x0 = np.zeros(cfg.chains)
        base_cfg = ChainConfig(cfg.gamma, cfg.steps, x0, seed=seed, burn_in=cfg.burn_in, thinning=cfg.thinning)
        base = run_iula(grad, base_cfg).samples.ravel()
        base_m = M.EmpiricalMeasure(base)
        out = {}
        for c in shifts:
            t0 = time.perf_counter()
            pert = run_iula(lambda x, c=c: grad(x) + c, base_cfg).samples.ravel()
            pert_m = M.EmpiricalMeasure(pert)
            out[c] = dict(
                W1=M.wasserstein_1d(base, pert, 1),
                TV=M.tv_on_grid(base_m, pert_m, grid),
                mismatch=M.drift_l2_mismatch(grad, lambda x, c=c: grad(x) + c, base_m, vectorized=True),
                runtime=time.perf_counter() - t0)
        return out

    reps = pmap(replicate, _seeds(cfg))
    res = SweepResult(f"stability-{cfg.target}", "shift")
    for c in shifts:
        rt = sum(r[c]["runtime"] for r in reps)
        for metric in ("W1", "TV", "mismatch"):
            res.add(c, metric, [r[c][metric] for r in reps], rt)
    pos = [c for c in shifts if c > 0]
    if len(pos) >= 2:
        mis = np.array([res.row(c, "mismatch").value for c in pos])
        w1 = np.array([res.row(c, "W1").value for c in pos])
        slope = float(np.polyfit(np.log(mis), np.log(w1), 1)[0])
        res.info["slope"] = slope
        res.add(0.0, "loglog_slope", [slope])
        res.check("slope_in_range", 0.8 <= slope <= 1.2, f"slope {slope:.4f}")
    if cfg.target == "ou":
        for c in pos:
            r = res.row(c, "W1")
            res.check(f"ou_shift_{c:g}", _within(r.value, c, r.se),
                      f"W1 {r.value!r} vs |c| {c!r}, se {r.se:.3g}")
    if 0.0 in shifts:
        r = res.row(0.0, "W1")
        res.check("zero_shift_floor", r.value <= 3 * max(r.se, SE_FLOOR), f"W1 {r.value!r}")
    if write:
        res.write(cfg.out_dir)
    return res


def ou_stationary_w2(gamma):
    """``W_2`` between the discrete OU invariant law ``N(0, 2/(2-gamma))`` and ``N(0, 1)``."""
    return abs(math.sqrt(2.0 / (2.0 - gamma)) - 1.0)


def exp_discretization_sweep(cfg, write=True):
    """Bias of the invariant law of ULA as a function of the step size."""
    grad, target_pdf = _target(cfg.target)
    gammas = tuple(sorted(cfg.gammas))
    w = cfg.grid_half_width
    xq = np.linspace(-w, w, 4001)
    pdf = target_pdf(xq)
    grid = M.Grid(((-w, w),), (cfg.grid_cells,))
    truth_tv = M.GridDensity(grid, np.interp(grid.centers()[0], xq, pdf), normalize=True)

    def replicate(args):
        gamma, seed = args
        steps = int(math.ceil(cfg.horizon / gamma))
        burn = int(math.ceil(cfg.burn_time / gamma))
        thin = max(1, int(round(cfg.sample_every / gamma)))
        t0 = time.perf_counter()
        run = run_iula(grad, ChainConfig(gamma, steps, np.zeros(cfg.chains), seed=seed, burn_in=burn, thinning=thin))
        s = run.samples.ravel()
        out = {"runtime": time.perf_counter() - t0}
        if cfg.target == "ou":
            mu, sd = float(s.mean()), float(s.std())
            out["W2"] = math.sqrt(mu * mu + (sd - 1.0) ** 2)
        else:
            sym = np.concatenate([s, -s])
            out["W1"] = M.wasserstein1_to_density(sym, xq, pdf)
        out["TV"] = M.tv_on_grid(M.EmpiricalMeasure(s), truth_tv, grid)
        return out

    seeds = _seeds(cfg)
    jobs = [(g, s) for g in gammas for s in seeds]
    outs = pmap(replicate, jobs)
    res = SweepResult(f"discretization-{cfg.target}", "gamma")
    metric = "W2" if cfg.target == "ou" else "W1"
    for i, g in enumerate(gammas):
        chunk = outs[i * len(seeds):(i + 1) * len(seeds)]
        rt = sum(o["runtime"] for o in chunk)
        res.add(g, metric, [o[metric] for o in chunk], rt)
        res.add(g, "TV", [o["TV"] for o in chunk], rt)
        if cfg.target == "ou":
            res.add(g, "W2_closed_form", [ou_stationary_w2(g)])
            r = res.row(g, "W2")
            res.check(f"ou_closed_form_{g:g}", _within(r.value, ou_stationary_w2(g), r.se),
                      f"W2 {r.value:.5f}+-{3 * r.se:.5f} vs {ou_stationary_w2(g):.5f}")
    gs, vals, ses = res.series(metric)
    mono = all(vals[i] <= vals[i + 1] + 3 * math.hypot(ses[i], ses[i + 1]) for i in range(len(gs) - 1))
    res.check("monotone_in_gamma", mono, " ".join(f"{v:.5f}" for v in vals))
    D = float(vals[-1] / math.sqrt(gs[-1]))
    res.info["envelope_D"] = D
    res.add(gs[-1], "envelope_D", [D])
    env = all(vals[i] <= D * math.sqrt(gs[i]) + 3 * max(ses[i], SE_FLOOR) for i in range(len(gs)))
    res.check("below_sqrt_envelope", env, f"D = {D:.5f}")
    res.check("finite", bool(np.all(np.isfinite(vals))), "")
    if write:
        res.write(cfg.out_dir)
    return res


def exp_moreau_sweep(cfg, write=True):
    """Distance between ``exp(-f - g^gamma)`` and ``exp(-f - g)`` by 1D quadrature."""
    if cfg.g == "l1":
        g = l1_regularizer(cfg.weight, 1)
        lip = cfg.weight
    elif cfg.g == "zero":
        g = zero_regularizer(1)
        lip = 0.0
    else:
        raise ContractViolation(f"unknown regularizer {cfg.g!r}; use l1 or zero")
    x = np.linspace(-cfg.grid_half_width, cfg.grid_half_width, cfg.grid_points)
    f_vals = 0.5 * cfg.f_alpha * x * x

    def density(log_vals):
        pdf = np.exp(log_vals - log_vals.max())
        if max(pdf[0], pdf[-1]) > 1e-14:
            raise ContractViolation("quadrature grid too narrow: density is not negligible at the edges; "
                                    "increase grid_half_width")
        return pdf

    target = density(-f_vals - g.value(x[:, None]))
    gammas = tuple(sorted(cfg.gammas))
    res = SweepResult("moreau", "gamma")
    for gamma in gammas:
        t0 = time.perf_counter()
        env = MoreauEnvelope(g, gamma)
        approx = density(-f_vals - env.values(x[:, None]))
        res.add(gamma, "W1", [M.wasserstein1_densities(x, approx, target)], time.perf_counter() - t0)
    gs, vals, _ = res.series("W1")
    scale = lip * lip
    if scale > 0:
        E = float(vals[-1] / (scale * gs[-1]))
        res.info["envelope_E1"] = E
        res.add(gs[-1], "envelope_E1", [E])
        res.check("below_linear_envelope", all(vals[i] <= E * scale * gs[i] * (1 + 1e-9) for i in range(len(gs))),
                  f"E1 = {E:.5f}")
        res.check("decreasing", all(vals[i] <= vals[i + 1] for i in range(len(gs) - 1)), "")
    else:
        res.check("identical_laws", bool(np.all(vals <= 1e-14)), f"max {vals.max():.3g}")
    if 1e-5 in gs:
        v = res.row(1e-5, "W1").value
        res.check("small_gamma_1e-4", v <= 1e-4, f"W1 {v:.3g}")
    if write:
        res.write(cfg.out_dir)
    return res


# -- TV inpainting -----------------------------------------------------------

def synthetic_image(size=64):
    """Piecewise-constant test image with a rectangle, a disk and a bright square."""
    n = int(size)
    img = np.full((n, n), 0.2)
    s = n / 64.0
    img[int(10 * s):int(30 * s), int(8 * s):int(40 * s)] = 0.8
    ii, jj = np.mgrid[0:n, 0:n]
    img[(ii - 44 * s) ** 2 + (jj - 40 * s) ** 2 <= (12 * s) ** 2] = 0.5
    img[int(48 * s):int(58 * s), int(6 * s):int(16 * s)] = 0.95
    return img


def psnr(a, b):
    mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)


def inpainting_problem(cfg):
    truth = synthetic_image(cfg.size) if cfg.image == "synthetic" else io.read_pgm(cfg.image)
    mask = (np.random.default_rng(cfg.mask_seed).random(truth.shape) >= cfg.mask_fraction).astype(float)
    noise = np.random.default_rng(cfg.noise_seed).standard_normal(truth.shape)
    y = mask * (truth + cfg.sigma * noise)
    lik = GaussianLikelihood(LinearOperator.mask(mask), y, cfg.sigma)
    return truth, mask, y, lik


def exp_inpaint_tv(cfg, write=True):
    """PnP-PSGLA with a TV denoiser on a masked image."""
    truth, mask, y, lik = inpainting_problem(cfg)
    gamma = cfg.gamma if cfg.gamma > 0 else cfg.eps ** 2
    weight = cfg.tv_weight if cfg.tv_weight > 0 else 1.0 / cfg.eps
    h = gamma * lik.lipschitz_grad / cfg.lam
    if h >= 2.0:
        raise ContractViolation(
            f"gradient step on f/lam is unstable: gamma * L_f / lam = {h:.3g} >= 2; "
            "raise lam or sigma, or lower gamma")
    data = lik.tempered(cfg.lam)

    def S(g, v):
        return prox_tv2d(weight, g, v, cfg.inner_iters)

    def replicate(seed):
        t0 = time.perf_counter()
        run = run_inexact_psgla(data, S, ChainConfig(gamma, cfg.steps, y, seed=seed, burn_in=cfg.burn_in))
        mean = run.running_mean
        std = np.sqrt(np.maximum(run.variance, 0.0))
        return dict(mean=mean, std=std, runtime=time.perf_counter() - t0)

    reps = pmap(replicate, _seeds(cfg))
    res = SweepResult("inpaint-tv", "mask_fraction")
    hidden = mask == 0
    f = cfg.mask_fraction
    rt = sum(r["runtime"] for r in reps)
    res.add(f, "psnr_mean", [psnr(r["mean"], truth) for r in reps], rt)
    res.add(f, "psnr_zero_filled", [psnr(y, truth)])
    seen = ~hidden
    res.add(f, "rmse_observed_pixels", [float(np.sqrt(np.mean((r["mean"][seen] - y[seen]) ** 2))) if seen.any()
                                        else 0.0 for r in reps])
    res.add(f, "std_hidden", [float(r["std"][hidden].mean()) if hidden.any() else 0.0 for r in reps])
    res.add(f, "std_observed", [float(r["std"][seen].mean()) if seen.any() else 0.0 for r in reps])
    res.info.update(gamma=gamma, tv_weight=weight, step_ratio=h)
    if write:
        out = cfg.out_dir
        os.makedirs(out, exist_ok=True)
        res.write(out)
        first = reps[0]
        io.write_pgm(os.path.join(out, "truth.pgm"), truth)
        io.write_pgm(os.path.join(out, "observed.pgm"), y)
        io.write_pgm(os.path.join(out, "posterior_mean.pgm"), first["mean"])
        top = float(first["std"].max()) or 1.0
        io.write_pgm(os.path.join(out, "posterior_std.pgm"), first["std"] / top)
        io.write_csv(os.path.join(out, "images.csv"), ("image", "scale"),
                     [("posterior_std.pgm", top), ("posterior_mean.pgm", 1.0)])
    return res


# -- inexact backward step ---------------------------------------------------

def inexact_prox_shift(shifts=(1e-3, 1e-2, 1e-1), gamma=0.1, steps=20000, dim=2, seed=0, replicates=5):
    """Posterior-mean displacement caused by adding ``c * u`` to every prox output.

    Target ``|x|^2 / 2 + |x|_1`` in ``dim`` dimensions, ``u`` the normalized
    all-ones direction; perturbed and exact chains share their noise.
    Rows: ``shift`` (mean displacement) and ``ratio`` (displacement / c).
    """
    f = quadratic_potential(1.0, dim=dim)
    g = l1_regularizer(1.0, dim)
    u = np.ones(dim) / math.sqrt(dim)
    res = SweepResult("inexact-prox", "c")

    def replicate(s):
        cfg = ChainConfig(gamma, steps, np.zeros(dim), seed=s)
        base = run_inexact_psgla(f, g.prox, cfg).running_mean
        out = {}
        for c in shifts:
            mean = run_inexact_psgla(f, lambda gm, v, c=c: g.prox(gm, v) + c * u, cfg).running_mean
            out[c] = float(np.linalg.norm(mean - base))
        return out

    reps = pmap(replicate, [seed + r for r in range(replicates)])
    for c in shifts:
        vals = np.array([r[c] for r in reps])
        res.add(c, "shift", vals)
        res.add(c, "ratio", vals / c)
        r = res.row(c, "ratio")
        res.check(f"ratio_bounded_{c:g}", r.value + 3 * r.se <= INEXACT_PROX_RATIO_BOUND,
                  f"{r.value:.4f}+-{3 * r.se:.4f} vs {INEXACT_PROX_RATIO_BOUND}")
    return res


EXPERIMENTS = {
    "gmm2d": exp_gmm2d,
    "stability": exp_stability_sweep,
    "discretization": exp_discretization_sweep,
    "moreau": exp_moreau_sweep,
    "inpaint": exp_inpaint_tv,
}
