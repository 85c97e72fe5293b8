"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
(see ``conftest.py``); run this file directly to print the lines without pytest.
"""
import itertools
import math
import os
import time

import numpy as np
import pytest

from lpl.harness import config as C
from lpl.harness import experiments as E
from lpl.harness.cli import main
from lpl.harness.proxcheck import run_proxcheck
from lpl.metrics import EmpiricalMeasure, batch_means_se, wasserstein_exact
from lpl.proximal import (box_indicator, double_well_regularizer, l1_regularizer, logcosh_regularizer,
                          prox_bruteforce_oracle, quadratic_regularizer)
from lpl.potentials import zero_potential
from lpl.samplers import ChainConfig, run_iula, run_psgla

RESULTS = {}


def verdict(number, title, passed, detail, elapsed, limit):
    ok = bool(passed) and elapsed < limit
    RESULTS[number] = (f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail} "
                       f"[{elapsed:.1f}s, limit {limit:g}s]")
    assert passed, RESULTS[number]
    assert elapsed < limit, RESULTS[number]


def test_01_proxcheck():
    t0 = time.perf_counter()
    rows = run_proxcheck(probes=100, pairs=1000, seed=0)
    failed = [r.name for r in rows if not r.passed]
    verdict(1, "proximal property suite", not failed,
            f"{len(rows) - len(failed)}/{len(rows)} properties" + (f", failed {failed}" if failed else ""),
            time.perf_counter() - t0, 30)


def _random_regularizer(rng, dim):
    kind = rng.integers(5)
    if kind == 0:
        g = quadratic_regularizer(rng.uniform(0.1, 3.0), dim)
    elif kind == 1:
        g = l1_regularizer(rng.uniform(0.1, 2.0), dim)
    elif kind == 2:
        lo = rng.uniform(-2.0, 0.0, dim)
        g = box_indicator(lo, lo + rng.uniform(0.2, 2.5, dim))
    elif kind == 3:
        g = double_well_regularizer(rng.uniform(0.05, 0.5), dim)
    else:
        g = logcosh_regularizer(rng.uniform(0.5, 2.0), rng.uniform(1.0, 3.0), rng.uniform(0.5, 1.5), dim)
    rho = g.weak_convexity
    gamma = rng.uniform(0.05, 1.5) if rho == 0 else rng.uniform(0.05, 0.9) / rho
    return g, gamma


def test_02_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst, cases = 0.0, 0
    for k in range(240):
        dim = 1 if k % 2 == 0 else 2
        res = 1e-2 if dim == 1 else 2e-2
        g, gamma = _random_regularizer(rng, dim)
        x = rng.uniform(-3.0, 3.0, dim)
        oracle = prox_bruteforce_oracle(g.value, gamma, x, (-6.0, 6.0), res)
        # three refinement rounds leave a final grid step of res / 1000
        worst = max(worst, np.abs(oracle - g.prox(gamma, x)).max() / (res * 1e-3))
        cases += 1
    verdict(2, "analytic prox vs brute-force oracle", worst <= 2.0,
            f"{cases} cases, worst error {worst:.2f} final-grid steps (limit 2)", time.perf_counter() - t0, 60)


def test_03_exact_ot_vs_permutations():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    perms = {n: np.array(list(itertools.permutations(range(n)))) for n in range(1, 8)}
    worst = 0.0
    for k in range(500):
        n, p, d = int(rng.integers(1, 8)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
        xa, xb = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        cost = np.linalg.norm(xa[:, None] - xb[None], axis=-1) ** p
        brute = cost[np.arange(n), perms[n]].mean(axis=1).min() ** (1 / p)
        got = wasserstein_exact(EmpiricalMeasure(xa), EmpiricalMeasure(xb), p)
        worst = max(worst, abs(got - brute))
    verdict(3, "exact OT vs permutation brute force", worst <= 1e-9,
            f"500 instances, max |diff| {worst:.2e}", time.perf_counter() - t0, 60)


def _variance_within(samples, target):
    x = np.asarray(samples).ravel()
    dev = (x - x.mean()) ** 2
    var, se = float(dev.mean()), batch_means_se(dev)
    return abs(var - target) <= 3 * se, f"{var:.5f} vs {target:.5f} (3 SE {3 * se:.5f})"


def test_04_discrete_stationary_laws():
    t0 = time.perf_counter()
    gamma, n = 0.1, 200_000
    cfg = ChainConfig(gamma, n, [0.0], seed=4)
    ok_ula, d_ula = _variance_within(run_iula(lambda x: x, cfg).samples, 2 / (2 - gamma))
    ok_psg, d_psg = _variance_within(run_psgla(zero_potential(1), quadratic_regularizer(1.0, 1), cfg).samples,
                                     2 / (2 + gamma))
    verdict(4, "discrete stationary variances", ok_ula and ok_psg, f"iULA {d_ula}; PSGLA {d_psg}",
            time.perf_counter() - t0, 30)


def _checks(res):
    failed = [k for k, (ok, _) in res.checks.items() if not ok]
    return not failed, failed


def test_05_stability_scaling(tmp_path):
    t0 = time.perf_counter()
    res = E.exp_stability_sweep(C.default_config("stability").with_values(out=str(tmp_path)))
    ok, failed = _checks(res)
    shifts = [k for k in res.checks if k.startswith("ou_shift_")]
    verdict(5, "stability scaling", ok and len(shifts) >= 4,
            f"{len(shifts)} shifts within 3 SE, {res.checks['slope_in_range'][1]}" + (f", failed {failed}" if failed else ""),
            time.perf_counter() - t0, 300)


def test_06_discretization_scaling(tmp_path):
    t0 = time.perf_counter()
    base = C.default_config("discretization")
    ou = E.exp_discretization_sweep(base.with_values(out=str(tmp_path / "ou")))
    dw = E.exp_discretization_sweep(base.with_values(out=str(tmp_path / "dw"), target="double_well"))
    ok_ou, f_ou = _checks(ou)
    ok_dw, f_dw = _checks(dw)
    n_closed = sum(k.startswith("ou_closed_form_") for k in ou.checks)
    verdict(6, "discretization scaling", ok_ou and ok_dw and n_closed == len(base.gammas),
            f"OU {n_closed} closed-form points; double well monotone, {dw.checks['below_sqrt_envelope'][1]}"
            + (f", failed {f_ou + f_dw}" if f_ou or f_dw else ""), time.perf_counter() - t0, 600)


def test_07_moreau_decay(tmp_path):
    t0 = time.perf_counter()
    res = E.exp_moreau_sweep(C.default_config("moreau").with_values(out=str(tmp_path)))
    ok, failed = _checks(res)
    w = res.row(1e-5, "W1").value
    verdict(7, "Moreau approximation decay", ok and w <= 1e-4,
            f"{res.checks['below_linear_envelope'][1]}, W1(1e-5) = {w:.2e}" + (f", failed {failed}" if failed else ""),
            time.perf_counter() - t0, 60)


def test_08_gmm2d(tmp_path):
    t0 = time.perf_counter()
    cfg = C.default_config("gmm2d").with_values(out=str(tmp_path), checkpoints=(10000,), p=(2,), svg=False,
                                                write_chains=False)
    assert cfg.steps == 10000 and cfg.replicates == 5 and cfg.n_ref == 2000
    res = E.exp_gmm2d(cfg)
    s, u = res.row(10000, "pnp_psgla.W2"), res.row(10000, "pnp_ula.W2")
    ok = res.checks["psgla_w2_below_ula"][0] and res.checks["psgla_covers_modes"][0]
    verdict(8, "GMM-2D PnP-PSGLA vs PnP-ULA", ok,
            f"W2 {s.value:.3f}+-{s.se:.3f} vs {u.value:.3f}+-{u.se:.3f}; {res.checks['psgla_covers_modes'][1]}",
            time.perf_counter() - t0, 600)


def test_09_inexact_prox():
    t0 = time.perf_counter()
    res = E.inexact_prox_shift()
    ok, failed = _checks(res)
    ratios = " ".join(f"{c:g}:{res.row(c, 'ratio').value:.3f}" for c in (1e-3, 1e-2, 1e-1))
    verdict(9, "inexact-prox stability", ok and len(res.checks) == 3,
            f"ratio shift/c {ratios} <= {E.INEXACT_PROX_RATIO_BOUND}" + (f", failed {failed}" if failed else ""),
            time.perf_counter() - t0, 300)


DETERMINISM_CONFIGS = {
    "gmm2d": "steps = 400\ncheckpoints = 100, 400\nn_ref = 300\nn_sub = 300\nreplicates = 2\ngrid_cells = 40\n",
    "stability": "steps = 3000\nburn_in = 300\nchains = 20\nreplicates = 2\n",
    "discretization": "gammas = 0.1, 0.2\nhorizon = 200\nchains = 20\nreplicates = 2\n",
    "moreau": "gammas = 0.1, 0.01\ngrid_points = 20001\n",
    "inpaint": "size = 16\nsteps = 60\nburn_in = 10\nreplicates = 2\n",
}


def test_10_determinism(tmp_path):
    t0 = time.perf_counter()
    differing = []
    n_files = 0
    for name, text in DETERMINISM_CONFIGS.items():
        (tmp_path / f"{name}.cfg").write_text(text)
        outs = []
        for run in ("a", "b"):
            out = tmp_path / name / run
            assert main([name, "--config", str(tmp_path / f"{name}.cfg"), "--seed", "5", "--out", str(out)]) == 0
            outs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))
                         if f.endswith(".csv") and not f.endswith("_timings.csv")})
        n_files += len(outs[0])
        if outs[0] != outs[1]:
            differing.append(name)
    verdict(10, "determinism", not differing,
            f"{n_files} CSV files across {len(DETERMINISM_CONFIGS)} experiments byte-identical"
            + (f", differing {differing}" if differing else ""), time.perf_counter() - t0, math.inf)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
