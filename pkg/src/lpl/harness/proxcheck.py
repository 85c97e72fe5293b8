"""Property suite for the shipped proximal maps and their Moreau envelopes.

Each row is a statistic compared with a threshold. The suite is seeded, so
its table is reproducible.
"""
from dataclasses import dataclass

import numpy as np

from ..proximal import (MoreauEnvelope, box_indicator, double_well_regularizer, l1_regularizer,
                        logcosh_regularizer, prox_fixed_point_check, quadratic_regularizer,
                        zero_regularizer)

FIXED_POINT_TOL = 1e-6
GRAD_FD_TOL = 1e-5
LIPSCHITZ_SLACK = 1e-8
HESSIAN_EXACT_TOL = 1e-10
HESSIAN_FD_TOL = 1e-4
CURVATURE_TOL = 1e-3
GAMMAS_TO_ZERO = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
# a linear rate gives 0.1 per decade
LAST_DECADE_RATIO = 0.2


@dataclass(frozen=True)
class PropertyRow:
    name: str
    statistic: float
    threshold: float
    passed: bool
    note: str = ""


def shipped_regularizers():
    """``(regularizer, gamma)`` pairs; the weakly convex ones run at ``gamma rho = 0.5``."""
    dw = double_well_regularizer(0.25, 1)
    lc = logcosh_regularizer(1.0, 2.0, 1.0, 2)
    return [
        (zero_regularizer(2), 0.5),
        (quadratic_regularizer(1.5, 2), 0.5),
        (l1_regularizer(1.0, 2), 0.5),
        (box_indicator([-1.0, -1.0], [1.0, 1.0]), 0.5),
        (dw, 0.5 / dw.weak_convexity),
        (lc, 0.5 / lc.weak_convexity),
    ]


def _fd_gradient(fn, x, h):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def _fd_jacobian(fn, x, h):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fn(x + e) - fn(x - e)) / (2.0 * h))
    return np.stack(cols, axis=1)


def _row(name, stat, threshold, note=""):
    return PropertyRow(name, float(stat), float(threshold), bool(stat <= threshold), note)


def check_fixed_point(g, gamma, rng, probes):
    xs = rng.normal(scale=2.0, size=(probes, g.dim))
    worst = max(prox_fixed_point_check(g, gamma, x) / (1.0 + np.linalg.norm(x)) for x in xs)
    return _row(f"fixed_point[{g.name}]", worst, FIXED_POINT_TOL, "|prox(x + gamma grad g) - x| / (1 + |x|)")


def check_moreau_gradient(g, gamma, rng, probes):
    env = MoreauEnvelope(g, gamma)
    worst = 0.0
    for x in rng.normal(scale=2.0, size=(probes, g.dim)):
        grad = env.gradient(x)
        fd = _fd_gradient(env.value, x, 1e-5 * (1.0 + np.linalg.norm(x)))
        worst = max(worst, np.linalg.norm(grad - fd) / max(np.linalg.norm(grad), 1.0))
    return _row(f"moreau_gradient_fd[{g.name}]", worst, GRAD_FD_TOL, "relative error, floor 1 on |grad|")


def check_lipschitz(g, gamma, rng, pairs):
    bound = g.prox_lipschitz(gamma)
    x = rng.normal(scale=2.0, size=(pairs, g.dim))
    # mix far pairs and near pairs
    scales = 10.0 ** rng.uniform(-6, 1, size=(pairs, 1))
    y = x + scales * rng.standard_normal((pairs, g.dim))
    worst = -np.inf
    for a, b in zip(x, y):
        gap = np.linalg.norm(g.prox(gamma, a) - g.prox(gamma, b)) - bound * np.linalg.norm(a - b)
        worst = max(worst, gap)
    return _row(f"prox_lipschitz[{g.name}]", worst, LIPSCHITZ_SLACK,
                f"max |dprox| - |dx| / (1 - gamma rho), bound factor {bound:g}")


def check_monotone_in_gamma(g, gamma_max, rng, probes):
    gammas = gamma_max * np.array([1.0, 0.5, 0.25, 0.1, 0.01])
    worst = -np.inf
    for x in rng.normal(scale=2.0, size=(probes, g.dim)):
        vals = [MoreauEnvelope(g, t).value(x) for t in gammas]  # decreasing gamma
        gx = float(g.value(x))
        steps = [vals[i] - vals[i + 1] for i in range(len(vals) - 1)]
        if np.isfinite(gx):
            steps.append(vals[-1] - gx)
        slack = 1e-12 * (1.0 + max(abs(v) for v in vals))
        worst = max(worst, max(steps) - slack)
    return _row(f"monotone_in_gamma[{g.name}]", worst, 0.0, "g^g2 <= g^g1 <= g for g1 < g2")


def check_gamma_to_zero(g, rng, probes):
    """The gap ``g - g^gamma`` shrinks monotonically, and linearly over the last decade of gamma."""
    worst = 0.0
    for x in rng.normal(scale=2.0, size=(probes, g.dim)):
        gx = float(g.value(x))
        gaps = [abs(MoreauEnvelope(g, t).value(x) - gx) for t in GAMMAS_TO_ZERO if t * g.weak_convexity < 1]
        if gaps[-2] == 0.0:
            continue
        tol = 1e-12 * (1.0 + abs(gx))
        rising = max(gaps[i + 1] - gaps[i] for i in range(len(gaps) - 1))
        if rising > tol:
            worst = max(worst, 1.0 + rising)
        worst = max(worst, (gaps[-1] - tol) / (LAST_DECADE_RATIO * gaps[-2]))
    return _row(f"gamma_to_zero[{g.name}]", worst, 1.0,
                f"gap decreasing and gap(1e-5) <= {LAST_DECADE_RATIO:g} gap(1e-4); statistic in units of that bound")


def check_lipschitz_rate(weight, dim, rng, probes):
    g = l1_regularizer(weight, dim)
    worst = -np.inf
    for gamma in GAMMAS_TO_ZERO:
        env = MoreauEnvelope(g, gamma)
        cap = gamma * g.lipschitz ** 2 / 2.0
        for x in rng.normal(scale=2.0, size=(probes, dim)):
            gap = float(g.value(x)) - env.value(x)
            worst = max(worst, -gap, gap - cap)
    return _row(f"lipschitz_rate[{g.name}]", worst, 1e-12, "0 <= g - g^gamma <= gamma L^2 / 2")


def check_hessian_quadratic(alpha, gamma, rng, probes):
    g = quadratic_regularizer(alpha, 2)
    env = MoreauEnvelope(g, gamma)
    exact = alpha / (1.0 + gamma * alpha) * np.eye(2)
    worst = max(np.abs(env.hessian(x) - exact).max() for x in rng.normal(scale=2.0, size=(probes, 2)))
    return _row(f"hessian_exact[{g.name}]", worst, HESSIAN_EXACT_TOL, "alpha / (1 + gamma alpha) I")


def check_hessian_fd(g, gamma, rng, probes):
    env = MoreauEnvelope(g, gamma)
    worst = 0.0
    for x in rng.normal(scale=2.0, size=(probes, g.dim)):
        fd = _fd_jacobian(env.gradient, x, 1e-5 * (1.0 + np.linalg.norm(x)))
        h = env.hessian(x)
        worst = max(worst, np.abs(h - fd).max() / max(np.abs(h).max(), 1.0))
    return _row(f"hessian_fd[{g.name}]", worst, HESSIAN_FD_TOL, "closed form vs differenced gradient")


def check_smoothness_transfer(g, rng, probes):
    """Spectrum of the envelope Hessian within ``[-2 L_g, L_g]`` for ``gamma = 1 / (2 L_g)``."""
    L = g.smoothness
    env = MoreauEnvelope(g, 1.0 / (2.0 * L))
    worst = -np.inf
    for x in rng.normal(scale=2.0, size=(probes, g.dim)):
        fd = _fd_jacobian(env.gradient, x, 1e-5 * (1.0 + np.linalg.norm(x)))
        ev = np.linalg.eigvalsh(0.5 * (fd + fd.T))
        worst = max(worst, -2.0 * L - ev.min(), ev.max() - L)
    return _row(f"smoothness_transfer[{g.name}]", worst, CURVATURE_TOL, f"L_g = {L:g}")


def check_weak_convexity_transfer(g, gamma):
    env = MoreauEnvelope(g, gamma)
    rho = g.weak_convexity
    floor = -rho / (1.0 - gamma * rho)
    h = 1e-4
    xs = np.linspace(-3.0, 3.0, 601)
    second = [(env.value(np.array([x + h])) - 2.0 * env.value(np.array([x])) + env.value(np.array([x - h]))) / h ** 2
              for x in xs]
    return _row(f"weak_convexity_transfer[{g.name}]", floor - min(second), CURVATURE_TOL,
                f"second difference >= {floor:g}")


def check_convexity_at_infinity(g, gamma, tail_curvature, radius, rng, probes):
    """Envelope Hessian outside a ball against ``mu / (1 + gamma mu)``, ``mu`` the tail curvature of ``g``."""
    env = MoreauEnvelope(g, gamma)
    mu_gamma = tail_curvature / (1.0 + gamma * tail_curvature)
    dirs = rng.standard_normal((probes, g.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    xs = dirs * rng.uniform(radius, 10.0 * radius, size=(probes, 1))
    low = min(np.linalg.eigvalsh(env.hessian(x)).min() for x in xs)
    return _row(f"convexity_at_infinity[{g.name}]", (mu_gamma - low) / mu_gamma, CURVATURE_TOL,
                f"relative shortfall of min eig below {mu_gamma:g} for |x| >= {radius:g}")


def run_proxcheck(probes=100, pairs=1000, seed=0):
    """All property rows, in a fixed order."""
    rng = np.random.default_rng(seed)
    rows = []
    shipped = shipped_regularizers()
    for g, gamma in shipped:
        if g.gradient is not None:
            rows.append(check_fixed_point(g, gamma, rng, probes))
    for g, gamma in shipped:
        if g.name != "box":
            rows.append(check_moreau_gradient(g, gamma, rng, probes))
    for g, gamma in shipped:
        rows.append(check_lipschitz(g, gamma, rng, pairs))
    for g, gamma in shipped:
        rows.append(check_monotone_in_gamma(g, gamma, rng, probes))
    for g, _ in shipped:
        if g.name not in ("box", "zero"):
            rows.append(check_gamma_to_zero(g, rng, probes))
    rows.append(check_lipschitz_rate(1.0, 2, rng, probes))
    rows.append(check_hessian_quadratic(1.5, 0.5, rng, probes))
    for g, gamma in shipped:
        if g.name.startswith(("double_well", "logcosh")):
            rows.append(check_hessian_fd(g, gamma, rng, probes))
    rows.append(check_convexity_at_infinity(quadratic_regularizer(1.5, 2), 0.5, 1.5, 1.0, rng, probes))
    # separable in 2D, so only the 1D instance is convex outside a ball
    lc = logcosh_regularizer(1.0, 2.0, 1.0, 1)
    rows.append(check_convexity_at_infinity(lc, 0.5 / lc.weak_convexity, 1.0, 5.0, rng, probes))
    rows.append(check_smoothness_transfer(logcosh_regularizer(1.0, 2.0, 1.0, 2), rng, probes))
    dw = double_well_regularizer(0.25, 1)
    rows.append(check_weak_convexity_transfer(dw, 0.5 / dw.weak_convexity))
    return rows


def format_table(rows):
    width = max(len(r.name) for r in rows)
    lines = [f"{'property'.ljust(width)}  {'statistic':>12}  {'threshold':>10}  result"]
    for r in rows:
        lines.append(f"{r.name.ljust(width)}  {r.statistic:12.3e}  {r.threshold:10.1e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
