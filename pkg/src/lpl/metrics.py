"""Distances between empirical measures and against gridded densities."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import _backend
from .errors import ContractViolation

OT_MIN_COST_SCALE = 10 ** 9
OT_MAX_COST_SCALE = 10 ** 15
OT_MAX_CELLS = 4_000_000
WEIGHT_QUANTUM_BITS = 40
KDE_CHUNK = 4096


class EmpiricalMeasure:
    """Weighted point cloud; uniform weights unless given.

    Parameters
    ----------
    points : (n, d) array_like
        A 1-D array is read as ``n`` points on the line.
    weights : (n,) array_like, optional
        Nonnegative, summing to one within 1e-10.
    """

    def __init__(self, points, weights=None):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ContractViolation("empirical measure needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ContractViolation("empirical measure has non-finite points")
        n = pts.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
            self.uniform = True
        else:
            w = np.array(weights, dtype=float).ravel()
            if w.size != n:
                raise ContractViolation("one weight per point is required")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise ContractViolation("weights must be nonnegative and sum to 1")
            self.uniform = bool(np.all(w == w[0]))
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def subsample(self, m, rng):
        """Uniform subsample of ``m`` distinct points (uniform measures only)."""
        if not self.uniform:
            raise ContractViolation("subsampling is defined for uniform measures")
        if m >= self.n:
            return self
        idx = np.sort(rng.choice(self.n, size=m, replace=False))
        return EmpiricalMeasure(self.points[idx])


@dataclass(frozen=True)
class Grid:
    """Regular cell grid on a box in ``d <= 2`` dimensions."""

    bounds: tuple
    resolution: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if len(res) == 1 and len(bounds) > 1:
            res = res * len(bounds)
        if len(bounds) not in (1, 2) or len(res) != len(bounds):
            raise ContractViolation("grids support d = 1 or d = 2")
        if any(hi <= lo for lo, hi in bounds) or any(r < 1 for r in res):
            raise ContractViolation("invalid grid bounds or resolution")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)

    @property
    def d(self):
        return len(self.bounds)

    @property
    def widths(self):
        return tuple((hi - lo) / r for (lo, hi), r in zip(self.bounds, self.resolution))

    @property
    def cell_volume(self):
        return float(np.prod(self.widths))

    def centers(self):
        return [lo + (np.arange(r) + 0.5) * w
                for (lo, _), r, w in zip(self.bounds, self.resolution, self.widths)]

    def center_points(self):
        mesh = np.meshgrid(*self.centers(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_masses(self, measure):
        """Mass per cell plus the mass falling outside the grid."""
        if measure.d != self.d:
            raise ContractViolation("measure and grid dimensions differ")
        idx = []
        inside = np.ones(measure.n, dtype=bool)
        for i, ((lo, hi), r, w) in enumerate(zip(self.bounds, self.resolution, self.widths)):
            x = measure.points[:, i]
            inside &= (x >= lo) & (x <= hi)
            idx.append(np.clip(np.floor((x - lo) / w).astype(np.int64), 0, r - 1))
        flat = np.ravel_multi_index(tuple(ix[inside] for ix in idx), self.resolution)
        masses = np.bincount(flat, weights=measure.weights[inside],
                             minlength=int(np.prod(self.resolution))).reshape(self.resolution)
        return masses, float(measure.weights[~inside].sum())


class GridDensity:
    """Nonnegative density on a :class:`Grid`, normalized to unit mass."""

    def __init__(self, grid, values, normalize=False):
        v = np.array(values, dtype=float).reshape(grid.resolution)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ContractViolation("density values must be finite and nonnegative")
        total = v.sum() * grid.cell_volume
        if normalize:
            if total <= 0:
                raise ContractViolation("density has zero mass on the grid")
            v = v / total
        elif abs(total - 1.0) > 1e-8:
            raise ContractViolation(f"density integrates to {total!r} on the grid, not 1")
        v.setflags(write=False)
        self.grid = grid
        self.values = v

    @classmethod
    def from_function(cls, fn, grid):
        """Evaluate ``fn`` (on an ``(m, d)`` batch) at cell centres and normalize."""
        vals = np.asarray(fn(grid.center_points()), dtype=float)
        return cls(grid, vals, normalize=True)

    @classmethod
    def from_log_function(cls, log_fn, grid):
        lv = np.asarray(log_fn(grid.center_points()), dtype=float)
        return cls(grid, np.exp(lv - lv.max()), normalize=True)

    def cell_masses(self):
        return self.values * self.grid.cell_volume

    def sample(self, n, rng):
        """Draw from the piecewise-constant density: pick a cell, then a uniform point in it."""
        m = self.cell_masses().ravel()
        cdf = np.cumsum(m)
        cells = np.minimum(np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right"), m.size - 1)
        ix = np.unravel_index(cells, self.grid.resolution)
        u = rng.random((n, self.grid.d))
        cols = [lo + (ix[i] + u[:, i]) * w for i, ((lo, _), w) in enumerate(zip(self.grid.bounds, self.grid.widths))]
        return np.stack(cols, axis=1)


# -- optimal transport -----------------------------------------------------

def _integer_masses(w):
    total = 1 << WEIGHT_QUANTUM_BITS
    q = np.floor(w * total)
    short = total - int(q.sum())
    frac_order = np.argsort(-(w * total - q), kind="stable")
    q[frac_order[:short]] += 1.0
    return q


def cost_scale(na, nb):
    """Integer value given to the largest cost.

    The largest power of ten, between 1e9 and 1e15, for which every shortest
    path distance and potential of the flow solver stays far inside int64.
    """
    headroom = (1 << 62) // (8 * (na + nb + 1))
    k = max(9, min(15, int(math.floor(math.log10(headroom)))))
    return 10 ** k


def _transport_masses(a, b):
    if a.uniform and b.uniform:
        g = math.gcd(a.n, b.n)
        return np.full(a.n, float(b.n // g)), np.full(b.n, float(a.n // g))
    return _integer_masses(a.weights), _integer_masses(b.weights)


def optimal_plan(a, b, p=1):
    """Optimal coupling for cost ``|x - y|^p`` with a verified optimality certificate.

    Costs are scaled so the largest equals ``cost_scale`` (at least 1e9) and
    rounded to integers; the
    min-cost flow over these integers carries integer masses (an lcm split
    for uniform measures, 2^-40 quanta otherwise), so complementary slackness
    is checked exactly.

    Returns
    -------
    plan : (n_a, n_b) array
        Transport plan with marginals ``a.weights`` and ``b.weights``.
    cost : (n_a, n_b) array
        The unscaled cost matrix.
    """
    if a.d != b.d:
        raise ContractViolation("measures live in different dimensions")
    if a.n * b.n > OT_MAX_CELLS:
        raise ContractViolation(
            f"exact transport limited to n_a * n_b <= {OT_MAX_CELLS}; use wasserstein_sliced for larger clouds")
    cost = cdist(a.points, b.points) ** p
    top = float(cost.max())
    supply, demand = _transport_masses(a, b)
    if top == 0.0:
        plan = np.outer(a.weights, b.weights)
        return plan, cost
    icost = np.rint(cost * (cost_scale(a.n, b.n) / top)).astype(np.int64)
    if a.n < b.n:
        # each search scans one row at a time, so rows should be the longer side
        flow, v, u = _backend.transport_ssp(np.ascontiguousarray(icost.T), demand, supply)
        flow = flow.T
    else:
        flow, u, v = _backend.transport_ssp(icost, supply, demand)
    reduced = icost - u[:, None] - v[None, :]
    support = flow > 0
    if reduced.min() < 0 or np.any(reduced[support] != 0):
        raise RuntimeError("transport certificate failed: reduced costs violate complementary slackness")
    if np.any(flow.sum(axis=1) != supply) or np.any(flow.sum(axis=0) != demand):
        raise RuntimeError("transport certificate failed: marginals do not match")
    return flow / supply.sum(), cost


def wasserstein_exact(a, b, p=1):
    """``W_p`` between two empirical measures by exact optimal transport."""
    if p < 1:
        raise ContractViolation("p must be at least 1")
    plan, cost = optimal_plan(a, b, p)
    total = float(np.sum(plan[plan > 0] * cost[plan > 0]))
    return total ** (1.0 / p)


def wasserstein_1d(xa, xb, p=1, wa=None, wb=None):
    """``W_p`` on the line via the monotone (quantile) coupling."""
    xa = np.asarray(xa, dtype=float).ravel()
    xb = np.asarray(xb, dtype=float).ravel()
    if wa is None and wb is None and xa.size == xb.size:
        d = np.abs(np.sort(xa) - np.sort(xb))
        return float(np.mean(d ** p)) ** (1.0 / p)
    wa = np.full(xa.size, 1.0 / xa.size) if wa is None else np.asarray(wa, dtype=float)
    wb = np.full(xb.size, 1.0 / xb.size) if wb is None else np.asarray(wb, dtype=float)
    ia, ib = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    xa, wa, xb, wb = xa[ia], wa[ia], xb[ib], wb[ib]
    ca, cb = np.cumsum(wa), np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    t = np.union1d(ca, cb)
    dt = np.diff(np.concatenate(([0.0], t)))
    mid = t - 0.5 * dt
    qa = xa[np.minimum(np.searchsorted(ca, mid, side="left"), xa.size - 1)]
    qb = xb[np.minimum(np.searchsorted(cb, mid, side="left"), xb.size - 1)]
    return float(np.sum(dt * np.abs(qa - qb) ** p)) ** (1.0 / p)


def wasserstein_sliced(a, b, p=1, n_proj=100, seed=0):
    """Average over random unit directions of the 1-D ``W_p`` between projections."""
    if n_proj < 1:
        raise ContractViolation("n_proj must be at least 1")
    if a.d != b.d:
        raise ContractViolation("measures live in different dimensions")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_proj, a.d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = a.points @ dirs.T
    pb = b.points @ dirs.T
    wa = None if a.uniform else a.weights
    wb = None if b.uniform else b.weights
    vals = [wasserstein_1d(pa[:, i], pb[:, i], p, wa, wb) for i in range(n_proj)]
    return float(np.mean(vals))


def wasserstein1_to_density(samples, x, pdf):
    """``W_1`` between a 1-D sample and a density tabulated on an increasing grid ``x``.

    Uses ``int |F_sample - F|`` with the density's CDF from the trapezoid rule.
    """
    x = np.asarray(x, dtype=float)
    pdf = np.asarray(pdf, dtype=float)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))))
    cdf /= cdf[-1]
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    emp = np.searchsorted(s, x, side="right") / s.size
    # empirical mass beyond the tabulated range
    tail = float(np.sum(np.maximum(x[0] - s, 0.0)) + np.sum(np.maximum(s - x[-1], 0.0))) / s.size
    gap = np.abs(emp - cdf)
    return float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(x))) + tail


def wasserstein1_densities(x, pdf_a, pdf_b):
    """``W_1`` between two densities tabulated on the same grid."""
    x = np.asarray(x, dtype=float)

    def cdf(pdf):
        c = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))))
        return c / c[-1]

    gap = np.abs(cdf(np.asarray(pdf_a, dtype=float)) - cdf(np.asarray(pdf_b, dtype=float)))
    return float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(x)))


# -- grid-based diagnostics ------------------------------------------------

def silverman_bandwidth(a):
    """Per-axis ``sigma_j (4 / ((d + 2) n))^(1 / (d + 4))`` with ``n`` the effective sample size."""
    w = a.weights
    n_eff = 1.0 / float(np.sum(w * w))
    mu = w @ a.points
    sd = np.sqrt(w @ (a.points - mu) ** 2)
    sd = np.where(sd > 0, sd, 1.0)
    return sd * (4.0 / ((a.d + 2) * n_eff)) ** (1.0 / (a.d + 4))


def kde_on_grid(a, grid, bandwidth=None):
    """Gaussian product-kernel KDE at cell centres, renormalized to unit mass on the grid."""
    if a.d != grid.d:
        raise ContractViolation("measure and grid dimensions differ")
    h = silverman_bandwidth(a) if bandwidth is None else np.broadcast_to(np.asarray(bandwidth, dtype=float), (a.d,))
    if np.any(h <= 0):
        raise ContractViolation("bandwidth must be positive")
    centers = grid.centers()
    vals = np.zeros(grid.resolution)
    for start in range(0, a.n, KDE_CHUNK):
        pts = a.points[start:start + KDE_CHUNK]
        w = a.weights[start:start + KDE_CHUNK]
        factors = []
        for i, c in enumerate(centers):
            u = (c[None, :] - pts[:, i][:, None]) / h[i]
            factors.append(np.exp(-0.5 * u * u) / (h[i] * math.sqrt(2.0 * math.pi)))
        if grid.d == 1:
            vals += w @ factors[0]
        else:
            vals += (w[:, None] * factors[0]).T @ factors[1]
    return GridDensity(grid, vals, normalize=True)


def kde_l2_error(a, truth, bandwidth=None):
    """``L2`` distance on the grid between the KDE of ``a`` and ``truth``."""
    if a.n < 1:
        raise ContractViolation("empty measure")
    est = kde_on_grid(a, truth.grid, bandwidth)
    diff = est.values - truth.values
    return float(math.sqrt(np.sum(diff * diff) * truth.grid.cell_volume))


def tv_on_grid(a, b, grid):
    """Half the ``L1`` distance between cell-mass histograms; mass off the grid is one extra cell."""
    ma, oa = grid.cell_masses(a)
    if isinstance(b, GridDensity):
        if b.grid != grid:
            raise ContractViolation("density is tabulated on a different grid")
        mb, ob = b.cell_masses(), 0.0
    else:
        mb, ob = grid.cell_masses(b)
    return float(min(1.0, 0.5 * (np.sum(np.abs(ma - mb)) + abs(oa - ob))))


def drift_l2_mismatch(b1, b2, mu, vectorized=False):
    """``(E_mu |b1(Y) - b2(Y)|^2)^(1/2)`` over the points of ``mu``."""
    if vectorized:
        diff = np.asarray(b1(mu.points), dtype=float) - np.asarray(b2(mu.points), dtype=float)
    else:
        diff = np.array([np.asarray(b1(x), dtype=float) - np.asarray(b2(x), dtype=float) for x in mu.points])
    sq = np.sum(diff.reshape(mu.n, -1) ** 2, axis=1)
    return float(math.sqrt(mu.weights @ sq))


def mode_occupancy(a, gmm):
    """Mass of ``a`` assigned to each component by maximum responsibility."""
    resp = gmm.responsibilities(a.points)
    owner = np.argmax(resp, axis=1)
    return np.bincount(owner, weights=a.weights, minlength=gmm.k)


def batch_means_se(series, n_batches=50):
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < 2 * n_batches:
        raise ContractViolation(f"need at least {2 * n_batches} values for {n_batches} batches")
    size = n // n_batches
    means = x[: size * n_batches].reshape((n_batches, size) + x.shape[1:]).mean(axis=1)
    return np.std(means, axis=0, ddof=1) / math.sqrt(n_batches)
