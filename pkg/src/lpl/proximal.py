"""Proximal operators, Moreau envelopes and the shadow drift of the proximal Langevin step.

Every regularizer is a :class:`ProxRegularizer`. Values are summed over the
last axis, so a regularizer on ``R^d`` evaluated on an ``(n, d)`` batch gives
``n`` values; this is what the brute-force oracle relies on.
"""
import math

import numpy as np

from . import _backend
from .errors import BoxTooSmallError, ContractViolation


class ProxRegularizer:
    """A (possibly nonsmooth, weakly convex) regularizer with its proximal map.

    Parameters
    ----------
    dim : int or tuple
        Shape of the argument (an int for vectors).
    value : callable
        ``value(x)``; may return ``inf`` (indicators).
    prox : callable
        ``prox(gamma, x)``, the minimizer of ``|x - y|^2 / (2 gamma) + g(y)``.
    weak_convexity : float
        ``rho >= 0`` such that ``g + rho |.|^2 / 2`` is convex.
    smoothness : float, optional
        Lipschitz constant of ``grad g`` on the image of the prox, when ``g``
        is smooth there.
    lipschitz : float, optional
        Lipschitz constant of ``g`` itself, when finite.
    gradient, hessian : callable, optional
        For smooth ``g``; ``hessian`` returns a ``(d, d)`` matrix.
    """

    def __init__(self, dim, value, prox, weak_convexity=0.0, smoothness=None,
                 lipschitz=None, gradient=None, hessian=None, name="g"):
        if weak_convexity < 0:
            raise ContractViolation("weak-convexity modulus must be nonnegative")
        self.shape = (int(dim),) if np.ndim(dim) == 0 else tuple(int(s) for s in dim)
        self.dim = int(np.prod(self.shape))
        self.value = value
        self._prox = prox
        self.weak_convexity = float(weak_convexity)
        self.smoothness = smoothness
        self.lipschitz = lipschitz
        self.gradient = gradient
        self.hessian = hessian
        self.name = name

    def __repr__(self):
        return f"ProxRegularizer({self.name}, rho={self.weak_convexity:g})"

    def check_gamma(self, gamma):
        if not gamma > 0:
            raise ContractViolation("step size must be positive")
        if gamma * self.weak_convexity >= 1.0:
            raise ContractViolation(
                f"prox of {self.name} needs gamma * rho < 1 (gamma={gamma!r}, rho={self.weak_convexity!r})")

    def prox(self, gamma, x):
        self.check_gamma(gamma)
        return self._prox(gamma, x)

    def prox_lipschitz(self, gamma):
        """Lipschitz constant ``1 / (1 - gamma rho)`` of ``prox(gamma, .)``."""
        return 1.0 / (1.0 - gamma * self.weak_convexity)


# -- analytic proximal maps ----------------------------------------------

def prox_quadratic(alpha, gamma, x):
    """Prox of ``(alpha / 2) |.|^2``."""
    return np.asarray(x, dtype=float) / (1.0 + gamma * alpha)


def prox_l1(weight, gamma, x):
    """Soft thresholding at ``gamma * weight``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma * weight, 0.0)


def prox_box_indicator(lo, hi, gamma, x):
    """Projection onto ``[lo, hi]``; does not depend on ``gamma``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ContractViolation("box lower bound exceeds upper bound")
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def _prox_double_well(c, gamma, x):
    # stationarity: 4 c gamma y^3 + (1 - 4 c gamma) y - x = 0, monotone when 8 c gamma < 1
    x = np.asarray(x, dtype=float)
    a = 4.0 * c * gamma
    p = (1.0 - a) / a
    q = -x / a
    disc = np.sqrt(0.25 * q * q + p * p * p / 27.0)
    y = np.cbrt(-0.5 * q + disc) + np.cbrt(-0.5 * q - disc)
    for _ in range(3):
        f = a * y ** 3 + (1.0 - a) * y - x
        y = y - f / (3.0 * a * y * y + 1.0 - a)
    return y


def _prox_logcosh(kappa, alpha, beta, gamma, x):
    # h(y) = (1 + gamma kappa) y - gamma beta alpha tanh(alpha y) - x is increasing;
    # Newton with a bisection fallback inside the bracket that h changes sign on
    x = np.asarray(x, dtype=float)
    s = 1.0 + gamma * kappa
    lo = (x - gamma * beta * alpha) / s
    hi = (x + gamma * beta * alpha) / s
    y = x / s
    for _ in range(100):
        t = np.tanh(alpha * y)
        h = s * y - gamma * beta * alpha * t - x
        lo = np.where(h < 0, y, lo)
        hi = np.where(h > 0, y, hi)
        dh = s - gamma * beta * alpha * alpha * (1.0 - t * t)
        y_new = y - h / dh
        bad = ~((y_new > lo) & (y_new < hi))
        y_new = np.where(bad, 0.5 * (lo + hi), y_new)
        done = np.all(np.abs(y_new - y) <= 1e-15 * (1.0 + np.abs(y)))
        y = y_new
        if done:
            break
    return y


# -- total variation -------------------------------------------------------

def tv_value(image):
    """Isotropic total variation with forward differences and Neumann boundary."""
    u = np.asarray(image, dtype=float)
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:-1, :] = u[1:, :] - u[:-1, :]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    return float(np.sum(np.sqrt(gx * gx + gy * gy)))


def prox_tv2d(lam, gamma, image, inner_iters=10):
    """Approximate prox of ``lam * TV`` by a fixed number of dual projected-gradient steps.

    The dual iteration uses step 1/8 and starts from zero, so the result is a
    deterministic function of its arguments.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ContractViolation("TV prox expects a 2D image")
    if not np.all(np.isfinite(img)):
        raise ContractViolation("TV prox input has non-finite pixels")
    if int(inner_iters) < 1:
        raise ContractViolation("inner_iters must be at least 1")
    if not gamma > 0 or lam < 0:
        raise ContractViolation("TV prox needs gamma > 0 and lam >= 0")
    return _backend.tv_dual_prox(np.ascontiguousarray(img), float(lam) * float(gamma), int(inner_iters))


def tv_energy(lam, gamma, image, out):
    """``|image - out|^2 / (2 gamma) + lam TV(out)``."""
    r = np.asarray(image, dtype=float) - np.asarray(out, dtype=float)
    return float(np.sum(r * r)) / (2.0 * gamma) + lam * tv_value(out)


# -- regularizer constructors ----------------------------------------------

def zero_regularizer(dim):
    return ProxRegularizer(
        dim, lambda x: 0.0 * np.sum(np.asarray(x, dtype=float), axis=-1),
        lambda gamma, x: np.asarray(x, dtype=float),
        0.0, smoothness=0.0, lipschitz=0.0,
        gradient=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        hessian=lambda x: np.zeros((np.size(x), np.size(x))), name="zero")


def quadratic_regularizer(alpha=1.0, dim=1):
    alpha = float(alpha)
    return ProxRegularizer(
        dim, lambda x: 0.5 * alpha * np.sum(np.square(x), axis=-1),
        lambda gamma, x: prox_quadratic(alpha, gamma, x),
        max(0.0, -alpha), smoothness=abs(alpha),
        gradient=lambda x: alpha * np.asarray(x, dtype=float),
        hessian=lambda x: alpha * np.eye(np.size(x)), name=f"quadratic({alpha:g})")


def l1_regularizer(weight=1.0, dim=1):
    weight = float(weight)
    return ProxRegularizer(
        dim, lambda x: weight * np.sum(np.abs(x), axis=-1),
        lambda gamma, x: prox_l1(weight, gamma, x),
        0.0, lipschitz=weight * math.sqrt(dim), name=f"l1({weight:g})")


def box_indicator(lo, hi):
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape:
        raise ContractViolation("box bounds differ in shape")
    if np.any(lo > hi):
        raise ContractViolation("box lower bound exceeds upper bound")

    def value(x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= lo) & (x <= hi), axis=-1)
        return np.where(inside, 0.0, np.inf)

    return ProxRegularizer(lo.size, value, lambda gamma, x: prox_box_indicator(lo, hi, gamma, x),
                           0.0, name="box")


def double_well_regularizer(c=0.25, dim=1):
    """``c (y^2 - 1)^2`` per coordinate, declared ``rho = 8 c``."""
    c = float(c)

    def hessian(x):
        x = np.asarray(x, dtype=float).ravel()
        return np.diag(4.0 * c * (3.0 * x * x - 1.0))

    return ProxRegularizer(
        dim, lambda x: c * np.sum((np.square(x) - 1.0) ** 2, axis=-1),
        lambda gamma, x: _prox_double_well(c, gamma, x),
        8.0 * c,
        gradient=lambda x: 4.0 * c * np.asarray(x, dtype=float) * (np.square(x) - 1.0),
        hessian=hessian, name=f"double_well({c:g})")


def logcosh_regularizer(kappa=1.0, alpha=2.0, beta=1.0, dim=1):
    """``kappa y^2 / 2 - beta log cosh(alpha y)`` per coordinate.

    Smooth with ``-(beta alpha^2 - kappa) <= g'' <= kappa``: weakly convex with
    ``rho = max(0, beta alpha^2 - kappa)`` and globally ``L_g``-smooth.
    """
    kappa, alpha, beta = float(kappa), float(alpha), float(beta)
    rho = max(0.0, beta * alpha * alpha - kappa)

    def value(x):
        x = np.asarray(x, dtype=float)
        ax = alpha * x
        return np.sum(0.5 * kappa * x * x - beta * (np.logaddexp(ax, -ax) - math.log(2.0)), axis=-1)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return kappa * x - beta * alpha * np.tanh(alpha * x)

    def hessian(x):
        t = np.tanh(alpha * np.asarray(x, dtype=float).ravel())
        return np.diag(kappa - beta * alpha * alpha * (1.0 - t * t))

    return ProxRegularizer(
        dim, value, lambda gamma, x: _prox_logcosh(kappa, alpha, beta, gamma, x), rho,
        smoothness=max(kappa, rho), gradient=gradient, hessian=hessian,
        name=f"logcosh({kappa:g},{alpha:g},{beta:g})")


def tv_regularizer(lam, shape, inner_iters=10):
    """``lam * TV`` on images of the given shape, with the iterative prox."""
    lam = float(lam)
    shape = tuple(int(s) for s in shape)
    return ProxRegularizer(shape, lambda x: lam * tv_value(x),
                           lambda gamma, x: prox_tv2d(lam, gamma, x, inner_iters),
                           0.0, name=f"tv({lam:g})")


# -- brute-force oracle ----------------------------------------------------

REFINE_ROUNDS = 3
REFINE_POINTS = 21


def _grid_argmin(objective, axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = objective(pts)
    k = int(np.argmin(vals))
    return np.unravel_index(k, mesh[0].shape), pts[k]


def prox_bruteforce_oracle(g_value, gamma, x, box, resolution):
    """Prox by exhaustive grid search, for ``d <= 2``.

    Minimizes ``|x - y|^2 / (2 gamma) + g(y)`` on a grid of step
    ``resolution`` over ``box``, then refines three times on a 10x finer
    grid spanning one previous step around the incumbent.

    Parameters
    ----------
    g_value : callable
        Maps an ``(n, d)`` array of candidates to ``n`` values.
    box : (lo, hi)
        Scalars or per-axis bounds of the search region.

    Raises
    ------
    BoxTooSmallError
        If the coarse minimizer lies on the boundary of ``box``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    if d > 2:
        raise ContractViolation("brute-force prox oracle supports d <= 2 only")
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (d,))
    if np.any(hi <= lo) or not resolution > 0:
        raise ContractViolation("invalid search box or resolution")

    def objective(pts):
        diff = pts - x[None, :]
        with np.errstate(invalid="ignore"):
            vals = np.sum(diff * diff, axis=1) / (2.0 * gamma) + np.asarray(g_value(pts), dtype=float)
        return np.where(np.isnan(vals), np.inf, vals)

    counts = [int(math.ceil((hi[i] - lo[i]) / resolution)) + 1 for i in range(d)]
    axes = [np.linspace(lo[i], lo[i] + (counts[i] - 1) * resolution, counts[i]) for i in range(d)]
    idx, best = _grid_argmin(objective, axes)
    for i in range(d):
        if idx[i] == 0 or idx[i] == counts[i] - 1:
            raise BoxTooSmallError(f"minimizer on the search-box boundary (axis {i}); widen the box")
    step = resolution
    for _ in range(REFINE_ROUNDS):
        axes = [np.linspace(best[i] - step, best[i] + step, REFINE_POINTS) for i in range(d)]
        _, best = _grid_argmin(objective, axes)
        step /= 10.0
    return best


# -- Moreau envelope -------------------------------------------------------

class MoreauEnvelope:
    """``g^gamma(x) = min_y |x - y|^2 / (2 gamma) + g(y)``, evaluated through the prox point."""

    def __init__(self, base, gamma):
        base.check_gamma(gamma)
        self.base = base
        self.gamma = float(gamma)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        p = self.base.prox(self.gamma, x)
        r = x - p
        return float(np.sum(r * r)) / (2.0 * self.gamma) + float(self.base.value(p))

    def values(self, points):
        """Envelope at each row of an ``(n, d)`` batch; needs a prox that acts row-wise."""
        pts = np.asarray(points, dtype=float)
        p = self.base.prox(self.gamma, pts)
        return np.sum((pts - p) ** 2, axis=-1) / (2.0 * self.gamma) + self.base.value(p)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.base.prox(self.gamma, x)) / self.gamma

    def hessian(self, x):
        """``(I - (I + gamma H_g(p))^{-1}) / gamma`` at the prox point ``p``; needs ``g`` in C^2."""
        if self.base.hessian is None:
            raise ContractViolation(f"{self.base.name} has no Hessian")
        p = self.base.prox(self.gamma, np.asarray(x, dtype=float))
        H = np.atleast_2d(self.base.hessian(p))
        eye = np.eye(H.shape[0])
        return (eye - np.linalg.inv(eye + self.gamma * H)) / self.gamma


def moreau_value(env, x):
    return env.value(x)


def moreau_grad(env, x):
    return env.gradient(x)


class ShadowDrift:
    """Drift ``b(y) = grad f(prox(y)) + (y - prox(y)) / gamma`` of the pre-prox PSGLA chain."""

    def __init__(self, f, g, gamma):
        g.check_gamma(gamma)
        self.f = f
        self.g = g
        self.gamma = float(gamma)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        p = self.g.prox(self.gamma, y)
        return self.f.gradient(p) + (y - p) / self.gamma


def shadow_drift_eval(sd, y):
    return sd(y)


def prox_fixed_point_check(g, gamma, x):
    """Residual ``|prox(gamma, x + gamma grad g(x)) - x|`` for differentiable ``g``."""
    if g.gradient is None:
        raise ContractViolation(f"{g.name} is not differentiable")
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(g.prox(gamma, x + gamma * g.gradient(x)) - x))
