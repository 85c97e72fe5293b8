"""Smooth data-fidelity terms and exact Gaussian-mixture prior machinery."""
import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from . import _backend
from .errors import ContractViolation

LOG_2PI = math.log(2.0 * math.pi)


def fd_step(x):
    """Central finite-difference step used by all validation probes."""
    return 1e-5 * (1.0 + float(np.linalg.norm(x)))


class SmoothPotential:
    """A differentiable potential ``f`` with an ``L_f``-Lipschitz gradient.

    Parameters
    ----------
    dim : int
        Number of coordinates of the (flattened) argument.
    value, gradient : callable
        ``value(x) -> float`` and ``gradient(x) -> array like x``.
    lipschitz_grad : float
        Declared smoothness constant.
    """

    def __init__(self, dim, value, gradient, lipschitz_grad):
        if not lipschitz_grad > 0:
            raise ContractViolation("lipschitz_grad must be positive")
        self.dim = int(dim)
        self.value = value
        self.gradient = gradient
        self.lipschitz_grad = float(lipschitz_grad)

    def tempered(self, lam):
        """Return ``f / lam`` (gradient computed as ``grad f(x) / lam``)."""
        lam = float(lam)
        if not lam > 0:
            raise ContractViolation("temperature must be positive")
        value, gradient = self.value, self.gradient
        return SmoothPotential(
            self.dim,
            lambda x: value(x) / lam,
            lambda x: gradient(x) / lam,
            self.lipschitz_grad / lam,
        )

    def __add__(self, other):
        if other.dim != self.dim:
            raise ContractViolation("cannot add potentials of different dimension")
        v1, v2, g1, g2 = self.value, other.value, self.gradient, other.gradient
        return SmoothPotential(
            self.dim,
            lambda x: v1(x) + v2(x),
            lambda x: g1(x) + g2(x),
            self.lipschitz_grad + other.lipschitz_grad,
        )


def zero_potential(dim):
    return SmoothPotential(dim, lambda x: 0.0, lambda x: np.zeros_like(x, dtype=float), 1e-300)


def quadratic_potential(alpha=1.0, center=None, dim=1):
    """``(alpha / 2) |x - center|^2``; with ``alpha=1, center=0`` the OU potential."""
    alpha = float(alpha)
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def value(x):
        r = np.asarray(x) - c
        return 0.5 * alpha * float(np.sum(r * r))

    def gradient(x):
        return alpha * (np.asarray(x) - c)

    return SmoothPotential(dim, value, gradient, alpha)


def logcosh_double_well(kappa=1.0, alpha=2.0, beta=1.0, dim=1):
    """Double well with quadratic tails, ``kappa |x|^2 / 2 - beta sum log cosh(alpha x_i)``.

    The Hessian lies in ``[kappa - beta alpha^2, kappa]``, so the gradient is
    globally Lipschitz and the potential is ``kappa``-strongly convex at
    infinity. Wells sit near ``x_i = +-beta alpha / kappa`` when
    ``beta alpha^2 > kappa``.
    """
    kappa, alpha, beta = float(kappa), float(alpha), float(beta)

    def value(x):
        x = np.asarray(x, dtype=float)
        ax = alpha * x
        logcosh = np.logaddexp(ax, -ax) - math.log(2.0)
        return float(0.5 * kappa * np.sum(x * x) - beta * np.sum(logcosh))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return kappa * x - beta * alpha * np.tanh(alpha * x)

    lip = max(kappa, abs(kappa - beta * alpha * alpha))
    return SmoothPotential(dim, value, gradient, lip)


def gradient_fd_error(pot, x):
    """Relative error between ``pot.gradient`` and central differences at ``x``."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x)
    flat = x.ravel()
    fd = np.empty(flat.size)
    for i in range(flat.size):
        e = np.zeros(flat.size)
        e[i] = h
        fd[i] = (pot.value((flat + e).reshape(x.shape)) - pot.value((flat - e).reshape(x.shape))) / (2 * h)
    g = np.asarray(pot.gradient(x), dtype=float).ravel()
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))


class LinearOperator:
    """A linear map with its adjoint.

    ``shape`` is ``(m, d)`` in flattened sizes; ``in_shape`` and ``out_shape``
    are the array shapes that ``apply`` consumes and produces.
    """

    def __init__(self, apply, adjoint, in_shape, out_shape):
        self.apply = apply
        self.adjoint = adjoint
        self.in_shape = tuple(int(s) for s in np.atleast_1d(in_shape))
        self.out_shape = tuple(int(s) for s in np.atleast_1d(out_shape))
        self.shape = (int(np.prod(self.out_shape)), int(np.prod(self.in_shape)))

    @classmethod
    def from_matrix(cls, A):
        A = np.array(A, dtype=float)
        if A.ndim != 2:
            raise ContractViolation("matrix operator needs a 2D array")
        A.setflags(write=False)
        op = cls(lambda x: A @ x, lambda y: A.T @ y, (A.shape[1],), (A.shape[0],))
        op.matrix = A
        return op

    @classmethod
    def identity(cls, dim):
        return cls.from_matrix(np.eye(dim))

    @classmethod
    def mask(cls, mask):
        """Pixel-masking operator: keeps entries where ``mask`` is true, zeroes the rest."""
        m = np.array(mask, dtype=float)
        m.setflags(write=False)
        op = cls(lambda x: m * x, lambda y: m * y, m.shape, m.shape)
        op.mask_array = m
        return op

    def to_matrix(self):
        if hasattr(self, "matrix"):
            return self.matrix
        m, d = self.shape
        cols = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            cols.append(np.asarray(self.apply(e.reshape(self.in_shape)), dtype=float).ravel())
        return np.stack(cols, axis=1)

    def norm(self, n_iter=100, seed=0):
        """Operator 2-norm by power iteration on ``A^T A``."""
        if hasattr(self, "mask_array"):
            return float(np.max(np.abs(self.mask_array))) if self.mask_array.size else 0.0
        if hasattr(self, "matrix"):
            return float(np.linalg.norm(self.matrix, 2))
        x = np.random.default_rng(seed).standard_normal(self.in_shape)
        s = 0.0
        for _ in range(n_iter):
            x = self.adjoint(self.apply(x))
            s = float(np.linalg.norm(x))
            if s == 0.0:
                return 0.0
            x = x / s
        return math.sqrt(s)


class GaussianLikelihood(SmoothPotential):
    """Data term ``f(x) = |A x - y|^2 / sigma^2`` of a linear inverse problem."""

    def __init__(self, operator, y, sigma):
        if not sigma > 0:
            raise ContractViolation("noise sigma must be positive")
        self.operator = operator
        self.y = np.array(y, dtype=float).reshape(operator.out_shape)
        self.y.setflags(write=False)
        self.sigma = float(sigma)
        self._scale = 1.0 / (self.sigma * self.sigma)
        lip = 2.0 * self._scale * operator.norm() ** 2
        super().__init__(operator.shape[1], self._value, self._gradient, max(lip, 1e-300))

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.operator.in_shape:
            raise ContractViolation(f"expected input of shape {self.operator.in_shape}, got {x.shape}")
        return x

    def residual(self, x):
        return self.operator.apply(self._check(x)) - self.y

    def _value(self, x):
        r = self.residual(x)
        return self._scale * float(np.sum(r * r))

    def _gradient(self, x):
        return (2.0 * self._scale) * self.operator.adjoint(self.residual(x))


def likelihood_grad(lik, x):
    """``(2 / sigma^2) A^T (A x - y)``."""
    return lik.gradient(x)


class GaussianMixture:
    """Weighted mixture of multivariate normals with cached factorizations.

    Components with zero weight are kept (they report zero occupancy) but are
    skipped by every density computation. Instances are immutable.

    Parameters
    ----------
    weights : (k,) array_like
        Nonnegative, summing to one within 1e-12.
    means : (k, d) array_like
    covs : (k, d, d) array_like
        Symmetric positive-definite matrices.
    """

    def __init__(self, weights, means, covs):
        w = np.array(weights, dtype=float).ravel()
        mu = np.array(means, dtype=float)
        S = np.array(covs, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        if S.ndim == 1:
            S = S[:, None, None]
        k = w.size
        if k == 0:
            raise ContractViolation("mixture needs at least one component")
        if mu.shape[0] != k or S.shape[0] != k:
            raise ContractViolation("weights, means and covariances disagree on the number of components")
        d = mu.shape[1]
        if S.shape[1:] != (d, d):
            raise ContractViolation(f"covariances must be {d}x{d}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ContractViolation("mixture weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ContractViolation(f"mixture weights sum to {w.sum()!r}, not 1")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(S)):
            raise ContractViolation("means and covariances must be finite")
        chols, precs, logdets = [], [], []
        for i in range(k):
            if np.max(np.abs(S[i] - S[i].T)) > 1e-12:
                raise ContractViolation(f"covariance {i} is not symmetric")
            if np.min(np.linalg.eigvalsh(S[i])) <= 0:
                raise ContractViolation(f"covariance {i} is not positive definite")
            cf = cho_factor(S[i], lower=True)
            P = cho_solve(cf, np.eye(d))
            chols.append(np.tril(cf[0]))
            precs.append(0.5 * (P + P.T))
            logdets.append(2.0 * float(np.sum(np.log(np.diag(cf[0])))))
        self.d = d
        self.k = k
        self.weights = w
        self.means = mu
        self.covs = S
        self._chols = np.array(chols)
        self._precs = np.array(precs)
        self._logdets = np.array(logdets)
        with np.errstate(divide="ignore"):
            logw = np.log(w)
        self._active = np.flatnonzero(w > 0)
        a = self._active
        self._k_means = np.ascontiguousarray(mu[a])
        self._k_precs = np.ascontiguousarray(self._precs[a])
        self._k_lognorm = np.ascontiguousarray(logw[a] - 0.5 * self._logdets[a] - 0.5 * d * LOG_2PI)
        for arr in (self.weights, self.means, self.covs, self._chols, self._precs, self._logdets):
            arr.setflags(write=False)
        self._smoothed = {}

    def __repr__(self):
        return f"GaussianMixture(k={self.k}, d={self.d})"

    def _batch(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,) or x.ndim > 2:
            raise ContractViolation(f"expected points of dimension {self.d}, got shape {x.shape}")
        return np.ascontiguousarray(x.reshape(-1, self.d)), x.ndim == 1

    def _score(self, x):
        xb, single = self._batch(x)
        score, logp = _backend.gmm_score(xb, self._k_means, self._k_precs, self._k_lognorm)
        if single:
            return score[0], float(logp[0])
        return score, logp

    def log_density(self, x):
        return self._score(x)[1]

    def grad_log_density(self, x):
        return self._score(x)[0]

    def component_log_pdf(self, x):
        """``log N(x; m_i, Sigma_i)`` for every component, shape ``(n, k)``."""
        xb, _ = self._batch(x)
        out = np.empty((xb.shape[0], self.k))
        for i in range(self.k):
            diff = xb - self.means[i]
            sol = cho_solve((self._chols[i], True), diff.T).T
            out[:, i] = -0.5 * np.sum(diff * sol, axis=1) - 0.5 * self._logdets[i] - 0.5 * self.d * LOG_2PI
        return out

    def responsibilities(self, x):
        """Posterior component probabilities, shape ``(n, k)``; zero-weight components get 0."""
        with np.errstate(divide="ignore"):
            logits = self.component_log_pdf(x) + np.log(self.weights)[None, :]
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))

    def smoothed(self, eps):
        """The mixture convolved with ``N(0, eps^2 I)``."""
        eps = float(eps)
        if not eps > 0:
            raise ContractViolation("smoothing level must be positive")
        mix = self._smoothed.get(eps)
        if mix is None:
            mix = GaussianMixture(self.weights, self.means, self.covs + eps * eps * np.eye(self.d)[None])
            self._smoothed[eps] = mix
        return mix

    def mmse_denoiser(self, eps, x):
        """Tweedie denoiser ``x + eps^2 grad log p_eps(x)``."""
        eps = float(eps)
        score = self.smoothed(eps).grad_log_density(x)
        return np.asarray(x, dtype=float) + (eps * eps) * score

    def sample(self, n, rng):
        """Draw ``n`` points by picking a component, then a Gaussian."""
        comp = rng.choice(self.k, size=n, p=self.weights)
        z = rng.standard_normal((n, self.d))
        return self.means[comp] + np.einsum("nij,nj->ni", self._chols[comp], z)


def gmm_log_density(gmm, x):
    return gmm.log_density(x)


def gmm_grad_log_density(gmm, x):
    return gmm.grad_log_density(x)


def gmm_mmse_denoiser(gmm, eps, x):
    return gmm.mmse_denoiser(eps, x)


def gmm_exact_posterior(gmm, lik):
    """Mixture proportional to ``exp(-f(x)) p(x)`` for a Gaussian-linear ``f``.

    With ``f = |A x - y|^2 / sigma^2`` the likelihood is a Gaussian in ``y``
    with covariance ``(sigma^2 / 2) I``; each component is updated by
    conjugacy and reweighted by its evidence ``N(y; A m_i, A Sigma_i A^T + sigma^2 I / 2)``.
    """
    A = np.asarray(lik.operator.to_matrix(), dtype=float)
    if A.shape[1] != gmm.d:
        raise ContractViolation("likelihood and prior dimensions differ")
    y = np.asarray(lik.y, dtype=float).ravel()
    m = A.shape[0]
    tau = 2.0 / (lik.sigma * lik.sigma)
    AtA = A.T @ A
    Aty = A.T @ y
    noise_cov = np.eye(m) / tau
    means, covs, logw = [], [], []
    for i in range(gmm.k):
        P = gmm._precs[i] + tau * AtA
        try:
            cf = cho_factor(P, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ContractViolation(f"posterior covariance of component {i} is singular") from exc
        cov = cho_solve(cf, np.eye(gmm.d))
        cov = 0.5 * (cov + cov.T)
        means.append(cov @ (gmm._precs[i] @ gmm.means[i] + tau * Aty))
        covs.append(cov)
        if gmm.weights[i] == 0:
            logw.append(-np.inf)
            continue
        ev_cov = A @ gmm.covs[i] @ A.T + noise_cov
        ev_cf = cho_factor(ev_cov, lower=True)
        r = y - A @ gmm.means[i]
        quad = float(r @ cho_solve(ev_cf, r))
        logdet = 2.0 * float(np.sum(np.log(np.diag(ev_cf[0]))))
        logw.append(math.log(gmm.weights[i]) - 0.5 * quad - 0.5 * logdet - 0.5 * m * LOG_2PI)
    logw = np.array(logw)
    w = np.exp(logw - logsumexp(logw))
    w = w / w.sum()
    return GaussianMixture(w, np.array(means), np.array(covs))


# -- GMM specification files ---------------------------------------------

GMM_KEYS = ("d", "k", "weights", "means", "covs")
WEIGHT_TOL = 1e-9


def parse_gmm_text(text, source="<string>"):
    """Parse the flat ``key = values`` mixture format.

    Grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines
    are ignored. Keys are ``d`` and ``k`` (integers) and ``weights``,
    ``means`` and ``covs`` (numbers separated by whitespace or commas).
    ``means`` holds ``k*d`` numbers row-major, ``covs`` holds ``k*d*d``
    numbers, one row-major ``d x d`` block per component. Weights must sum to
    one within 1e-9 and are then renormalized exactly.
    """
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractViolation(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in GMM_KEYS:
            raise ContractViolation(f"{source}:{lineno}: unknown key {key!r}")
        if key in fields:
            raise ContractViolation(f"{source}:{lineno}: duplicate key {key!r}")
        fields[key] = val
    missing = [k for k in GMM_KEYS if k not in fields]
    if missing:
        raise ContractViolation(f"{source}: missing keys {', '.join(missing)}")
    try:
        d = int(fields["d"])
        k = int(fields["k"])
        nums = {key: np.array([float(t) for t in fields[key].replace(",", " ").split()])
                for key in ("weights", "means", "covs")}
    except ValueError as exc:
        raise ContractViolation(f"{source}: malformed number ({exc})") from exc
    if d < 1 or k < 1:
        raise ContractViolation(f"{source}: d and k must be positive")
    expected = {"weights": k, "means": k * d, "covs": k * d * d}
    for key, n in expected.items():
        if nums[key].size != n:
            raise ContractViolation(f"{source}: {key} needs {n} numbers, found {nums[key].size}")
    w = nums["weights"]
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ContractViolation(f"{source}: weights sum to {total!r}; they must sum to 1 within {WEIGHT_TOL:g}")
    return GaussianMixture(w / total, nums["means"].reshape(k, d), nums["covs"].reshape(k, d, d))


def read_gmm_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ContractViolation(f"cannot read mixture file {path}: {exc.strerror}") from exc
    return parse_gmm_text(text, source=str(path))


def format_gmm(gmm):
    def nums(a):
        return " ".join(repr(float(v)) for v in np.ravel(a))

    return (f"d = {gmm.d}\nk = {gmm.k}\nweights = {nums(gmm.weights)}\n"
            f"means = {nums(gmm.means)}\ncovs = {nums(gmm.covs)}\n")
