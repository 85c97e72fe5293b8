"""Seeded Langevin chain runners.

All ULA-type chains are run as ``X' = X - gamma * b(X) + sqrt(2 gamma) Z`` for
a sampler-specific drift ``b``. The forward-backward chains (PSGLA, inexact
PSGLA, PnP-PSGLA) are run in their two-point form on the pre-prox (shadow)
point ``Y``::

    X_k = S(Y_k)
    Y_{k+1} = Y_k - gamma * (grad f(X_k) + (Y_k - X_k) / gamma) + sqrt(2 gamma) Z_{k+1}

which is algebraically ``Y_{k+1} = X_k - gamma grad f(X_k) + sqrt(2 gamma) Z``.
Evaluating it this way makes every degenerate case (zero regularizer,
identity denoiser) reduce to plain iULA bit for bit, and makes the recorded
shadow sequence an iULA chain with the shadow drift, again bit for bit. The
chain starts from the shadow point ``Y_0 = x0``.

Noise is added with a ``+`` sign everywhere; flipping the sign of a centred
Gaussian does not change the law of the chain.
"""
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DivergenceError
from .proximal import prox_tv2d

DIVERGENCE_NORM = 1e8
NOISE_BLOCK_ELEMENTS = 1 << 16


class NoiseStream:
    """Standard Gaussian increments ``Z_1, Z_2, ...`` as a pure function of ``(seed, step)``.

    Steps are grouped in blocks of ``B`` consecutive indices. Block ``b`` is
    drawn with numpy's ziggurat sampler from a Philox-4x64 counter-based
    generator keyed by ``seed`` whose counter starts at ``(0, b, 0, 0)``, so
    any step can be regenerated without replaying the stream.
    """

    def __init__(self, seed, shape):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.shape = tuple(shape)
        size = int(np.prod(self.shape)) if self.shape else 1
        self.block = max(1, NOISE_BLOCK_ELEMENTS // size)
        self._cached = -1
        self._buf = None

    def _load(self, b):
        bitgen = np.random.Philox(key=self.seed, counter=[0, b, 0, 0])
        self._buf = np.random.Generator(bitgen).standard_normal((self.block,) + self.shape)
        self._cached = b

    def __call__(self, step):
        """Increment ``Z_step`` (``step >= 1``)."""
        b, r = divmod(int(step) - 1, self.block)
        if b != self._cached:
            self._load(b)
        return self._buf[r]


@dataclass(frozen=True)
class ChainConfig:
    """Step size, length, retention and seed of one chain.

    ``burn_in`` defaults to ``n_steps // 10``. Iterate ``k`` (``1 <= k <= N``)
    is retained when ``k > burn_in`` and ``k - burn_in`` is a multiple of
    ``thinning``.
    """

    gamma: float
    n_steps: int
    x0: np.ndarray
    seed: int = 0
    burn_in: int = None
    thinning: int = 1
    lam: float = 1.0

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        if x0.ndim == 0:
            x0 = x0.reshape(1)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        burn = self.n_steps // 10 if self.burn_in is None else self.burn_in
        object.__setattr__(self, "burn_in", int(burn))
        if not self.gamma > 0 or not math.isfinite(self.gamma):
            raise ContractViolation("gamma must be positive and finite")
        if int(self.n_steps) < 1:
            raise ContractViolation("n_steps must be at least 1")
        if not 0 <= self.burn_in < self.n_steps:
            raise ContractViolation("burn_in must satisfy 0 <= burn_in < n_steps")
        if int(self.thinning) < 1:
            raise ContractViolation("thinning must be at least 1")
        if not self.lam > 0:
            raise ContractViolation("lam must be positive")
        if not np.all(np.isfinite(x0)):
            raise ContractViolation("initial point must be finite")

    @property
    def n_retained(self):
        return (self.n_steps - self.burn_in) // self.thinning

    def replace(self, **kw):
        args = dict(gamma=self.gamma, n_steps=self.n_steps, x0=self.x0, seed=self.seed,
                    burn_in=self.burn_in, thinning=self.thinning, lam=self.lam)
        args.update(kw)
        return ChainConfig(**args)


@dataclass(frozen=True)
class ChainRun:
    """Retained iterates and running moments of a finished chain."""

    config: ChainConfig
    samples: np.ndarray
    running_mean: np.ndarray
    running_second_moment: np.ndarray
    wall_time: float
    final: np.ndarray
    shadow: np.ndarray = None
    sampler: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_retained(self):
        return self.samples.shape[0]

    @property
    def variance(self):
        return self.running_second_moment - self.running_mean ** 2


class Denoiser:
    """A map ``D_eps`` at noise level ``eps``."""

    def __init__(self, noise_level, apply, name="denoiser"):
        if not noise_level > 0:
            raise ContractViolation("noise level must be positive")
        self.noise_level = float(noise_level)
        self.apply = apply
        self.name = name

    def __call__(self, x):
        return self.apply(x)

    def __repr__(self):
        return f"Denoiser({self.name}, eps={self.noise_level:g})"

    @classmethod
    def identity(cls, noise_level):
        return cls(noise_level, lambda x: x, name="identity")

    @classmethod
    def gmm_mmse(cls, gmm, noise_level):
        """Exact MMSE denoiser of a Gaussian-mixture prior."""
        eps = float(noise_level)
        gmm.smoothed(eps)
        return cls(eps, lambda x: gmm.mmse_denoiser(eps, x), name="gmm-mmse")

    @classmethod
    def tv(cls, noise_level, weight=None, inner_iters=10):
        """TV denoiser ``prox_{eps^2 w TV}``; ``w`` defaults to ``1 / eps``."""
        eps = float(noise_level)
        w = 1.0 / eps if weight is None else float(weight)
        return cls(eps, lambda x: prox_tv2d(w, eps * eps, x, inner_iters), name="tv")


def _run(cfg, drift, name, forward_backward=None, record_shadow=False, meta=None):
    """Shared chain loop.

    ``drift(x)`` gives the ULA drift. For forward-backward chains,
    ``forward_backward(y)`` returns ``(x, b)``: the backward point ``x = S(y)``
    and the shadow drift ``b`` at ``y``.
    """
    t0 = time.perf_counter()
    x = np.array(cfg.x0, dtype=float)
    shape = x.shape
    noise = NoiseStream(cfg.seed, shape)
    gamma = cfg.gamma
    scale = math.sqrt(2.0 * gamma)
    n_ret = cfg.n_retained
    samples = np.empty((n_ret,) + shape)
    shadow = np.empty((n_ret,) + shape) if (record_shadow and forward_backward is not None) else None
    mean = np.zeros(shape)
    second = np.zeros(shape)
    burn, thin = cfg.burn_in, cfg.thinning
    j = 0
    y = x
    if forward_backward is not None:
        x, b = forward_backward(y)
    for k in range(1, cfg.n_steps + 1):
        z = noise(k)
        if forward_backward is None:
            x = x - gamma * drift(x) + scale * z
            state = x
        else:
            y = y - gamma * b + scale * z
            x, b = forward_backward(y)
            state = y
        nrm = float(np.sqrt(np.sum(state * state)))
        if state is y:
            nrm = float(np.maximum(nrm, np.sqrt(np.sum(x * x))))
        if not nrm <= DIVERGENCE_NORM:
            raise DivergenceError(k, f"{name} chain diverged at step {k} (|X| = {nrm:.3g})")
        if k > burn and (k - burn) % thin == 0:
            samples[j] = x
            if shadow is not None:
                shadow[j] = y
            j += 1
            mean += (x - mean) / j
            second += (x * x - second) / j
    for arr in (samples, mean, second) + ((shadow,) if shadow is not None else ()):
        arr.setflags(write=False)
    return ChainRun(cfg, samples, mean, second, time.perf_counter() - t0, np.array(x),
                    shadow, name, dict(meta or {}))


def run_iula(drift, cfg):
    """Langevin chain with an arbitrary drift ``b``."""
    return _run(cfg, drift, "iula")


def run_ula(f, g_smooth, cfg):
    """ULA on ``f + g`` with both terms differentiable."""
    gf, gg = f.gradient, g_smooth.gradient
    return _run(cfg, lambda x: gf(x) + gg(x), "ula")


def _forward_backward(grad, backward, gamma):
    def step(y):
        x = backward(y)
        return x, grad(x) + (y - x) / gamma
    return step


def run_psgla(f, g, cfg, record_shadow=False):
    """Proximal stochastic gradient Langevin: gradient step on ``f``, noise, prox of ``g``."""
    g.check_gamma(cfg.gamma)
    gamma = cfg.gamma
    fb = _forward_backward(f.gradient, lambda y: g.prox(gamma, y), gamma)
    return _run(cfg, None, "psgla", fb, record_shadow)


def run_inexact_psgla(f, S, cfg, record_shadow=False):
    """PSGLA with an approximate backward map ``S(gamma, y)`` in place of the prox."""
    gamma = cfg.gamma
    fb = _forward_backward(f.gradient, lambda y: S(gamma, y), gamma)
    return _run(cfg, None, "inexact-psgla", fb, record_shadow)


def run_myula(f, g, lam_my, cfg):
    """Moreau-Yosida ULA: drift ``grad f + (x - prox_{lam_my g}(x)) / lam_my``."""
    g.check_gamma(lam_my)
    gf = f.gradient

    def drift(x):
        return gf(x) + (x - g.prox(lam_my, x)) / lam_my

    return _run(cfg, drift, "myula", meta={"lam_my": lam_my})


def run_pnp_ula(f, D, eps, lam, cfg, alpha=math.inf, box=None):
    """Plug-and-play ULA with prior drift ``(lam / eps) (x - D(x))``.

    ``lam=None`` takes the value from ``cfg.lam``.

    ``alpha = inf`` drops the projection term; otherwise ``box = (lo, hi)``
    defines the convex set and ``(x - clip(x)) / alpha`` is added to the drift.
    """
    lam = cfg.lam if lam is None else lam
    if not eps > 0:
        raise ContractViolation("eps must be positive")
    if not alpha > 0:
        raise ContractViolation("alpha must be positive or inf")
    gf = f.gradient
    c = lam / eps
    if math.isinf(alpha):
        def drift(x):
            return gf(x) + c * (x - D(x))
    else:
        if box is None:
            raise ContractViolation("a finite alpha needs a projection box")
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        inv_alpha = 1.0 / alpha

        def drift(x):
            return gf(x) + c * (x - D(x)) + inv_alpha * (x - np.clip(x, lo, hi))

    return _run(cfg, drift, "pnp-ula", meta={"eps": eps, "lam": lam, "alpha": alpha})


def run_pnp_psgla(f, D, lam, cfg, record_shadow=False):
    """Plug-and-play PSGLA: gradient step on ``f / lam``, noise, then ``D`` at level ``sqrt(gamma)``.

    ``lam=None`` takes the value from ``cfg.lam``.
    """
    lam = cfg.lam if lam is None else lam
    target = math.sqrt(cfg.gamma)
    if abs(D.noise_level - target) > 1e-9 * target:
        warnings.warn(f"denoiser level {D.noise_level:g} differs from sqrt(gamma) = {target:g}",
                      RuntimeWarning, stacklevel=2)
    gamma = cfg.gamma
    fb = _forward_backward(f.tempered(lam).gradient, lambda y: D(y), gamma)
    return _run(cfg, None, "pnp-psgla", fb, record_shadow, meta={"lam": lam})
