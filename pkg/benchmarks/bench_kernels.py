"""Time the compiled kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``. Both backends are
imported side by side, so ``LPL_BACKEND`` has no effect here.
"""
import argparse
import timeit

import numpy as np

from lpl import _fallback
from lpl.metrics import cost_scale
from lpl.potentials import GaussianMixture

try:
    from lpl import _core
except ImportError:
    _core = None


def cases():
    rng = np.random.default_rng(0)
    gmm = GaussianMixture([0.5, 0.3, 0.2], [[0, 0], [2, -1], [-1.5, 1]],
                          np.stack([np.eye(2), 0.5 * np.eye(2), [[0.7, 0.1], [0.1, 1.2]]]))
    pts = rng.normal(size=(1, 2))
    batch = rng.normal(size=(10_000, 2))
    img = rng.random((64, 64))
    n = 200
    a, b = rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + 1
    c = np.sum((a[:, None] - b[None]) ** 2, axis=-1)
    icost = np.rint(c / c.max() * cost_scale(n, n)).astype(np.int64)
    ones = np.ones(n)
    args = (gmm._k_means, gmm._k_precs, gmm._k_lognorm)
    return [
        ("gmm_score, 1 point", lambda k: k.gmm_score(pts, *args)),
        ("gmm_score, 10k points", lambda k: k.gmm_score(batch, *args)),
        ("tv_dual_prox, 64x64, 10 iters", lambda k: k.tv_dual_prox(img, 0.05, 10)),
        ("tv_dual_prox, 64x64, 200 iters", lambda k: k.tv_dual_prox(img, 0.05, 200)),
        (f"transport_ssp, {n}x{n}", lambda k: k.transport_ssp(icost, ones, ones)),
    ]


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':<34}{'cython':>12}{'python':>12}{'speedup':>10}")
    for name, call in cases():
        t_py = best_time(lambda: call(_fallback), args.repeat)
        if _core is None:
            print(f"{name:<34}{'n/a':>12}{t_py * 1e3:>10.3f}ms{'':>10}")
            continue
        t_c = best_time(lambda: call(_core), args.repeat)
        print(f"{name:<34}{t_c * 1e3:>10.3f}ms{t_py * 1e3:>10.3f}ms{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
