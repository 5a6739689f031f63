"""Compiled vs numpy kernels: best-of-N wall time per call.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from kolmo_lab import kernels


def cases():
    rng = np.random.default_rng(0)

    nv, nx = 256, 256
    vel = np.linspace(-2, 2, nv)
    ks = (rng.normal(size=(nv, nx)), rng.uniform(0.5, 2, (nv - 1, nx)), vel,
          rng.normal(size=(nv, nx)), np.zeros((nv, nx)), np.zeros((nv, nx)))
    ks_out = np.empty((nv, nx))

    n = 2001
    v = np.linspace(-6, 6, n)
    w = np.full(n, v[1] - v[0])
    u = np.exp(-v ** 2)
    nodes = np.arange(n, dtype=np.int64)
    col = np.empty(n)
    kmat = np.ascontiguousarray(np.abs(v[:, None] - v[None, :]) + 1.0) ** -2.0

    m = 400
    h = 1.0 / (m + 1)
    tri = (np.full(m, -1 / h ** 2), np.full(m, 2 / h ** 2), np.full(m, -1 / h ** 2),
           np.full(m, -3.0), 0.1 - np.linspace(-1, 1, m) ** 2)

    def pgs(mod):
        x = np.maximum(tri[4], 0.0)
        mod.pgs_tridiag(*tri, x, 1.8, 1e-10, 200)

    return {
        f"kinetic_step {nv}x{nx}": lambda mod: mod.kinetic_step(*ks, 1e-4, 0.01, 0.01, ks_out),
        f"frac_plap_power n={n}, p=3": lambda mod: mod.frac_plap_power(u, v, w, 3.0, 1.0, 2.0,
                                                                        nodes, col),
        f"frac_plap_matrix n={n}, p=3": lambda mod: mod.frac_plap_matrix(u, kmat, w, 3.0, nodes, col),
        f"pgs_tridiag n={m}, 200 sweeps": pgs,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = kernels.get_backend("python")
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        cy = None
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases().items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:34s} {tp:12.2f} {'n/a':>12s}")
            continue
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {tp:12.2f} {tc:12.2f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
