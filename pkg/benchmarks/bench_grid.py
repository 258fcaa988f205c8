"""Benchmark the compiled cell-grid edge kernel against the pure-Python one.

Run:  python benchmarks/bench_grid.py
"""
import time

import numpy as np

from cgrg import grid
from cgrg.measures import ModelParameters


def bench(n: int, d: int, k: int, reps: int = 3) -> None:
    rng = np.random.default_rng(12345)
    nu = np.full(k, 1.0 / k)
    C = np.ones((k, k))
    params = ModelParameters(k=k, d=d, nu=nu, C=C, geometry="torus")
    points = rng.random((n, d))
    colours = rng.integers(0, k, size=n, dtype=np.int64)
    radii = params.radii(n)

    def time_fn(fn):
        best = np.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            edges = fn(points, colours, radii, "torus")
            best = min(best, time.perf_counter() - t0)
        return best, len(edges)

    t_py, m_py = time_fn(grid.find_edges_python)
    if grid.BACKEND == "cython":
        t_cy, m_cy = time_fn(grid.find_edges)
        assert m_py == m_cy, "backends disagree on edge count"
        print(
            f"n={n:>7} d={d} k={k}: python {t_py*1e3:8.2f} ms | "
            f"cython {t_cy*1e3:8.2f} ms | speedup {t_py/t_cy:5.1f}x | edges {m_py}"
        )
    else:
        print(f"n={n:>7} d={d} k={k}: python {t_py*1e3:8.2f} ms (no compiled backend)")


if __name__ == "__main__":
    print(f"active backend: {grid.BACKEND}")
    for n in (1_000, 10_000, 100_000):
        for d in (1, 2, 3):
            bench(n, d, 1)
    bench(50_000, 2, 3)
