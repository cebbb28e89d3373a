"""Benchmark the compiled sampling core against the pure-Python fallback.

Usage: python benchmarks/bench_core.py [--n-paths N] [--n-steps N]
"""

import argparse
import time

import numpy as np

from fkgreen import core
from fkgreen.bridge import RngStreamSpec, sample_normals


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-paths", type=int, default=20_000)
    parser.add_argument("--n-steps", type=int, default=256)
    args = parser.parse_args()

    gen = RngStreamSpec(12345, 0).generator()
    normals = np.ascontiguousarray(
        sample_normals(gen, args.n_paths, args.n_steps)
    )
    amps = np.array([1.0, 0.5])
    exps = np.array([-0.5, 1.0])
    cents = np.array([0.0, 0.3])

    impls = core.get_backends()
    print(f"active backend: {core.BACKEND}")
    print(f"n_paths={args.n_paths} n_steps={args.n_steps}\n")

    results = {}
    for name, impl in sorted(impls.items()):
        t_build = timeit(lambda: impl.build_bridges(normals))
        t_accum = timeit(
            lambda: impl.bridge_accumulate(
                normals, 0.1, -0.2, 1.0, amps, exps, cents, compute_min=True
            )
        )
        results[name] = (t_build, t_accum)
        print(f"{name:>9}: build_bridges {t_build * 1e3:8.2f} ms   "
              f"bridge_accumulate {t_accum * 1e3:8.2f} ms")

    if len(results) == 2:
        pb, pa = results["python"]
        cb, ca = results["compiled"]
        print(f"\nspeedup (python / compiled): build_bridges {pb / cb:.2f}x, "
              f"bridge_accumulate {pa / ca:.2f}x")
        out_p = impls["python"].build_bridges(normals)
        out_c = impls["compiled"].build_bridges(normals)
        print(f"max |python - compiled| on bridges: "
              f"{np.max(np.abs(out_p - out_c)):.2e}")


if __name__ == "__main__":
    main()
