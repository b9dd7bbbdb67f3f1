"""Time the pairwise scoring kernel for the compiled and numpy backends.

    python benchmarks/bench_pairwise.py                 # 1000 x 8000 at dim 12288
    python benchmarks/bench_pairwise.py --fallback-rows 50

The numpy fallback is timed on a reduced number of target rows and
extrapolated linearly, since its cost is exactly proportional to rows.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import time

import numpy as np

from simfilter import _pykernel, kernels
from simfilter.simkernel import _scores_from_dots


def make_inputs(targets: int, secondaries: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.random((targets, dim), dtype=np.float32)
    b = rng.random((secondaries, dim), dtype=np.float32)
    return a, b


def time_scores(impl, a: np.ndarray, b: np.ndarray, threads: int = 1) -> float:
    start = time.perf_counter()
    dots = impl.dot_matrix(a, b, threads)
    _scores_from_dots(dots, impl.squared_norms(a), impl.squared_norms(b))
    return time.perf_counter() - start


def run(targets: int = 1000, secondaries: int = 8000, dim: int = 12288, *,
        threads: int = 1, fallback_rows: int | None = 20, seed: int = 0) -> dict:
    a, b = make_inputs(targets, secondaries, dim, seed)
    result = {
        "targets": targets, "secondaries": secondaries, "dim": dim, "threads": threads,
        "multiply_adds": targets * secondaries * dim, "backend": kernels.BACKEND,
        "cpu_count": os.cpu_count(), "machine": platform.machine(),
    }
    if kernels.BACKEND == "compiled":
        from simfilter import _ckernel
        seconds = time_scores(_ckernel, a, b, threads)
        result["compiled_s"] = round(seconds, 3)
        result["compiled_gmacs"] = round(result["multiply_adds"] / seconds / 1e9, 3)
    if fallback_rows:
        rows = min(fallback_rows, targets)
        seconds = time_scores(_pykernel, a[:rows], b)
        result["fallback_rows"] = rows
        result["fallback_s_extrapolated"] = round(seconds * targets / rows, 3)
        if "compiled_s" in result:
            result["speedup"] = round(result["fallback_s_extrapolated"] / result["compiled_s"], 2)
    return result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--targets", type=int, default=1000)
    parser.add_argument("--secondaries", type=int, default=8000)
    parser.add_argument("--dim", type=int, default=12288)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--fallback-rows", type=int, default=20,
                        help="target rows for timing the fallback (0 to skip)")
    args = parser.parse_args()
    print(json.dumps(run(args.targets, args.secondaries, args.dim, threads=args.threads,
                         fallback_rows=args.fallback_rows), indent=2))


if __name__ == "__main__":
    main()
