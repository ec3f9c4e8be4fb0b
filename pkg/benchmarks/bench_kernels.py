"""Timing comparison of the numba and numpy kernel backends.

Run as a script:  python3 benchmarks/bench_kernels.py [N]

Times the four hot kernels at a given problem size and a full solve at
sweep scale, printing one row per (kernel, backend) with the speedup.
The numba path needs a warm call before timing so compilation is not
counted.
"""

import sys
import timeit

import numpy as np

from cswlp import DenseMatrix, Measurements, SolverConfig, SupportEstimate, WeightVector, solve
from cswlp._kernels import (
    available_backends,
    backtrack_raw,
    get_backend,
    indicator_max_raw,
    set_backend,
    smoothed_gradient_raw,
    smoothed_objective_raw,
)


def _kernel_cases(N: int, rng):
    x = rng.standard_normal(N)
    pd = rng.standard_normal(N) * 0.1
    w = np.ones(N)
    w[: N // 4] = 0.3
    wp = w**0.5
    sigma = 0.5
    f0 = smoothed_objective_raw(x, wp, 0.5, sigma)
    return {
        "objective": lambda: smoothed_objective_raw(x, wp, 0.5, sigma),
        "gradient": lambda: smoothed_gradient_raw(x, wp, 0.5, sigma),
        "backtrack": lambda: backtrack_raw(x, pd, wp, 0.5, sigma, f0, 0.5, 30),
        "indicator_max": lambda: indicator_max_raw(x, w, sigma, 2.0),
    }


def _solve_case(rng):
    N, n, k = 500, 100, 40
    A = DenseMatrix(rng.standard_normal((n, N)) / np.sqrt(n))
    x = np.zeros(N)
    x[rng.choice(N, size=k, replace=False)] = rng.standard_normal(k)
    b = Measurements(A.matrix @ x)
    w = WeightVector(omega=0.5, estimate=SupportEstimate(tuple(range(1, k + 1))), size=N)
    cfg = SolverConfig(p=0.5, max_iters=100)
    return lambda: solve(A, b, w, cfg)


def _time(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main() -> int:
    N = int(sys.argv[1]) if len(sys.argv) > 1 else 4096
    backends = available_backends()
    print(f"backends: {', '.join(backends)}   kernel size N={N}")
    if "numba" not in backends:
        print("numba is not importable here; timing the numpy path alone")

    rng = np.random.default_rng(0)
    cases = dict(_kernel_cases(N, rng))
    cases["solve(N=500,n=100)"] = _solve_case(rng)
    saved = get_backend()
    results: dict[str, dict[str, float]] = {}
    try:
        for backend in backends:
            set_backend(backend)
            for name, fn in cases.items():
                fn()  # warm-up; compiles on first numba call
                heavy = name.startswith("solve")
                results.setdefault(name, {})[backend] = _time(
                    fn, repeat=3, number=1 if heavy else 200
                )
    finally:
        set_backend(saved)

    width = max(len(name) for name in results)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f"{'numpy/numba':>13}"
    print(header)
    for name, times in results.items():
        row = f"{name:<{width}}  " + "".join(f"{1e6 * times[b]:>10.1f}us" for b in backends)
        if len(backends) > 1:
            row += f"{times['numpy'] / times['numba']:>12.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
