"""Compare the compiled likelihood kernel against the pure-NumPy fallback.

Times the hot loop (profiled-nll value+gradient) per bundled dataset and an
end-to-end fit with each backend. Run:

    python benchmarks/bench_backends.py [--full]
"""
import argparse
import time
import warnings

import numpy as np

from higarrote import HiGarroteOptions, center_response, higarrote
from higarrote.datasets import BUNDLED_IDS, load_dataset
from higarrote.likelihood import _nll_kernel_numpy
from higarrote.prior import correlation_exponents, rho_dimension

try:
    from higarrote._gpkern import nll_kernel as compiled_kernel
except ImportError:
    compiled_kernel = None


def time_kernel(kernel, E, rho, delta, y, budget_s=0.4):
    kernel(E, rho, delta, y)  # warm up
    n_calls = 0
    t0 = time.perf_counter()
    while time.perf_counter() - t0 < budget_s:
        kernel(E, rho, delta, y)
        n_calls += 1
    return n_calls / (time.perf_counter() - t0)


def bench_kernels():
    print(f"{'dataset':<14} {'n':>3} {'k':>3} {'numpy evals/s':>14} "
          f"{'compiled evals/s':>17} {'speedup':>8}")
    for ds in BUNDLED_IDS:
        design, _ = load_dataset(ds)
        y = np.ascontiguousarray(center_response(design).y)
        E = correlation_exponents(design)
        k = rho_dimension(design.factors)
        rho = np.ascontiguousarray(np.full(k, 0.5))
        r_np = time_kernel(_nll_kernel_numpy, E, rho, 0.5, y)
        if compiled_kernel is None:
            print(f"{ds:<14} {design.n_runs:>3} {k:>3} {r_np:>14.0f} "
                  f"{'(not built)':>17}")
            continue
        r_cy = time_kernel(compiled_kernel, E, rho, 0.5, y)
        print(f"{ds:<14} {design.n_runs:>3} {k:>3} {r_np:>14.0f} "
              f"{r_cy:>17.0f} {r_cy / r_np:>7.1f}x")


def bench_end_to_end():
    import higarrote.likelihood as lk

    print(f"\n{'dataset':<14} {'numpy fit (s)':>14} {'compiled fit (s)':>17}")
    for ds in BUNDLED_IDS:
        design, _ = load_dataset(ds)
        times = {}
        for name, kernel in (("numpy", _nll_kernel_numpy),
                             ("compiled", compiled_kernel)):
            if kernel is None:
                times[name] = float("nan")
                continue
            lk._kernel = kernel
            t0 = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                higarrote(design, HiGarroteOptions(seed=0))
            times[name] = time.perf_counter() - t0
        print(f"{ds:<14} {times['numpy']:>14.2f} {times['compiled']:>17.2f}")
    lk._kernel, _ = lk._pick_backend()


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--full", action="store_true",
                        help="also time end-to-end fits per backend")
    args = parser.parse_args()
    print("likelihood kernel (value + gradient), higher is better\n")
    bench_kernels()
    if args.full:
        bench_end_to_end()
