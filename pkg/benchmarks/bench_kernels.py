"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from bstl import kernels


def cases(rng):
    z = rng.standard_normal((16, 16, 32))
    d = rng.standard_normal((64, 256))
    d /= np.linalg.norm(d, axis=0)
    return {
        "block_energies 16x16x32 / (2,2,4)": lambda: kernels.block_energies(z, (2, 2, 4)),
        "block_energies 16x16x32 / (1,1,1)": lambda: kernels.block_energies(z, (1, 1, 1)),
        "max_abs_inner 64x256 all pairs": lambda: kernels.max_abs_inner(d, 4, False),
        "max_abs_inner 64x256 within blocks": lambda: kernels.max_abs_inner(d, 4, True),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    work = cases(np.random.default_rng(0))
    original = kernels.backend()
    print(f"{'case':40s}" + "".join(f"{b:>12s}" for b in backends) + "   speedup")
    try:
        for label, fn in work.items():
            times = []
            for b in backends:
                kernels.set_backend(b)
                times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
            ratio = times[-1] / times[0] if len(times) > 1 else 1.0
            print(f"{label:40s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times) + f"   {ratio:6.1f}x")
    finally:
        kernels.set_backend(original)


if __name__ == "__main__":
    main()
