"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 64] [--repeat 5] [--json out.json]

Each kernel runs on identical inputs through both implementations; the
numba timings exclude the first (compiling) call.  The end-to-end row times
one full coarse-to-fine estimate per backend in a fresh interpreter, since
the backend is fixed at import time by FLOWDYN_DISABLE_NUMBA.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from flowdyn import kernels
from flowdyn.kernels import numpy_impl


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(size, rng):
    h = w = size
    ix, iy, it = (rng.normal(0, 20, (h, w)) for _ in range(3))
    img = rng.random((h, w))
    xx, yy = np.meshgrid(np.arange(w) + rng.normal(0, 2, w), np.arange(h) + 0.3, indexing="xy")
    nb = 8
    bins = rng.integers(0, nb, (h, w))
    cells = (np.arange(h)[:, None] * 4 // h) * 4 + np.arange(w)[None, :] * 4 // w
    wts = rng.random((h, w))

    def sweeps(impl):
        u = np.zeros((h, w))
        v = np.zeros((h, w))
        return lambda: impl.hs_sweeps(u, v, ix, iy, it, 225.0, 20)

    return {
        "hs_sweeps x20": sweeps,
        "hs_energy": lambda impl: (lambda: impl.hs_energy(np.zeros((h, w)), np.zeros((h, w)), ix, iy, it, 225.0)),
        "bilinear_sample": lambda impl: (lambda: impl.bilinear_sample(img, xx, yy, False)),
        "cell_histograms": lambda impl: (lambda: impl.cell_histograms(bins, cells, wts, 16, nb)),
    }


_E2E = """
import time, numpy as np
from flowdyn import estimator, kernels
rng = np.random.default_rng(0)
from scipy import ndimage
a = ndimage.gaussian_filter(rng.random(({s}, {s})), 1.5, mode="wrap")
b = np.roll(a, 1, axis=1)
estimator.estimate(a, b)
t0 = time.perf_counter()
for _ in range({r}):
    estimator.estimate(a, b)
print(kernels.BACKEND, (time.perf_counter() - t0) / {r})
"""


def end_to_end(size, repeat):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FLOWDYN_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", _E2E.format(s=size, r=repeat)], env=env, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    if kernels.numba_impl is None:
        sys.exit("numba kernels unavailable (unset FLOWDYN_DISABLE_NUMBA?)")
    rng = np.random.default_rng(0)
    rows = []
    for name, make in kernel_cases(args.size, rng).items():
        fast = make(kernels.numba_impl)
        fast()  # compile
        t_nb = best_of(fast, args.repeat)
        t_np = best_of(make(numpy_impl), args.repeat)
        rows.append({"kernel": name, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb})
    e2e = end_to_end(args.size, max(1, args.repeat // 2))
    rows.append({"kernel": "estimate (end to end)", "numpy_s": e2e["numpy"], "numba_s": e2e["numba"], "speedup": e2e["numpy"] / e2e["numba"]})

    print(f"{args.size}x{args.size}, best of {args.repeat}")
    print(f"{'kernel':<24}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for r in rows:
        print(f"{r['kernel']:<24}{1e3 * r['numpy_s']:>10.3f}{1e3 * r['numba_s']:>10.3f}{r['speedup']:>8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"size": args.size, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
