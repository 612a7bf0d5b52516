"""Timing comparison of the compiled and reference pairwise-scan kernels.

Run as:  python benchmarks/bench_kernels.py [--sizes 512,1024,2048,4096]

Both backends are loaded explicitly (the package-level import picks the
compiled one when available), fed identical seeded inputs, timed, and the
results are cross-checked for agreement before printing the table.
"""

import argparse
import time

import numpy as np

from roughpde._kernels import get_backend


def make_inputs(n, d=2, m=4, seed=0):
    rng = np.random.default_rng(seed)
    dt = 1.0 / n
    x = np.vstack([np.zeros((1, d)), np.cumsum(rng.standard_normal((n, d)) * np.sqrt(dt), axis=0)])
    dx = np.diff(x, axis=0)
    blocks = 0.5 * np.einsum("ik,il->ikl", dx, dx)
    pfx = np.zeros((n + 1, d, d))
    np.cumsum(np.einsum("ik,il->ikl", x[:-1], dx), axis=0, out=pfx[1:])
    qfx = np.zeros((n + 1, d, d))
    np.cumsum(blocks, axis=0, out=qfx[1:])
    y = np.cumsum(rng.standard_normal((n + 1, m)) * np.sqrt(dt), axis=0)
    yp = rng.standard_normal((n + 1, m, d))
    arrays = {k: np.ascontiguousarray(v) for k, v in
              dict(x=x, pfx=pfx, qfx=qfx, y=y, yp=yp).items()}
    arrays["dt"] = dt
    return arrays


CASES = [
    ("path_holder_max", lambda b, a, n: b.path_holder_max(a["y"], a["dt"], 0.4, 0, n)),
    ("remainder_holder_max", lambda b, a, n: b.remainder_holder_max(
        a["y"], a["yp"], a["x"], a["dt"], 0.8, 0, n)),
    ("second_holder_max", lambda b, a, n: b.second_holder_max(
        a["x"], a["pfx"], a["qfx"], a["dt"], 0.8, 0, n)),
    ("control_w_dp", lambda b, a, n: b.control_w_dp(
        a["x"], a["pfx"], a["qfx"], a["dt"], 0.4, 0.1, 0, n)),
]


def bench(sizes):
    native = get_backend("native")
    reference = get_backend("reference")
    print(f"{'kernel':24s} {'n':>6s} {'native[s]':>10s} {'reference[s]':>13s} {'speedup':>8s}")
    for name, fn in CASES:
        for n in sizes:
            arrays = make_inputs(n)
            t0 = time.perf_counter()
            v_nat = fn(native, arrays, n)
            t1 = time.perf_counter()
            v_ref = fn(reference, arrays, n)
            t2 = time.perf_counter()
            if not np.isclose(v_nat, v_ref, rtol=1e-12, atol=1e-14):
                raise AssertionError(f"{name} backends disagree at n={n}: {v_nat} vs {v_ref}")
            tn, tr = t1 - t0, t2 - t1
            print(f"{name:24s} {n:6d} {tn:10.4f} {tr:13.4f} {tr / tn:8.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="512,1024,2048,4096")
    args = parser.parse_args()
    bench([int(s) for s in args.sizes.split(",")])
