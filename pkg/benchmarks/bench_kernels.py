"""Time the compiled loop kernels against the vectorized numpy versions.

    python benchmarks/bench_kernels.py [--repeat R] [--scenario PATH]

Also times one full forward solve with each backend; the numpy run is a
subprocess with HUGHES_CONTROL_NO_NUMBA=1.
"""

import argparse
import os
import subprocess
import sys
import timeit
from pathlib import Path

import numpy as np

from hughes_control import kernels

ROOT = Path(__file__).resolve().parents[1]


def cases(n=64, m=3):
    rng = np.random.default_rng(0)
    nf = 2 * n * (n + 1)
    px, py = rng.uniform(0, 4, size=(2, nf))
    ax, ay = rng.uniform(0, 4, size=(2, m))
    vx, vy = rng.normal(size=(2, m))
    bx, by = rng.normal(size=(2, nf))
    rho = rng.uniform(size=(n, n))
    f, df = 1.0 - rho, -np.ones_like(rho)
    tx = rng.uniform(-1, 1, size=(n + 1, n))
    ty = rng.uniform(-1, 1, size=(n, n + 1))
    bar = rng.normal(size=(n, n))
    h = 4.0 / n
    return {
        "kernel_grad_sum": (px, py, ax, ay, 1.0, 1.0),
        "kernel_hess_apply": (px, py, ax, ay, vx, vy, 1.0, 1.0),
        "kernel_hess_transpose": (px, py, ax, ay, bx, by, 1.0, 1.0),
        "projection": (px, py, 0.1),
        "projection_jvp": (px, py, bx, by, 0.1),
        "advect": (rho, f, tx, ty, 0.01, h, h),
        "advect_jvp": (rho, f, df, tx, ty, bar, tx, ty, 0.01, h, h),
        "advect_vjp": (rho, f, df, tx, ty, bar, 0.01, h, h),
    }


def best(fn, args, repeat):
    fn(*args)  # compile / warm up
    number = 20
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


FORWARD = """
import time
from hughes_control.forward import Problem, solve_forward
pb = Problem.from_path({path!r})
solve_forward(pb)
t = time.perf_counter()
solve_forward(pb)
print(time.perf_counter() - t)
"""


def forward_time(path, no_numba):
    env = dict(os.environ)
    if no_numba:
        env["HUGHES_CONTROL_NO_NUMBA"] = "1"
    else:
        env.pop("HUGHES_CONTROL_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", FORWARD.format(path=str(path))], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "reference.toml"))
    args = ap.parse_args()
    if not kernels.NUMBA_ENABLED:
        print("numba not available: both columns time the numpy path")
    print(f"{'kernel':<24}{'loop [us]':>12}{'numpy [us]':>12}{'ratio':>8}")
    for name, a in cases().items():
        tl = best(kernels.LOOP[name], a, args.repeat)
        tn = best(kernels.NUMPY[name], a, args.repeat)
        print(f"{name:<24}{tl * 1e6:12.1f}{tn * 1e6:12.1f}{tn / tl:8.2f}")
    fl = forward_time(args.scenario, no_numba=False)
    fn = forward_time(args.scenario, no_numba=True)
    print(f"{'forward solve':<24}{fl * 1e3:10.1f}ms{fn * 1e3:10.1f}ms{fn / fl:8.2f}")


if __name__ == "__main__":
    main()
