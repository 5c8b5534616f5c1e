"""Time the compiled and numpy kernel backends on representative inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--flow]

``--flow`` also times a short end-to-end flow under each backend, running
each in a fresh interpreter so that ``REPFLOW_PURE_PYTHON`` takes effect.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from repflow import kernels
from repflow.lattice import ball_offsets, build_domain

FLOW_SNIPPET = """
import time
from repflow import build_domain, make_potential, run_flow, FlowConfig
from repflow.fields import grassmannian_winding_field
dom = build_domain(3, 32, 16.0)
spec = make_potential("smoothed", 0.1)
f0 = grassmannian_winding_field(dom, amplitude=0.2, seed=1)
t = time.perf_counter()
run_flow(f0, spec, FlowConfig(n_steps=20))
print(time.perf_counter() - t)
"""


def cases(rng: np.random.Generator) -> dict:
    a = rng.normal(size=(72 * 72 * 8, 2, 2))
    a3 = rng.normal(size=(20000, 3, 3))
    dom = build_domain(3, 48, 16.0)
    offs = ball_offsets(dom, 2.0).astype(np.intp)
    centers = rng.integers(0, 48, size=(64, 3)).astype(np.intp)
    vals = rng.random((2, dom.n_sites))
    w = rng.random(len(offs))
    pts = rng.uniform(0, 16.0, size=(4000, 2))
    return {
        "sym_eigh l=2 (41k sites)": lambda k: k.sym_eigh(a + np.swapaxes(a, 1, 2)),
        "sym_eigh l=3 (20k sites)": lambda k: k.sym_eigh(a3 + np.swapaxes(a3, 1, 2)),
        f"stencil_sum ({len(offs)} offsets x 64 centers)":
            lambda k: k.stencil_sum(vals, dom.shape, centers, offs, w),
        "stencil_max": lambda k: k.stencil_max(vals[0], dom.shape, centers, offs),
        "greedy_cover (4000 points)": lambda k: k.greedy_cover(pts, 16.0, 0.2),
        "min_sq_distance (4000 x 200)": lambda k: k.min_sq_distance(pts, pts[:200], 16.0),
    }


def flow_time(pure: bool) -> float:
    env = dict(os.environ, REPFLOW_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", FLOW_SNIPPET], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--flow", action="store_true", help="also time an end-to-end flow")
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy backend is timed")
    rng = np.random.default_rng(0)
    names = list(backends)
    print(f"{'kernel':44s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(rng).items():
        times = []
        for n in names:
            mod = backends[n]
            fn(mod)  # warm up
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        row = f"{label:44s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)
    if args.flow:
        py = flow_time(True)
        line = f"{'flow, 20 steps, m=3 n=32':44s}{py * 1e3:10.2f}ms"
        if "compiled" in backends:
            c = flow_time(False)
            line += f"{c * 1e3:10.2f}ms{py / c:11.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
