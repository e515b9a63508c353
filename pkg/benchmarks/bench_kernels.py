"""Timing comparison of the numba and pure-numpy kernel backends.

Each backend runs in a fresh interpreter (the backend is chosen at import
time from DATAENRICH_BACKEND), timing l1 projections and full solver
sweeps on a mid-sized problem. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np
from dataenrich import _kernels, FitConfig, fit
from dataenrich.synthesis import SynthesisSpec, generate

def best_of(reps, fn):
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)

rng = np.random.default_rng(0)
vectors = [rng.standard_normal(2000) * 3.0 for _ in range(200)]

def proj():
    for v in vectors:
        _kernels.l1_project(v, 5.0)

inst = generate(SynthesisSpec(p=200, G=20, n_per_group=80, sparsity=20,
                              noise_sigma=0.1, seed=3))
cfg = FitConfig(max_iters=300, update_order="gauss_seidel")

def solve():
    fit(inst.dataset, inst.constraints, cfg)

# untimed warmup so jit compilation is excluded
proj(); solve()

print(json.dumps({
    "backend": _kernels.BACKEND,
    "l1_project_200x2000_s": best_of(5, proj),
    "fit_300_iters_s": best_of(3, solve),
}))
"""


def run_backend(backend):
    env = dict(os.environ, DATAENRICH_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER], env=env,
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise SystemExit(f"{backend} worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    rows = [run_backend(b) for b in ("numpy", "numba")]
    keys = [k for k in rows[0] if k != "backend"]
    name_w = max(len(k) for k in keys)
    header = f"{'kernel':<{name_w}}  " + "".join(f"{r['backend']:>12}" for r in rows)
    print(header)
    print("-" * len(header))
    for k in keys:
        cells = "".join(f"{r[k]:>12.4f}" for r in rows)
        ratio = rows[0][k] / rows[1][k]
        print(f"{k:<{name_w}}  {cells}   ({ratio:.1f}x)")


if __name__ == "__main__":
    main()
