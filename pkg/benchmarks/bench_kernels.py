"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--nodes 100 500] [--repeat 5]

Each kernel is timed on identical inputs under both backends, and an
end-to-end run is timed with ``WTMRD_PURE_PYTHON`` set in a subprocess.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from wtmrd import _kernels_py

try:
    from wtmrd import _kernels
except ImportError:  # extension not built
    _kernels = None


def _inputs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0, 1200, n), rng.uniform(0, 1200, n)
    wx, wy = rng.uniform(0, 1200, n), rng.uniform(0, 1200, n)
    speed = rng.uniform(0, 20, n)
    indptr, indices = _kernels_py.neighbor_csr(x, y, 250.0)
    eligible = (rng.random(n) > 0.2).astype(np.uint8)
    return x, y, wx, wy, speed, indptr, indices, eligible


def _cases(mod, n: int):
    x, y, wx, wy, speed, indptr, indices, eligible = _inputs(n)
    bits = np.random.default_rng(1).integers(0, 2, size=(n, 12), dtype=np.uint8)
    weights = np.random.default_rng(2).uniform(0.5, 4, 12)
    receivers = np.arange(n, dtype=np.int32)
    trace = np.array([0, 1, 2], dtype=np.int32)
    row = indices[indptr[5]:indptr[6]]

    def admit():
        count = np.zeros(n, dtype=np.int8)
        prevs = np.full((n, 3), -1, dtype=np.int32)
        mod.rreq_admit(receivers, trace, n - 1, eligible, count, prevs, 3)

    return {
        "move_toward": lambda: mod.move_toward(x.copy(), y.copy(), wx, wy, speed, 1.0),
        "neighbor_csr": lambda: mod.neighbor_csr(x, y, 250.0),
        "active_weight_sums": lambda: mod.active_weight_sums(weights, bits),
        "rreq_targets": lambda: mod.rreq_targets(row, eligible, trace),
        "rreq_admit": admit,
    }


def _end_to_end(nodes: int, pure: bool) -> float:
    env = dict(os.environ)
    if pure:
        env["WTMRD_PURE_PYTHON"] = "1"
    code = ("import time;from wtmrd.simulation import run_scenario;from wtmrd.workload import ScenarioConfig;"
            f"t=time.perf_counter();run_scenario(ScenarioConfig(nodes={nodes}),record=False);"
            "print(time.perf_counter()-t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, nargs="+", default=[100, 500])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-run", action="store_true", help="only time the kernels")
    args = ap.parse_args()
    if _kernels is None:
        sys.exit("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<20}{'nodes':>6}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n in args.nodes:
        py, cy = _cases(_kernels_py, n), _cases(_kernels, n)
        for name in py:
            number = 20
            tp = min(timeit.repeat(py[name], number=number, repeat=args.repeat)) / number * 1e6
            tc = min(timeit.repeat(cy[name], number=number, repeat=args.repeat)) / number * 1e6
            print(f"{name:<20}{n:>6}{tp:>12.1f}{tc:>12.1f}{tp / tc:>9.1f}x")
    if not args.skip_run:
        print(f"\n{'full run':<20}{'nodes':>6}{'python s':>12}{'cython s':>12}{'speedup':>9}")
        for n in args.nodes:
            tp, tc = _end_to_end(n, True), _end_to_end(n, False)
            print(f"{'run_scenario':<20}{n:>6}{tp:>12.2f}{tc:>12.2f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
