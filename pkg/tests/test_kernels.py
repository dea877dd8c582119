import csv
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wtmrd import _kernels_py, kernels

compiled = pytest.importorskip("wtmrd._kernels", reason="compiled extension not built")

BACKENDS = [_kernels_py, compiled]


def test_dispatch_prefers_the_extension():
    if os.environ.get("WTMRD_PURE_PYTHON"):
        assert kernels.BACKEND == "python"
    else:
        assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("seed", range(20))
def test_move_toward_identical(seed):
    rng = np.random.default_rng(seed)
    n = 64
    base = [rng.uniform(0, 1200, n) for _ in range(4)]
    speed = rng.uniform(0, 20, n)
    speed[:5] = 0.0
    base[2][5:10] = base[0][5:10]  # some nodes sit on their waypoint
    base[3][5:10] = base[1][5:10]
    out = []
    for mod in BACKENDS:
        x, y = base[0].copy(), base[1].copy()
        arrived = mod.move_toward(x, y, base[2], base[3], speed, 1.0)
        out.append((x, y, arrived))
    np.testing.assert_array_equal(out[0][0], out[1][0])
    np.testing.assert_array_equal(out[0][1], out[1][1])
    np.testing.assert_array_equal(out[0][2], out[1][2])


@pytest.mark.parametrize("n", [0, 1, 2, 50, 300])
def test_neighbor_csr_identical(n):
    rng = np.random.default_rng(n)
    x, y = rng.uniform(0, 1200, n), rng.uniform(0, 1200, n)
    (ip, ix), (cp, cx) = (mod.neighbor_csr(x, y, 250.0) for mod in BACKENDS)
    np.testing.assert_array_equal(ip, cp)
    np.testing.assert_array_equal(ix, cx)
    for i in range(n):
        row = ix[ip[i]:ip[i + 1]]
        assert list(row) == sorted(row)


def test_neighbor_csr_includes_exact_range():
    x, y = np.array([0.0, 250.0]), np.array([0.0, 0.0])
    for mod in BACKENDS:
        indptr, indices = mod.neighbor_csr(x, y, 250.0)
        assert list(indices) == [1, 0]


@given(st.lists(st.lists(st.integers(0, 1), min_size=8, max_size=8), min_size=1, max_size=20),
       st.lists(st.integers(-6, 6), min_size=8, max_size=8))
def test_active_weight_sums_identical(rows, exps):
    bits = np.array(rows, dtype=np.uint8)
    weights = np.array([2.0 ** e for e in exps])
    a, b = (mod.active_weight_sums(weights, bits) for mod in BACKENDS)
    np.testing.assert_array_equal(a, b)


@given(st.data())
def test_rreq_kernels_identical(data):
    n = data.draw(st.integers(3, 30))
    eligible = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)), dtype=np.uint8)
    trace = np.array(data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=5, unique=True)),
                     dtype=np.int32)
    receivers = np.array(data.draw(st.lists(st.integers(0, n - 1), max_size=n, unique=True)), dtype=np.int32)
    destination = data.draw(st.integers(0, n - 1))
    limit = data.draw(st.integers(1, 3))
    count0 = np.array(data.draw(st.lists(st.integers(0, limit), min_size=n, max_size=n)), dtype=np.int8)
    prevs0 = np.full((n, limit), -1, dtype=np.int32)
    for v in range(n):
        prevs0[v, :count0[v]] = data.draw(st.lists(st.integers(0, n - 1), min_size=int(count0[v]),
                                                    max_size=int(count0[v]), unique=True))
    results = []
    for mod in BACKENDS:
        count, prevs = count0.copy(), prevs0.copy()
        admitted, discards = mod.rreq_admit(receivers, trace, destination, eligible, count, prevs, limit)
        targets = mod.rreq_targets(receivers, eligible, trace)
        results.append((admitted.tolist(), discards, count.tolist(), prevs.tolist(), targets.tolist()))
    assert results[0] == results[1]
    admitted, discards = results[0][0], results[0][1]
    assert len(admitted) + discards == len(receivers)


def _report(out_dir, pure):
    env = dict(os.environ)
    env.pop("WTMRD_PURE_PYTHON", None)
    if pure:
        env["WTMRD_PURE_PYTHON"] = "1"
    subprocess.run([sys.executable, "-m", "wtmrd.cli", "run", "--nodes", "40", "--seed", "6",
                    "--sim-time", "60", "--out", str(out_dir)], env=env, check=True,
                   capture_output=True)
    with open(out_dir / "report.csv", newline="") as fh:
        row = next(csv.DictReader(fh))
    return {k: v for k, v in row.items() if k not in ("adt_ms", "per_node_classify_ms")}, \
        (out_dir / "packets.csv").read_bytes()


def test_backends_give_identical_runs(tmp_path):
    assert _report(tmp_path / "py", True) == _report(tmp_path / "cy", False)
