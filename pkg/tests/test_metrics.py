import io
import random
import subprocess
import sys
from pathlib import Path

import pytest

from wtmrd.engine import HONEST, Role, RoleKind
from wtmrd.metrics import (REPORT_COLUMNS, TranscriptError, aggregate, attack_detection_rate,
                           attack_detection_time, data_security_level, delay, read_report_csv,
                           write_report_csv)
from wtmrd.winnow import Label

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


@pytest.mark.parametrize("args, want", [((47, 50), 94), ((50, 50), 100), ((36, 50), 72), ((39, 50), 78)])
def test_adr(args, want):
    assert attack_detection_rate(*args) == want


@pytest.mark.parametrize("args, want", [((50, 0.4), 20), ((50, 0), 0), ((50, 0.7), 35), ((50, 0.58), 29)])
def test_adt(args, want):
    assert attack_detection_time(*args) == want


@pytest.mark.parametrize("args, want", [((9, 10), 90), ((0, 10), 0), ((7, 10), 70), ((8, 10), 80)])
def test_dsl(args, want):
    assert data_security_level(*args) == want


@pytest.mark.parametrize("args, want", [((32, 25), 7), ((25, 25), 0), ((42, 25), 17), ((37, 25), 12)])
def test_delay(args, want):
    assert delay(*args) == want


def test_metric_errors():
    with pytest.raises(ValueError):
        attack_detection_rate(1, 0)
    with pytest.raises(ValueError):
        data_security_level(0, 0)
    with pytest.raises(TranscriptError):
        delay(20, 25)


def rows_for(n_sent, n_delivered, hops=2, latency=2, extra=0):
    rows = [(10 * i, "send", 0, i + 1, 0, 1, 0, 10 * i) for i in range(n_sent)]
    rows += [(10 * i + hops * latency + extra, "deliver", 0, i + 1, 9, 1, hops, 10 * i)
             for i in range(n_delivered)]
    return rows


def test_aggregate_tallies():
    roles = [HONEST] * 4 + [Role(RoleKind.BLACKHOLE)]
    labels = {4: Label.MALICIOUS}
    r = aggregate(rows_for(40, 38, extra=3), roles, labels)
    assert (r.dsl_percent, r.adr_percent, r.delay_ms, r.sent, r.delivered) == (95.0, 100.0, 3.0, 40, 38)


def test_all_honest_perfect_classifier():
    r = aggregate(rows_for(10, 10), [HONEST] * 3, {})
    assert r.adr_percent == 100.0 and r.dsl_percent == 100.0 and r.delay_ms == 0.0


def test_aggregate_is_order_independent():
    rows = rows_for(30, 25, extra=1)
    shuffled = rows[:]
    random.Random(3).shuffle(shuffled)
    assert aggregate(rows, [HONEST], {}) == aggregate(shuffled, [HONEST], {})


def test_orphan_delivery_is_rejected():
    rows = [(5, "deliver", 0, 1, 9, 1, 1, 0)]
    with pytest.raises(TranscriptError, match="without origination"):
        aggregate(rows, [HONEST], {})


def test_duplicate_origination_is_rejected():
    rows = rows_for(2, 0) + rows_for(1, 0)
    with pytest.raises(TranscriptError):
        aggregate(rows, [HONEST], {})


def test_measurement_window_and_flow_filter():
    rows = rows_for(10, 10)
    rows.append((0, "send", 1, 1, 3, 1, 0, 0))
    r = aggregate(rows, [HONEST], {}, measure_from_ms=50, flows=[0])
    assert r.sent == 5 and r.delivered == 5


def test_report_csv_round_trip():
    r = aggregate(rows_for(10, 9, extra=2), [HONEST], {}, per_node_classify_ms=0.25)
    buf = io.StringIO()
    write_report_csv(r, buf)
    assert buf.getvalue().splitlines()[0].split(",") == REPORT_COLUMNS
    back = read_report_csv(io.StringIO(buf.getvalue()))
    assert back["dsl_percent"] == 90.0 and back["adt_ms"] == 0.25


def test_report_equals_standalone_replay(tmp_path):
    from wtmrd.simulation import run_scenario
    from wtmrd.workload import ScenarioConfig

    out = run_scenario(ScenarioConfig(nodes=50, seed=12)).write(tmp_path / "run")
    proc = subprocess.run([sys.executable, str(SCRIPTS / "replay_report.py"), str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "report matches transcript" in proc.stdout
