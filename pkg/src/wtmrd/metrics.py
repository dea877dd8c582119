"""Attack detection rate and time, data security level, and delay.

Scalar formulas work in decimal on the shortest repr of their inputs, so
``attack_detection_time(50, 0.58)`` is exactly 29.0 rather than a binary
rounding of it.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from decimal import Decimal
from typing import IO, Iterable, Mapping, Sequence

from .engine import Role
from .winnow import Label


class TranscriptError(RuntimeError):
    """A transcript contradicts itself (e.g. delivery without origination)."""


def _d(x: float | int) -> Decimal:
    return Decimal(repr(x)) if isinstance(x, float) else Decimal(x)


def attack_detection_rate(correct: int, total: int) -> float:
    if total <= 0:
        raise ValueError("empty scenario: no nodes to classify")
    if not 0 <= correct <= total:
        raise ValueError("correct must lie in [0, total]")
    return float(_d(correct) * 100 / _d(total))


def attack_detection_time(total: int, per_node_ms: float) -> float:
    if total <= 0 or per_node_ms < 0:
        raise ValueError("need total > 0 and per-node time >= 0")
    return float(_d(total) * _d(per_node_ms))


def data_security_level(delivered: int, sent: int) -> float:
    if sent <= 0:
        raise ValueError("empty workload: no packets sent")
    if not 0 <= delivered <= sent:
        raise ValueError("delivered must lie in [0, sent]")
    return float(_d(delivered) * 100 / _d(sent))


def delay(actual_ms: float, expected_ms: float) -> float:
    if actual_ms < expected_ms:
        raise TranscriptError(f"packet arrived at {actual_ms} ms, before its ideal {expected_ms} ms")
    return float(_d(actual_ms) - _d(expected_ms))


@dataclass(frozen=True)
class MetricsReport:
    adr_percent: float
    dsl_percent: float
    delay_ms: float
    correctly_detected: int
    total_nodes: int
    delivered: int
    sent: int
    # mean per-packet transit (actual) and ideal hops * latency (expected)
    actual_arrival_ms: float
    expected_arrival_ms: float
    # wall-clock derived; never part of reproducibility checks
    adt_ms: float = 0.0
    per_node_classify_ms: float = 0.0


REPORT_COLUMNS = [f.name for f in fields(MetricsReport)]
TIMING_COLUMNS = ("adt_ms", "per_node_classify_ms")

PACKET_COLUMNS = ["time", "event", "flow", "seq", "node", "pathId", "hops", "origin"]


def count_correct(roles: Sequence[Role], labels: Mapping[int, Label]) -> int:
    return sum(1 for i, role in enumerate(roles)
               if (labels.get(i, Label.NORMAL) == Label.MALICIOUS) == role.malicious)


def aggregate(packet_rows: Iterable[Sequence], roles: Sequence[Role], labels: Mapping[int, Label],
              per_node_classify_ms: float = 0.0, hop_latency_ms: int = 2,
              measure_from_ms: int = 0, flows: Iterable[int] | None = None) -> MetricsReport:
    """Fold a packet transcript into a report.

    Only packets of ``flows`` (all when None) originated at or after
    ``measure_from_ms`` count. Row order does not matter.
    """
    wanted = None if flows is None else set(flows)
    sent: set[tuple[int, int]] = set()
    arrivals: dict[tuple[int, int], tuple[int, int, int]] = {}
    for row in packet_rows:
        time, event, flow, seq, _node, _pid, hops, origin = (int(row[0]), row[1], int(row[2]),
                                                             int(row[3]), row[4], row[5], int(row[6]),
                                                             int(row[7]))
        if origin < measure_from_ms or (wanted is not None and flow not in wanted):
            continue
        key = (flow, seq)
        if event == "send":
            if key in sent:
                raise TranscriptError(f"packet {key} originated twice")
            sent.add(key)
        elif event == "deliver":
            if key in arrivals:
                raise TranscriptError(f"packet {key} delivered twice")
            arrivals[key] = (time, origin, hops)
    orphans = set(arrivals) - sent
    if orphans:
        raise TranscriptError(f"delivery without origination for packets {sorted(orphans)[:5]}")
    transit = []
    ideal = []
    for time, origin, hops in arrivals.values():
        actual = time - origin
        expected = hops * hop_latency_ms
        delay(actual, expected)
        transit.append(actual)
        ideal.append(expected)
    n = len(transit)
    aat = sum(transit) / n if n else 0.0
    eat = sum(ideal) / n if n else 0.0
    mean_delay = (sum(transit) - sum(ideal)) / n if n else 0.0
    correct = count_correct(roles, labels)
    total = len(roles)
    return MetricsReport(
        adr_percent=attack_detection_rate(correct, total),
        dsl_percent=data_security_level(len(arrivals), len(sent)) if sent else 0.0,
        delay_ms=mean_delay,
        correctly_detected=correct,
        total_nodes=total,
        delivered=len(arrivals),
        sent=len(sent),
        actual_arrival_ms=aat,
        expected_arrival_ms=eat,
        adt_ms=attack_detection_time(total, per_node_classify_ms),
        per_node_classify_ms=per_node_classify_ms,
    )


def write_report_csv(report: MetricsReport, out: IO[str]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    row = asdict(report)
    w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])


def read_report_csv(src: IO[str]) -> dict[str, float]:
    rows = list(csv.DictReader(src))
    return {k: float(v) for k, v in rows[0].items()}


def _fmt(v: float | int) -> str:
    return repr(v) if isinstance(v, float) else str(v)
