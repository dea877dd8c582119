#!/usr/bin/env python3
"""Recompute a run's report from its transcript files alone.

    python scripts/replay_report.py RUN_DIR

Reads packets.csv, roles.csv and config.echo.yaml, recomputes every
non-timing report field with exact rational arithmetic, and compares the
result with report.csv. Exits 1 on any mismatch. Does not import wtmrd.
"""

from __future__ import annotations

import csv
import sys
from fractions import Fraction
from pathlib import Path

import yaml

TIMING = {"adt_ms", "per_node_classify_ms"}


def replay(run_dir: Path) -> dict[str, Fraction | int]:
    cfg = yaml.safe_load((run_dir / "config.echo.yaml").read_text())
    measure_from = round(Fraction(str(cfg["sim_time"])) * Fraction(str(cfg["warmup_fraction"])) * 1000)
    latency = int(cfg["hop_latency_ms"])
    only_flow = None if cfg.get("packets") is None else 0

    sent, delivered = set(), {}
    with open(run_dir / "packets.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            origin, flow = int(row["origin"]), int(row["flow"])
            if origin < measure_from or (only_flow is not None and flow != only_flow):
                continue
            key = (flow, int(row["seq"]))
            if row["event"] == "send":
                sent.add(key)
            elif row["event"] == "deliver":
                delivered[key] = (int(row["time"]) - origin, int(row["hops"]) * latency)
    assert set(delivered) <= sent, "delivery without origination"

    with open(run_dir / "roles.csv", newline="") as fh:
        roles = list(csv.DictReader(fh))
    correct = sum(1 for r in roles if (r["label"] == "-1") == (r["role"] != "honest"))

    n = len(delivered)
    actual = sum(a for a, _ in delivered.values())
    ideal = sum(e for _, e in delivered.values())
    return {
        "adr_percent": Fraction(correct * 100, len(roles)),
        "dsl_percent": Fraction(n * 100, len(sent)) if sent else Fraction(0),
        "delay_ms": Fraction(actual - ideal, n) if n else Fraction(0),
        "correctly_detected": correct,
        "total_nodes": len(roles),
        "delivered": n,
        "sent": len(sent),
        "actual_arrival_ms": Fraction(actual, n) if n else Fraction(0),
        "expected_arrival_ms": Fraction(ideal, n) if n else Fraction(0),
    }


def compare(run_dir: Path) -> list[str]:
    with open(run_dir / "report.csv", newline="") as fh:
        stored = next(csv.DictReader(fh))
    problems = []
    for key, want in replay(run_dir).items():
        got = float(stored[key])
        if got != float(want):
            problems.append(f"{key}: report {got!r} != replay {float(want)!r}")
    return problems


def main(argv: list[str]) -> int:
    if len(argv) != 2:
        print(__doc__.strip().splitlines()[2].strip(), file=sys.stderr)
        return 2
    problems = compare(Path(argv[1]))
    for p in problems:
        print(p)
    print("report matches transcript" if not problems else f"{len(problems)} mismatches")
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
