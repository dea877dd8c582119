"""Grid sweeps over node count or designated-flow packet count.

Every cell (axis value, variant, run index) gets a derived seed. The seed
ignores the variant, so variants at the same (value, run) face the same
mobility, attacker placement and traffic; comparisons are paired.
"""

from __future__ import annotations

import csv
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .engine import ConfigurationError
from .simulation import run_scenario
from .variants import Variant
from .workload import ScenarioConfig

log = logging.getLogger(__name__)

AXES = ("nodes", "packets")
DEFAULT_VALUES = {"nodes": tuple(range(50, 501, 50)), "packets": tuple(range(10, 101, 10))}
DEFAULT_VARIANTS = ("wtmrd", "noclass", "threshold:1")

# table stem -> MetricsReport field
METRICS = {
    "attack_detection_rate": "adr_percent",
    "attack_detection_time": "adt_ms",
    "data_security_level": "dsl_percent",
    "delay": "delay_ms",
}
CELL_COLUMNS = ["axis", "value", "variant", "run", "seed", "adr_percent", "adt_ms", "dsl_percent",
                "delay_ms", "correctly_detected", "total_nodes", "delivered", "sent"]


class SweepError(RuntimeError):
    """A single cell failed; the message names it."""


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[int, ...]
    variants: tuple[Variant, ...]
    out_dir: Path
    runs: int = 1

    def validate(self) -> "SweepSpec":
        if self.axis not in AXES:
            raise ConfigurationError(f"sweep: axis must be one of {', '.join(AXES)}")
        if not self.values:
            raise ConfigurationError("sweep: values must not be empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigurationError("sweep: values must be strictly ascending")
        if any(v < 1 for v in self.values):
            raise ConfigurationError("sweep: values must be positive")
        if not self.variants:
            raise ConfigurationError("sweep: need at least one variant")
        if self.runs < 1:
            raise ConfigurationError("runs: runs must be at least 1")
        return self


@dataclass(frozen=True)
class Cell:
    value: int
    variant: Variant
    run: int
    seed: int


def derive_seed(master: int, axis: str, value: int, run: int) -> int:
    """64-bit cell seed from the master seed, axis value and run index."""
    words = np.random.SeedSequence([master, AXES.index(axis), value, run]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def cells(spec: SweepSpec, master: int) -> list[Cell]:
    return [Cell(v, var, r, derive_seed(master, spec.axis, v, r))
            for v in spec.values for var in spec.variants for r in range(spec.runs)]


def cell_config(base: ScenarioConfig, axis: str, cell: Cell) -> ScenarioConfig:
    change = {"nodes": cell.value} if axis == "nodes" else {"packets": cell.value}
    return base.replace(seed=cell.seed, runs=1, variant=str(cell.variant), **change)


def run_cell(base: ScenarioConfig, axis: str, cell: Cell) -> dict:
    try:
        report = run_scenario(cell_config(base, axis, cell), cell.variant, record=False).report
    except Exception as exc:
        raise SweepError(f"cell {axis}={cell.value} variant={cell.variant} run={cell.run} "
                         f"(seed {cell.seed}) failed: {type(exc).__name__}: {exc}") from exc
    return {"axis": axis, "value": cell.value, "variant": str(cell.variant), "run": cell.run,
            "seed": cell.seed, "adr_percent": report.adr_percent, "adt_ms": report.adt_ms,
            "dsl_percent": report.dsl_percent, "delay_ms": report.delay_ms,
            "correctly_detected": report.correctly_detected, "total_nodes": report.total_nodes,
            "delivered": report.delivered, "sent": report.sent}


def _run_packed(args: tuple[ScenarioConfig, str, Cell]) -> dict:
    return run_cell(*args)


def run_sweep(spec: SweepSpec, base: ScenarioConfig, jobs: int = 1,
              progress: Callable[[dict], None] | None = None) -> list[dict]:
    """Execute every cell and write the metric tables; returns the cell rows."""
    spec.validate()
    base.validate()
    todo = cells(spec, base.seed)
    for c in todo:
        cell_config(base, spec.axis, c).validate()
    work = [(base, spec.axis, c) for c in todo]
    rows: list[dict] = []
    if jobs <= 1:
        results: Iterable[dict] = map(_run_packed, work)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_run_packed, work)
    try:
        for row in results:
            rows.append(row)
            if progress is not None:
                progress(row)
    finally:
        if jobs > 1:
            pool.shutdown(cancel_futures=True)
    write_tables(spec, rows)
    return rows


def summarise(rows: Sequence[dict], axis: str, values: Sequence[int], variants: Sequence[str],
              field: str) -> tuple[list[list], list[list]]:
    """Mean and sample standard deviation tables for one metric."""
    by_cell: dict[tuple[int, str], list[float]] = {}
    for r in rows:
        by_cell.setdefault((r["value"], r["variant"]), []).append(r[field])
    means, stds = [], []
    for v in values:
        m_row, s_row = [v], [v]
        for var in variants:
            xs = by_cell.get((v, var), [])
            m_row.append(statistics.fmean(xs) if xs else float("nan"))
            s_row.append(statistics.stdev(xs) if len(xs) > 1 else 0.0)
        means.append(m_row)
        stds.append(s_row)
    return means, stds


def write_tables(spec: SweepSpec, rows: Sequence[dict]) -> list[Path]:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    variants = [str(v) for v in spec.variants]
    header = [spec.axis, *variants]
    written = []
    for stem, field in METRICS.items():
        means, stds = summarise(rows, spec.axis, spec.values, variants, field)
        for name, table in ((f"{stem}.csv", means), (f"{stem}_std.csv", stds)):
            path = out / name
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows([[row[0], *(repr(float(x)) for x in row[1:])] for row in table])
            written.append(path)
    ordered = sorted(rows, key=lambda r: (r["value"], variants.index(r["variant"]), r["run"]))
    with open(out / "cells.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, CELL_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(ordered)
    written.append(out / "cells.csv")
    return written


def read_table(path: str | Path) -> tuple[str, list[str], list[list[float]]]:
    """``(axis, variant names, rows)`` from one metric CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    return header[0], header[1:], rows
