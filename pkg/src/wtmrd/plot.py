"""Static figures from sweep tables (needs the ``plot`` extra)."""

from __future__ import annotations

from pathlib import Path

from .sweep import METRICS, read_table

LABELS = {
    "attack_detection_rate": "Attack detection rate (%)",
    "attack_detection_time": "Attack detection time (ms)",
    "data_security_level": "Data security level (%)",
    "delay": "Delay (ms)",
}
AXIS_LABELS = {"nodes": "Number of nodes", "packets": "Number of packets"}


def render(sweep_dir: str | Path, out_dir: str | Path | None = None, fmt: str = "png") -> list[Path]:
    """One line chart per metric table found in ``sweep_dir``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    src = Path(sweep_dir)
    dst = Path(out_dir) if out_dir is not None else src
    dst.mkdir(parents=True, exist_ok=True)
    made = []
    for stem in METRICS:
        table = src / f"{stem}.csv"
        if not table.exists():
            continue
        axis, variants, rows = read_table(table)
        std_path = src / f"{stem}_std.csv"
        stds = read_table(std_path)[2] if std_path.exists() else None
        xs = [r[0] for r in rows]
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for j, name in enumerate(variants, start=1):
            ys = [r[j] for r in rows]
            err = [r[j] for r in stds] if stds else None
            ax.errorbar(xs, ys, yerr=err, marker="o", capsize=3, label=name)
        ax.set_xlabel(AXIS_LABELS.get(axis, axis))
        ax.set_ylabel(LABELS[stem])
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = dst / f"{stem}.{fmt}"
        fig.savefig(path)
        plt.close(fig)
        made.append(path)
    return made
