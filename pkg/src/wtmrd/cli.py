"""``wtmrd`` command line: single runs, grid sweeps and plots.

Exit status is 0 on success, 1 for configuration errors and 2 when a run
fails at runtime (e.g. an inconsistent transcript).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from .engine import ConfigurationError
from .metrics import MetricsReport
from .simulation import run_scenario
from .sweep import DEFAULT_VALUES, DEFAULT_VARIANTS, SweepSpec, run_sweep
from .variants import Variant
from .workload import AttackSpec, ScenarioConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
COMMANDS = ("run", "sweep", "plot")

log = logging.getLogger("wtmrd")


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors, so they exit with status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--config", metavar="FILE", help="YAML scenario file; flags override it")
    g.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    g.add_argument("--nodes", type=int, help="node count")
    g.add_argument("--packets", type=int, help="packets on the designated flow")
    g.add_argument("--malicious", type=float, metavar="FRACTION", help="attacker fraction in [0, 0.5)")
    g.add_argument("--attack", metavar="KIND", help="blackhole or grayhole:p")
    g.add_argument("--trust-mode", choices=("faithful", "corrected"))
    g.add_argument("--variant", metavar="NAME", help="wtmrd, noclass or threshold:t")
    g.add_argument("--paths", type=int, metavar="K", help="disjoint path budget")
    g.add_argument("--runs", type=int, help="runs per configuration")
    g.add_argument("--sim-time", type=float, metavar="SECONDS", help="simulated duration")
    g.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wtmrd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute seeded runs of one scenario")
    _scenario_flags(run)

    sweep = sub.add_parser("sweep", help="grid over node or packet count for several variants")
    _scenario_flags(sweep)
    sweep.add_argument("--sweep", dest="axis", choices=("nodes", "packets"), default="nodes")
    sweep.add_argument("--values", metavar="LIST", help="comma-separated ascending axis values")
    sweep.add_argument("--variants", metavar="LIST", help="comma-separated variants")
    sweep.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")

    plot = sub.add_parser("plot", help="render figures from a sweep directory")
    plot.add_argument("sweep_dir", help="directory holding the metric tables")
    plot.add_argument("--out", metavar="DIR", help="where to write figures (default: sweep_dir)")
    plot.add_argument("--format", default="png", help="image format (default: png)")
    return parser


def _normalise_argv(argv: Sequence[str]) -> list[str]:
    """Allow ``wtmrd --sweep nodes ...`` and bare ``wtmrd --nodes 50`` forms."""
    args = list(argv)
    if args and (args[0] in COMMANDS or args[0] in ("-h", "--help")):
        return args
    return (["sweep"] if any(a == "--sweep" or a.startswith("--sweep=") for a in args) else ["run"]) + args


def resolve_config(ns: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(ns.config) if ns.config else ScenarioConfig()
    changes = {}
    for flag, name in (("seed", "seed"), ("nodes", "nodes"), ("packets", "packets"),
                       ("malicious", "malicious_fraction"), ("trust_mode", "trust_mode"),
                       ("paths", "paths"), ("runs", "runs"), ("sim_time", "sim_time")):
        value = getattr(ns, flag)
        if value is not None:
            changes[name] = value
    if ns.attack is not None:
        try:
            changes["attack"] = AttackSpec.parse(ns.attack)
        except ValueError as exc:
            raise ConfigurationError(f"attack: {exc}") from None
    if ns.variant is not None:
        changes["variant"] = ns.variant.lower()
    return cfg.replace(**changes).validate()


def _parse_list(text: str | None, default: Sequence, convert, what: str) -> tuple:
    if text is None:
        return tuple(convert(x) for x in default)
    try:
        return tuple(convert(x.strip()) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigurationError(f"{what}: {exc}") from None


def _summary(report: MetricsReport) -> str:
    return (f"ADR {report.adr_percent:.2f}%  DSL {report.dsl_percent:.2f}%  "
            f"delay {report.delay_ms:.3f} ms  ADT {report.adt_ms:.4f} ms")


def cmd_run(ns: argparse.Namespace) -> int:
    cfg = resolve_config(ns)
    out = Path(ns.out)
    for r in range(cfg.runs):
        run_cfg = cfg.replace(seed=cfg.seed + r, runs=1)
        result = run_scenario(run_cfg)
        target = out if cfg.runs == 1 else out / f"run-{r + 1:03d}"
        result.write(target)
        print(f"seed {run_cfg.seed}: {_summary(result.report)} -> {target}")
    return EXIT_OK


def cmd_sweep(ns: argparse.Namespace) -> int:
    cfg = resolve_config(ns)
    values = _parse_list(ns.values, DEFAULT_VALUES[ns.axis], int, "values")
    variants = _parse_list(ns.variants, DEFAULT_VARIANTS, Variant.parse, "variants")
    spec = SweepSpec(ns.axis, values, variants, Path(ns.out), cfg.runs).validate()
    total = len(values) * len(variants) * cfg.runs
    done = 0

    def progress(row: dict) -> None:
        nonlocal done
        done += 1
        log.info("[%d/%d] %s=%s %s run %d: ADR %.1f DSL %.1f", done, total, row["axis"], row["value"],
                 row["variant"], row["run"], row["adr_percent"], row["dsl_percent"])

    run_sweep(spec, cfg, jobs=ns.jobs, progress=progress)
    print(f"{total} runs; tables written to {spec.out_dir}")
    return EXIT_OK


def cmd_plot(ns: argparse.Namespace) -> int:
    from .plot import render

    try:
        made = render(ns.sweep_dir, ns.out, ns.format)
    except ModuleNotFoundError:
        raise ConfigurationError("plot: matplotlib is not installed (pip install wtmrd[plot])") from None
    if not made:
        raise ConfigurationError(f"plot: no metric tables in {ns.sweep_dir}")
    for path in made:
        print(path)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(_normalise_argv(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "plot": cmd_plot}[ns.command]
    try:
        return handler(ns)
    except ConfigurationError as exc:
        print(f"wtmrd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures map to a distinct exit status
        print(f"wtmrd: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
