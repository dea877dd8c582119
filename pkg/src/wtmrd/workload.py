"""Scenario configuration, CBR traffic, and attacker behaviour."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .engine import HONEST, ConfigurationError, EventKind, EventQueue, Role, RoleKind


@dataclass(frozen=True)
class FlowSpec:
    source: int
    destination: int
    rate: float = 4.0
    packet_size: int = 512
    start: float = 0.0
    end: float = 250.0

    def validate(self, sim_time: float) -> None:
        if self.source == self.destination:
            raise ConfigurationError("flow source and destination must differ")
        if self.rate <= 0:
            raise ConfigurationError("flow rate must be positive")
        if not self.start < self.end <= sim_time:
            raise ConfigurationError(f"flow window [{self.start}, {self.end}) must end by {sim_time}")


@dataclass(frozen=True)
class AttackSpec:
    kind: RoleKind = RoleKind.BLACKHOLE
    drop_probability: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "AttackSpec":
        name, _, arg = str(text).strip().lower().partition(":")
        if name == "blackhole" and not arg:
            return cls(RoleKind.BLACKHOLE, 1.0)
        if name == "grayhole":
            try:
                p = float(arg) if arg else 0.5
            except ValueError:
                raise ConfigurationError(f"bad grayhole probability in {text!r}") from None
            if not 0.0 < p < 1.0:
                raise ConfigurationError("grayhole probability must lie in (0, 1)")
            return cls(RoleKind.GRAYHOLE, p)
        raise ConfigurationError(f"unknown attack {text!r}; expected blackhole or grayhole:p")

    def __str__(self) -> str:
        return "blackhole" if self.kind is RoleKind.BLACKHOLE else f"grayhole:{self.drop_probability:g}"


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: int = 100
    arena: float = 1200.0
    max_speed: float = 20.0
    sim_time: float = 250.0
    pause: float = 0.0
    radio_range: float = 250.0
    seed: int = 1
    runs: int = 1
    malicious_fraction: float = 0.2
    attack: AttackSpec = field(default_factory=AttackSpec)
    control: str = "responsive"
    trust_mode: str = "corrected"
    epoch: float = 10.0
    handshake_timeout_ms: int = 100
    bins: int = 4
    warmup_fraction: float = 0.2
    paths: int = 3
    duplicate_limit: int = 3
    hop_latency_ms: int = 2
    discovery_timeout_ms: int = 100
    reply_collect_ms: int = 20
    variant: str = "wtmrd"
    flow_count: int = 5
    rate: float = 4.0
    packet_size: int = 512
    packets: int | None = None
    flows: tuple[FlowSpec, ...] | None = None

    @property
    def sim_ms(self) -> int:
        return int(round(self.sim_time * 1000))

    @property
    def warmup_ms(self) -> int:
        return int(round(self.sim_time * self.warmup_fraction * 1000))

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "ScenarioConfig":
        checks = [
            ("nodes", self.nodes >= 2, "need at least two nodes"),
            ("arena", self.arena > 0, "arena side must be positive"),
            ("max_speed", self.max_speed >= 0, "max speed must be non-negative"),
            ("sim_time", self.sim_time > 0, "simulation time must be positive"),
            ("pause", self.pause >= 0, "pause time must be non-negative"),
            ("radio_range", self.radio_range > 0, "radio range must be positive"),
            ("seed", 0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer"),
            ("runs", self.runs >= 1, "runs must be at least 1"),
            ("malicious_fraction", 0.0 <= self.malicious_fraction < 0.5,
             "malicious fraction must lie in [0, 0.5)"),
            ("control", self.control in ("silent", "responsive"), "control must be silent or responsive"),
            ("trust_mode", self.trust_mode in ("faithful", "corrected"),
             "trust mode must be faithful or corrected"),
            ("epoch", self.epoch > 0, "epoch length must be positive"),
            ("handshake_timeout_ms", self.handshake_timeout_ms > 0, "handshake timeout must be positive"),
            ("bins", self.bins >= 2, "bins must be at least 2"),
            ("warmup_fraction", 0.0 <= self.warmup_fraction < 1.0, "warm-up fraction must lie in [0, 1)"),
            ("paths", self.paths >= 1, "path budget must be at least 1"),
            ("duplicate_limit", self.duplicate_limit >= 1, "duplicate limit must be at least 1"),
            ("hop_latency_ms", self.hop_latency_ms >= 1, "hop latency must be at least 1 ms"),
            ("discovery_timeout_ms", self.discovery_timeout_ms >= 1, "discovery timeout must be positive"),
            ("reply_collect_ms", self.reply_collect_ms >= 0, "reply collection window must be non-negative"),
            ("flow_count", self.flow_count >= 0, "flow count must be non-negative"),
            ("rate", self.rate > 0, "rate must be positive"),
            ("packet_size", self.packet_size > 0, "packet size must be positive"),
            ("packets", self.packets is None or self.packets >= 1, "packets must be at least 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigurationError(f"{name}: {msg}")
        from .variants import Variant  # late import: variants imports this module

        try:
            Variant.parse(self.variant)
        except ValueError as exc:
            raise ConfigurationError(f"variant: {exc}") from None
        if self.packets is not None:
            span = self.packets / self.rate
            if self.warmup_ms / 1000 + span > self.sim_time + 1e-9:
                raise ConfigurationError("packets: designated flow does not fit after warm-up")
        malicious = round_half_up(self.nodes * self.malicious_fraction)
        endpoints = len({v for f in self.flows for v in (f.source, f.destination)}) if self.flows else 2
        if self.nodes - malicious < endpoints:
            raise ConfigurationError("malicious_fraction: not enough honest nodes for the flow endpoints")
        for f in self.flows or ():
            if not (0 <= f.source < self.nodes and 0 <= f.destination < self.nodes):
                raise ConfigurationError("flows: endpoint outside node range")
            f.validate(self.sim_time)
        return self

    def echo(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, AttackSpec):
                v = str(v)
            elif f.name == "flows" and v is not None:
                v = [dataclasses.asdict(x) for x in v]
            out[f.name] = v
        return out


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


# (section, key) in the YAML file -> ScenarioConfig field
CONFIG_KEYS: dict[tuple[str, str], str] = {
    ("scenario", "nodes"): "nodes",
    ("scenario", "arena"): "arena",
    ("scenario", "max_speed"): "max_speed",
    ("scenario", "sim_time"): "sim_time",
    ("scenario", "pause"): "pause",
    ("scenario", "radio_range"): "radio_range",
    ("scenario", "seed"): "seed",
    ("scenario", "runs"): "runs",
    ("attack", "malicious_fraction"): "malicious_fraction",
    ("attack", "kind"): "attack",
    ("attack", "control"): "control",
    ("trust", "mode"): "trust_mode",
    ("trust", "epoch"): "epoch",
    ("trust", "handshake_timeout_ms"): "handshake_timeout_ms",
    ("winnow", "bins"): "bins",
    ("winnow", "warmup_fraction"): "warmup_fraction",
    ("routing", "paths"): "paths",
    ("routing", "duplicate_limit"): "duplicate_limit",
    ("routing", "hop_latency_ms"): "hop_latency_ms",
    ("routing", "discovery_timeout_ms"): "discovery_timeout_ms",
    ("routing", "reply_collect_ms"): "reply_collect_ms",
    ("routing", "variant"): "variant",
    ("traffic", "flow_count"): "flow_count",
    ("traffic", "rate"): "rate",
    ("traffic", "packet_size"): "packet_size",
    ("traffic", "packets"): "packets",
    ("traffic", "flows"): "flows",
}
FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


class ConfigFileError(ConfigurationError):
    def __init__(self, path: str, line: int | None, message: str) -> None:
        self.path, self.line = path, line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


def _coerce(name: str, value: Any) -> Any:
    if name == "attack":
        return AttackSpec.parse(value)
    if name == "flows":
        if value is None:
            return None
        if not isinstance(value, list):
            raise ConfigurationError("flows must be a list of mappings")
        return tuple(FlowSpec(**{k: v for k, v in item.items()}) for item in value)
    if name == "packets":
        return None if value in (None, 0) else int(value)
    kind = FIELD_TYPES[name]
    if kind == "int":
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigurationError(f"{name} must be an integer")
        return int(value)
    if kind == "float":
        if isinstance(value, bool):
            raise ConfigurationError(f"{name} must be a number")
        return float(value)
    return str(value).lower()


def load_config(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a YAML scenario file; every error names the offending line."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigFileError(path, None, f"cannot read: {exc.strerror}") from None
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigFileError(path, mark.line + 1 if mark else None, f"YAML syntax: {exc}") from None
    if root is None:
        return (base or ScenarioConfig()).validate()
    if not isinstance(root, yaml.MappingNode):
        raise ConfigFileError(path, root.start_mark.line + 1, "top level must be a mapping of sections")
    data = yaml.safe_load(text)
    lines: dict[str, int] = {}
    changes: dict[str, Any] = {}
    for sec_key, sec_val in root.value:
        section = sec_key.value
        if not isinstance(sec_val, yaml.MappingNode):
            raise ConfigFileError(path, sec_key.start_mark.line + 1, f"section {section!r} must be a mapping")
        for key_node, _ in sec_val.value:
            key = key_node.value
            line = key_node.start_mark.line + 1
            name = CONFIG_KEYS.get((section, key))
            if name is None:
                raise ConfigFileError(path, line, f"unknown key {section}.{key}")
            lines[name] = line
            try:
                changes[name] = _coerce(name, data[section][key])
            except (ConfigurationError, TypeError, ValueError) as exc:
                raise ConfigFileError(path, line, f"{section}.{key}: {exc}") from None
    cfg = (base or ScenarioConfig()).replace(**changes)
    try:
        return cfg.validate()
    except ConfigurationError as exc:
        name = str(exc).split(":", 1)[0]
        raise ConfigFileError(path, lines.get(name), str(exc)) from None


def default_flows(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[FlowSpec, ...]:
    """Random endpoint pairs; flow 0 is the designated flow for packet-count sweeps.

    Small networks reuse endpoints so that every one of them can stay honest.
    """
    honest = cfg.nodes - round_half_up(cfg.nodes * cfg.malicious_fraction)
    pool = None
    if 2 * cfg.flow_count > honest:
        pool = rng.choice(cfg.nodes, size=honest, replace=False)
    flows = []
    for i in range(cfg.flow_count):
        if pool is None:
            src, dst = (int(v) for v in rng.choice(cfg.nodes, size=2, replace=False))
        else:
            src, dst = (int(v) for v in rng.choice(pool, size=2, replace=False))
        start, end = 0.0, cfg.sim_time
        if i == 0 and cfg.packets is not None:
            start = cfg.warmup_ms / 1000
            end = start + cfg.packets / cfg.rate
        flows.append(FlowSpec(src, dst, cfg.rate, cfg.packet_size, start, end))
    return tuple(flows)


def assign_roles(node_count: int, malicious_fraction: float, rng: np.random.Generator,
                 attack: AttackSpec = AttackSpec(), control_silent: bool = False,
                 protected: Sequence[int] = ()) -> list[Role]:
    """Exactly round(n * fraction) attackers drawn without replacement from unprotected nodes."""
    if not 0.0 <= malicious_fraction < 0.5:
        raise ConfigurationError("malicious fraction must lie in [0, 0.5)")
    m = round_half_up(node_count * malicious_fraction)
    shielded = set(protected)
    pool = np.array([i for i in range(node_count) if i not in shielded], dtype=np.int64)
    if m > pool.size:
        raise ConfigurationError("not enough unprotected nodes to place attackers")
    roles = [HONEST] * node_count
    if m == 0:
        return roles
    bad = Role(attack.kind, attack.drop_probability if attack.kind is RoleKind.GRAYHOLE else 0.0,
               control_silent)
    for i in np.sort(rng.choice(pool, size=m, replace=False)).tolist():
        roles[i] = bad
    return roles


def packet_schedule(flows: Sequence[FlowSpec]) -> list[tuple[int, int, int]]:
    """``(time_ms, flow_id, seq)`` for every CBR packet, sorted by time then flow."""
    out = []
    for fid, f in enumerate(flows):
        start_ms = f.start * 1000.0
        end_ms = f.end * 1000.0
        gap = 1000.0 / f.rate
        k = 0
        while True:
            t = start_ms + k * gap
            if t >= end_ms - 1e-9:
                break
            out.append((int(round(t)), fid, k + 1))
            k += 1
    out.sort()
    return out


def generate_traffic(flows: Sequence[FlowSpec], queue: EventQueue) -> int:
    """Schedule one PACKET_SEND per CBR packet; returns the number scheduled."""
    count = 0
    for t, fid, seq in packet_schedule(flows):
        if queue.schedule(t, EventKind.PACKET_SEND, (fid, seq)) is not None:
            count += 1
    return count


def attacker_action(role: Role, rng: np.random.Generator) -> str:
    """``"forward"`` or ``"drop"`` for a relayed data packet."""
    if role.kind is RoleKind.HONEST:
        return "forward"
    if role.kind is RoleKind.BLACKHOLE:
        return "drop"
    return "drop" if rng.random() < role.drop_probability else "forward"
