"""Discrete-event core: event queue, random-waypoint mobility, unit-disk topology.

Simulated time is an integer number of milliseconds throughout.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from . import kernels


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulated time."""


class ConfigurationError(ValueError):
    """Invalid scenario or engine configuration."""


class EventKind(IntEnum):
    MOBILITY_TICK = 0
    PACKET_ARRIVAL = 1
    PACKET_SEND = 2
    HANDSHAKE_TIMEOUT = 3
    TRUST_EPOCH = 4
    DISCOVERY_TIMEOUT = 5
    SIM_END = 6


class SimEvent(NamedTuple):
    time: int
    sequence: int
    kind: EventKind
    payload: Any = None


class EventQueue:
    """Min-heap of events ordered by ``(time, sequence)``.

    Events past ``end_time`` are accepted but never delivered; they model
    transmissions still in the air when the run stops.
    """

    def __init__(self, end_time: int | None = None) -> None:
        self.end_time = end_time
        self.now = 0
        self._heap: list[SimEvent] = []
        self._seq = 0
        self._last: tuple[int, int] = (-1, -1)

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: int, kind: EventKind, payload: Any = None) -> SimEvent | None:
        if time < self.now:
            raise SchedulingError(f"event {kind.name} at t={time} ms is before now={self.now} ms")
        if self.end_time is not None and time > self.end_time:
            return None
        ev = SimEvent(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> SimEvent | None:
        """Next event, or ``None`` at end of simulation."""
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)
        key = (ev.time, ev.sequence)
        if key <= self._last:
            raise SchedulingError(f"event order violated: {key} after {self._last}")
        self._last = key
        self.now = ev.time
        return ev


class RoleKind(str, Enum):
    HONEST = "honest"
    BLACKHOLE = "blackhole"
    GRAYHOLE = "grayhole"


@dataclass(frozen=True, slots=True)
class Role:
    kind: RoleKind = RoleKind.HONEST
    drop_probability: float = 0.0
    # control-silent attackers ignore trust probes
    control_silent: bool = False

    def __post_init__(self) -> None:
        if self.kind is RoleKind.GRAYHOLE and not 0.0 < self.drop_probability < 1.0:
            raise ConfigurationError("grayhole drop probability must lie in (0, 1)")

    @property
    def malicious(self) -> bool:
        return self.kind is not RoleKind.HONEST

    @property
    def answers_probes(self) -> bool:
        return not (self.kind is RoleKind.BLACKHOLE and self.control_silent)


HONEST = Role()


@dataclass(slots=True)
class PacketCounters:
    """Per-node data-packet tallies for the current trust window.

    ``broken`` counts relay packets lost to a vanished next hop; those are
    route-break losses and are not charged to the node's drop rate.
    """

    received: int = 0
    forwarded: int = 0
    dropped: int = 0
    originated: int = 0
    consumed: int = 0
    broken: int = 0

    @property
    def relayed(self) -> int:
        return self.received - self.consumed

    def reset(self) -> None:
        self.received = self.forwarded = self.dropped = 0
        self.originated = self.consumed = self.broken = 0

    def balanced(self, queued: int = 0) -> bool:
        return self.forwarded + self.dropped + self.consumed + self.broken + queued == self.received


@dataclass(slots=True)
class NodeState:
    id: int
    x: float
    y: float
    speed: float = 0.0
    wx: float = 0.0
    wy: float = 0.0
    role: Role = HONEST
    counters: PacketCounters = field(default_factory=PacketCounters)

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def waypoint(self) -> tuple[float, float]:
        return (self.wx, self.wy)


class Fleet:
    """Struct-of-arrays mobility state for all nodes (random waypoint)."""

    def __init__(self, n: int, arena: float, max_speed: float, rng: np.random.Generator,
                 pause_s: float = 0.0) -> None:
        if n < 0:
            raise ConfigurationError("node count must be non-negative")
        self.n = n
        self.arena = float(arena)
        self.max_speed = float(max_speed)
        self.pause_s = float(pause_s)
        self.rng = rng
        start = rng.uniform(0.0, self.arena, size=(n, 2))
        self.x = np.ascontiguousarray(start[:, 0])
        self.y = np.ascontiguousarray(start[:, 1])
        self.wx = self.x.copy()
        self.wy = self.y.copy()
        self.speed = np.zeros(n)
        self.pause_left = np.zeros(n)
        # every node starts "at" its waypoint so the first step draws a target
        self._redraw(np.arange(n))

    @classmethod
    def static(cls, xs: Sequence[float], ys: Sequence[float], arena: float = 1200.0) -> "Fleet":
        fleet = cls.__new__(cls)
        fleet.n = len(xs)
        fleet.arena = float(arena)
        fleet.max_speed = 0.0
        fleet.pause_s = 0.0
        fleet.rng = np.random.default_rng(0)
        fleet.x = np.asarray(xs, dtype=np.float64).copy()
        fleet.y = np.asarray(ys, dtype=np.float64).copy()
        fleet.wx = fleet.x.copy()
        fleet.wy = fleet.y.copy()
        fleet.speed = np.zeros(fleet.n)
        fleet.pause_left = np.zeros(fleet.n)
        return fleet

    def _redraw(self, idx: np.ndarray) -> None:
        if idx.size == 0:
            return
        draw = self.rng.uniform(0.0, 1.0, size=(idx.size, 3))
        self.wx[idx] = draw[:, 0] * self.arena
        self.wy[idx] = draw[:, 1] * self.arena
        self.speed[idx] = draw[:, 2] * self.max_speed

    def step(self, dt: float) -> None:
        if self.max_speed == 0.0 or self.n == 0:
            return
        at_goal = (self.x == self.wx) & (self.y == self.wy)
        if self.pause_s > 0.0:
            waiting = at_goal & (self.pause_left > 0.0)
            self.pause_left[waiting] = np.maximum(self.pause_left[waiting] - dt, 0.0)
            at_goal &= ~waiting
        self._redraw(np.flatnonzero(at_goal))
        arrived = kernels.move_toward(self.x, self.y, self.wx, self.wy, self.speed, dt)
        if self.pause_s > 0.0:
            self.pause_left[arrived] = self.pause_s
        np.clip(self.x, 0.0, self.arena, out=self.x)
        np.clip(self.y, 0.0, self.arena, out=self.y)

    def state(self, i: int) -> NodeState:
        return NodeState(i, float(self.x[i]), float(self.y[i]), float(self.speed[i]),
                         float(self.wx[i]), float(self.wy[i]))


def advance_mobility(state: NodeState, dt: float, rng: np.random.Generator,
                     arena: float = 1200.0, max_speed: float = 20.0) -> NodeState:
    """Single-node random-waypoint step with zero pause time."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, y = np.array([state.x]), np.array([state.y])
    wx, wy, speed = np.array([state.wx]), np.array([state.wy]), np.array([state.speed])
    if x[0] == wx[0] and y[0] == wy[0]:
        draw = rng.uniform(0.0, 1.0, size=3)
        wx[0], wy[0], speed[0] = draw[0] * arena, draw[1] * arena, draw[2] * max_speed
    kernels.move_toward(x, y, wx, wy, speed, dt)
    return NodeState(state.id, float(min(max(x[0], 0.0), arena)), float(min(max(y[0], 0.0), arena)),
                     float(speed[0]), float(wx[0]), float(wy[0]), state.role, state.counters)


def neighbors(node_id: int, nodes: Sequence[NodeState], radio_range: float) -> set[int]:
    """Ids of nodes other than ``node_id`` within ``radio_range`` metres."""
    if radio_range <= 0:
        raise ConfigurationError("radio range must be positive")
    me = next((s for s in nodes if s.id == node_id), None)
    if me is None:
        raise ConfigurationError(f"unknown node id {node_id}")
    r2 = radio_range * radio_range
    return {s.id for s in nodes
            if s.id != node_id and (s.x - me.x) ** 2 + (s.y - me.y) ** 2 <= r2}


class Topology:
    """Neighbour lists for one mobility tick, kept both as lists and as CSR."""

    def __init__(self, indptr: np.ndarray, indices: np.ndarray) -> None:
        n = indptr.shape[0] - 1
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        flat = self.indices.tolist()
        bounds = self.indptr.tolist()
        self.lists: list[list[int]] = [flat[bounds[i]:bounds[i + 1]] for i in range(n)]
        self._sets: list[set[int] | None] = [None] * n

    @classmethod
    def from_fleet(cls, fleet: Fleet, radio_range: float) -> "Topology":
        return cls(*kernels.neighbor_csr(fleet.x, fleet.y, float(radio_range)))

    @classmethod
    def from_adjacency(cls, adjacency: Sequence[Sequence[int]]) -> "Topology":
        rows = [sorted(set(a)) for a in adjacency]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum([len(r) for r in rows], out=indptr[1:])
        flat = [v for r in rows for v in r]
        return cls(indptr, np.array(flat, dtype=np.int32))

    def __len__(self) -> int:
        return len(self.lists)

    def row(self, a: int) -> np.ndarray:
        return self.indices[self.indptr[a]:self.indptr[a + 1]]

    def linked(self, a: int, b: int) -> bool:
        s = self._sets[a]
        if s is None:
            s = self._sets[a] = set(self.lists[a])
        return b in s


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators per subsystem, spawned in a fixed order."""
    names = ("mobility", "roles", "traffic", "attack")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


class Medium:
    """Shared broadcast channel with a per-node FIFO transmitter.

    Each transmission occupies its sender for ``hop_latency`` ms; a frame is
    delivered to the receivers still in range when it lands. ``eligible`` is a
    uint8 array (1 = normal-labelled) that callers update in place.
    """

    def __init__(self, queue: EventQueue, n: int, hop_latency: int,
                 topology: Callable[[], Topology], eligible: Sequence[bool] | None = None) -> None:
        self.queue = queue
        self.hop_latency = int(hop_latency)
        self.busy_until = [0] * n
        self._topology = topology
        self.eligible = (np.ones(n, dtype=np.uint8) if eligible is None
                         else np.array(eligible, dtype=np.uint8))
        self.transmissions = 0
        self.lost_in_air = 0

    @property
    def topology(self) -> Topology:
        return self._topology()

    def transmit(self, sender: int, receivers: Sequence[int] | np.ndarray, message: Any) -> int:
        """Queue ``message`` at ``sender``; returns the arrival time.

        The arrival payload is ``(message, sender, receivers, topology)``.
        """
        eligible = self.eligible
        if isinstance(receivers, np.ndarray):
            if not eligible[receivers].all():
                bad = receivers[eligible[receivers] == 0][0]
                raise AssertionError(f"node {sender} handed a frame to malicious-labelled node {bad}")
        else:
            for r in receivers:
                if not eligible[r]:
                    raise AssertionError(f"node {sender} handed a frame to malicious-labelled node {r}")
            receivers = tuple(receivers)
        start = max(self.queue.now, self.busy_until[sender])
        arrival = start + self.hop_latency
        self.busy_until[sender] = arrival
        self.transmissions += 1
        self.queue.schedule(arrival, EventKind.PACKET_ARRIVAL,
                            (message, sender, receivers, self.topology))
        return arrival

    def landed(self, sender: int, receivers, sent_on: Topology | None = None):
        """Receivers still within range of ``sender`` now.

        When the topology has not changed since ``sent_on`` everyone landed.
        """
        topo = self.topology
        if sent_on is topo:
            return receivers
        got = [r for r in receivers if topo.linked(sender, r)]
        self.lost_in_air += len(receivers) - len(got)
        return np.array(got, dtype=np.int32) if isinstance(receivers, np.ndarray) else got
