"""Multipath on-demand route discovery restricted to normal-labelled nodes.

RREQs flood over eligible nodes only; each intermediate node re-forwards at
most ``duplicate_limit`` copies of a request, each from a different previous
hop, and the destination answers once per distinct previous hop. Replies are
source-routed back along their recorded path, installing forward entries on
the way. The source keeps a greedy shortest-first set of node-disjoint paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .engine import EventKind, EventQueue, Medium, PacketCounters, Role, Topology
from .workload import attacker_action


class RouteRequest(NamedTuple):
    source: int
    destination: int
    request_id: tuple[int, int]
    hop_count: int
    path_trace: tuple[int, ...]


class RouteReply(NamedTuple):
    request_id: tuple[int, int]
    path: tuple[int, ...]
    hop_count: int
    path_id: int = 0


@dataclass(frozen=True, slots=True)
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    sequence: int
    path_id: int


class RouteTable:
    def __init__(self) -> None:
        self._entries: dict[tuple[int, int], RouteEntry] = {}

    def install(self, entry: RouteEntry) -> None:
        self._entries[(entry.destination, entry.path_id)] = entry

    def lookup(self, destination: int, path_id: int) -> RouteEntry | None:
        return self._entries.get((destination, path_id))

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class PathSet:
    source: int
    destination: int
    paths: tuple[tuple[int, ...], ...] = ()
    path_ids: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.paths)


class Action(str, Enum):
    FORWARD = "forward"
    REPLY = "reply"
    CONSUME = "consume"
    DISCARD = "discard"
    DROP = "drop"


class DiscoveryRefused(RuntimeError):
    """Source or destination is labelled malicious."""


def interior(path: Sequence[int]) -> frozenset[int]:
    return frozenset(path[1:-1])


def node_disjoint(a: Sequence[int], b: Sequence[int]) -> bool:
    return tuple(a) != tuple(b) and not (interior(a) & interior(b))


def select_paths(candidates: Sequence[RouteReply], k: int = 3,
                 eligible: Sequence[bool] | None = None) -> PathSet:
    """Greedy shortest-first node-disjoint selection, ties broken by arrival order."""
    if not candidates:
        return PathSet(-1, -1)
    if k < 1:
        raise ValueError("path budget must be at least 1")
    first = candidates[0]
    src, dst = first.path[0], first.path[-1]
    for c in candidates:
        if c.request_id != first.request_id or c.path[0] != src or c.path[-1] != dst:
            raise ValueError("candidates must share source, destination and request id")
    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].hop_count, i))
    taken: list[RouteReply] = []
    used: set[int] = set()
    for i in order:
        c = candidates[i]
        if eligible is not None and not all(eligible[v] for v in c.path):
            continue
        inner = interior(c.path)
        if inner & used or any(t.path == c.path for t in taken):
            continue
        taken.append(c)
        used |= inner
        if len(taken) == k:
            break
    return PathSet(src, dst, tuple(t.path for t in taken), tuple(t.path_id for t in taken))


@dataclass
class Discovery:
    request_id: tuple[int, int]
    source: int
    destination: int
    started: int
    replies: list[RouteReply] = field(default_factory=list)
    closed: bool = False
    rreq_deliveries: int = 0
    admissions: int = 0


class Router:
    """Per-node route tables plus RREQ/RREP handlers for every node."""

    def __init__(self, medium: Medium, duplicate_limit: int = 3,
                 on_reply: Callable[[Discovery, RouteReply], None] | None = None,
                 transcript: list | None = None, track_reach: bool = False) -> None:
        n = len(medium.busy_until)
        self.medium = medium
        self.duplicate_limit = duplicate_limit
        self.tables = [RouteTable() for _ in range(n)]
        self.discoveries: dict[tuple[int, int], Discovery] = {}
        self.on_reply = on_reply
        self.transcript = transcript
        self.reached: dict[tuple[int, int], set[int]] | None = {} if track_reach else None
        self.discards = 0
        self.rrep_drops = 0
        self._counts: dict[tuple[int, int], np.ndarray] = {}
        self._prevs: dict[tuple[int, int], np.ndarray] = {}
        self._replied: dict[tuple[int, int], set[int]] = {}
        self._seq = [0] * n
        self._next_path_id = 0

    def _path_id(self) -> int:
        self._next_path_id += 1
        return self._next_path_id

    def _log(self, kind: str, msg, sender: int, n_receivers: int) -> None:
        if self.transcript is not None:
            path = msg.path_trace if kind == "RREQ" else msg.path
            self.transcript.append((self.medium.queue.now, kind, msg.request_id[0], msg.request_id[1],
                                    sender, n_receivers, msg.hop_count, "-".join(map(str, path))))

    def _broadcast(self, node: int, rreq: RouteRequest, trace: np.ndarray,
                   disc: Discovery | None) -> None:
        receivers = kernels.rreq_targets(self.medium.topology.row(node), self.medium.eligible, trace)
        if receivers.shape[0]:
            if disc is not None:
                disc.rreq_deliveries += receivers.shape[0]
            self._log("RREQ", rreq, node, receivers.shape[0])
            self.medium.transmit(node, receivers, rreq)

    def originate_rreq(self, source: int, destination: int) -> Discovery:
        eligible = self.medium.eligible
        if not (eligible[source] and eligible[destination]):
            raise DiscoveryRefused(f"flow {source}->{destination} touches a malicious-labelled endpoint")
        self._seq[source] += 1
        rid = (source, self._seq[source])
        disc = Discovery(rid, source, destination, self.medium.queue.now)
        self.discoveries[rid] = disc
        rreq = RouteRequest(source, destination, rid, 0, (source,))
        self._broadcast(source, rreq, np.array([source], dtype=np.int32), disc)
        return disc

    def deliver(self, message, sender: int, receivers, sent_on: Topology | None = None) -> None:
        """Dispatch a landed control frame to its receivers."""
        landed = self.medium.landed(sender, receivers, sent_on)
        if isinstance(message, RouteRequest):
            self._admit(np.asarray(landed, dtype=np.int32), message)
        else:
            for r in landed:
                self.handle_rrep(r, message)

    def handle_rreq(self, node: int, rreq: RouteRequest) -> Action:
        """Process one reception of ``rreq`` at ``node``."""
        return self._admit(np.array([node], dtype=np.int32), rreq)[0]

    def _admit(self, receivers: np.ndarray, rreq: RouteRequest) -> list[Action]:
        rid = rreq.request_id
        if self.reached is not None:
            self.reached.setdefault(rid, set()).update(receivers.tolist())
        counts = self._counts.get(rid)
        if counts is None:
            n = len(self.tables)
            counts = self._counts[rid] = np.zeros(n, dtype=np.int8)
            self._prevs[rid] = np.full((n, self.duplicate_limit), -1, dtype=np.int32)
        trace = rreq.path_trace
        trace_arr = np.array(trace, dtype=np.int32)
        admitted, discards = kernels.rreq_admit(receivers, trace_arr, rreq.destination,
                                                self.medium.eligible, counts, self._prevs[rid],
                                                self.duplicate_limit)
        self.discards += discards
        actions = [Action.DISCARD] * discards
        prev = trace[-1]
        disc = self.discoveries.get(rid)
        for node in admitted.tolist():
            if node == rreq.destination:
                replied = self._replied.setdefault(rid, set())
                if prev in replied:
                    self.discards += 1
                    actions.append(Action.DISCARD)
                    continue
                replied.add(prev)
                self.tables[node].install(RouteEntry(rreq.source, prev, len(trace), rid[1],
                                                     self._path_id()))
                path = trace + (node,)
                rrep = RouteReply(rid, path, len(path) - 1, self._path_id())
                self._log("RREP", rrep, node, 1)
                self.medium.transmit(node, (prev,), rrep)
                actions.append(Action.REPLY)
                continue
            if disc is not None:
                disc.admissions += 1
            self.tables[node].install(RouteEntry(rreq.source, prev, len(trace), rid[1], self._path_id()))
            fwd = RouteRequest(rreq.source, rreq.destination, rid, rreq.hop_count + 1, trace + (node,))
            self._broadcast(node, fwd, np.append(trace_arr, np.int32(node)), disc)
            actions.append(Action.FORWARD)
        return actions

    def handle_rrep(self, node: int, rrep: RouteReply) -> Action:
        path = rrep.path
        try:
            idx = path.index(node)
        except ValueError:
            self.rrep_drops += 1
            return Action.DROP
        if idx == len(path) - 1:
            self.rrep_drops += 1
            return Action.DROP
        topo = self.medium.topology
        succ = path[idx + 1]
        if not topo.linked(node, succ):
            self.rrep_drops += 1
            return Action.DROP
        self.tables[node].install(RouteEntry(path[-1], succ, len(path) - 1 - idx,
                                             rrep.request_id[1], rrep.path_id))
        if idx == 0:
            disc = self.discoveries.get(rrep.request_id)
            if disc is None or disc.closed:
                return Action.DISCARD
            disc.replies.append(rrep)
            if self.on_reply is not None:
                self.on_reply(disc, rrep)
            return Action.CONSUME
        pred = path[idx - 1]
        if not topo.linked(node, pred) or not self.medium.eligible[pred]:
            self.rrep_drops += 1
            return Action.DROP
        self._log("RREP", rrep, node, 1)
        self.medium.transmit(node, (pred,), rrep)
        return Action.FORWARD


@dataclass(slots=True)
class DataPacket:
    flow: int
    seq: int
    source: int
    destination: int
    path_id: int
    hops: int
    origin_time: int


def assign_path(seq: int, n_paths: int) -> int:
    """Round-robin path index for a 1-based packet sequence number."""
    return (seq - 1) % n_paths


class DataPlane:
    """Hop-by-hop data forwarding along installed (destination, path id) entries.

    ``on_event(kind, node, packet)`` is told about every terminal outcome:
    ``deliver``, ``drop`` (behavioural), and ``break`` (next hop unreachable).
    """

    def __init__(self, router: Router, counters: Sequence[PacketCounters], roles: Sequence[Role],
                 attack_rng: np.random.Generator,
                 on_event: Callable[[str, int, DataPacket], None]) -> None:
        self.router = router
        self.counters = counters
        self.roles = roles
        self.rng = attack_rng
        self.on_event = on_event

    def _next(self, node: int, packet: DataPacket) -> int | None:
        entry = self.router.tables[node].lookup(packet.destination, packet.path_id)
        if entry is None:
            return None
        nh = entry.next_hop
        medium = self.router.medium
        if not medium.eligible[nh] or not medium.topology.linked(node, nh):
            return None
        return nh

    def send(self, packet: DataPacket) -> bool:
        """Originate ``packet`` at its source; False on an immediate route break."""
        src = packet.source
        self.counters[src].originated += 1
        nh = self._next(src, packet)
        if nh is None:
            self.on_event("break", src, packet)
            return False
        self.router.medium.transmit(src, (nh,), packet)
        return True

    def arrive(self, packet: DataPacket, sender: int, receivers: Sequence[int],
               sent_on: Topology | None = None) -> None:
        landed = self.router.medium.landed(sender, receivers, sent_on)
        if not landed:
            self.on_event("break", sender, packet)
            return
        self.receive(landed[0], packet)

    def receive(self, node: int, packet: DataPacket) -> Action:
        c = self.counters[node]
        c.received += 1
        if node == packet.destination:
            c.consumed += 1
            self.on_event("deliver", node, packet)
            return Action.CONSUME
        if attacker_action(self.roles[node], self.rng) == "drop":
            c.dropped += 1
            self.on_event("drop", node, packet)
            return Action.DROP
        nh = self._next(node, packet)
        if nh is None:
            c.broken += 1
            self.on_event("break", node, packet)
            return Action.DROP
        c.forwarded += 1
        self.router.medium.transmit(node, (nh,), packet)
        return Action.FORWARD


def run_discovery(adjacency: Sequence[Sequence[int]], source: int, destination: int,
                  eligible: Sequence[bool] | None = None, duplicate_limit: int = 3,
                  hop_latency: int = 2, k: int = 3, track_reach: bool = True,
                  transcript: list | None = None) -> tuple[Discovery, Router, PathSet]:
    """Run one discovery to quiescence on a fixed topology."""
    n = len(adjacency)
    topo = Topology.from_adjacency(adjacency)
    queue = EventQueue()
    flags = [True] * n if eligible is None else [bool(e) for e in eligible]
    medium = Medium(queue, n, hop_latency, lambda: topo, flags)
    router = Router(medium, duplicate_limit, transcript=transcript, track_reach=track_reach)
    disc = router.originate_rreq(source, destination)
    while (ev := queue.pop()) is not None:
        if ev.kind is EventKind.PACKET_ARRIVAL:
            router.deliver(*ev.payload)
    disc.closed = True
    return disc, router, select_paths(disc.replies, k, flags)


def reachable(adjacency: Sequence[Sequence[int]], source: int,
              eligible: Iterable[bool] | None = None) -> set[int]:
    """Breadth-first set of eligible nodes connected to ``source`` (excluding it)."""
    flags = list(eligible) if eligible is not None else [True] * len(adjacency)
    seen = {source}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adjacency[u]:
                if flags[v] and v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    seen.discard(source)
    return seen
