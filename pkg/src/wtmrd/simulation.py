"""One seeded run of the full mechanism: mobility, trust epochs, classification, routing, traffic."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .engine import (EventKind, EventQueue, Fleet, Medium, PacketCounters, Role, Topology,
                     seed_streams)
from .metrics import PACKET_COLUMNS, MetricsReport, aggregate, write_report_csv
from .routing import (DataPacket, DataPlane, Discovery, DiscoveryRefused, RouteReply, Router,
                      assign_path, select_paths)
from .trust import TrustMode, TrustRecord, trust_epoch, write_trust_csv
from .variants import Variant
from .winnow import Label, WinnowModel, featurize
from .workload import FlowSpec, ScenarioConfig, assign_roles, default_flows, generate_traffic

log = logging.getLogger(__name__)

TICK_MS = 1000
DISCOVERY_COLUMNS = ["time", "kind", "source", "requestSeq", "sender", "receivers", "hopCount", "path"]
PATH_COLUMNS = ["time", "flow", "source", "requestSeq", "index", "pathId", "path"]


@dataclass
class FlowState:
    spec: FlowSpec
    paths: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    buffer: list[DataPacket] = field(default_factory=list)
    discovery: Discovery | None = None
    # path ids that lost packets to a downstream break since the last epoch
    broken: set[int] = field(default_factory=set)


@dataclass
class RunResult:
    config: ScenarioConfig
    variant: Variant
    report: MetricsReport
    roles: list[Role]
    labels: dict[int, Label]
    model: WinnowModel
    flows: tuple[FlowSpec, ...]
    packet_rows: list[tuple]
    trust_records: list[TrustRecord]
    discovery_rows: list[tuple]
    path_rows: list[tuple]
    totals: list[PacketCounters]
    stats: dict[str, int]

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "packets.csv", PACKET_COLUMNS, self.packet_rows)
        _write_rows(out / "discovery.csv", DISCOVERY_COLUMNS, self.discovery_rows)
        _write_rows(out / "paths.csv", PATH_COLUMNS, self.path_rows)
        with open(out / "trust.csv", "w", newline="") as fh:
            write_trust_csv(self.trust_records, fh)
        with open(out / "model.csv", "w", newline="") as fh:
            self.model.write_csv(fh)
        _write_rows(out / "roles.csv", ["nodeId", "role", "dropProbability", "label"],
                    [(i, r.kind.value, r.drop_probability, int(self.labels.get(i, Label.NORMAL)))
                     for i, r in enumerate(self.roles)])
        _write_rows(out / "flows.csv", ["flow", "source", "destination", "rate", "packetSize", "start", "end"],
                    [(i, f.source, f.destination, f.rate, f.packet_size, f.start, f.end)
                     for i, f in enumerate(self.flows)])
        with open(out / "report.csv", "w", newline="") as fh:
            write_report_csv(self.report, fh)
        echo = self.config.echo()
        echo["variant"] = str(self.variant)
        (out / "config.echo.yaml").write_text(yaml.safe_dump(echo, sort_keys=True))
        return out


def _write_rows(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class Simulation:
    def __init__(self, config: ScenarioConfig, variant: Variant | str | None = None,
                 record: bool = True) -> None:
        self.cfg = config.validate()
        self.variant = Variant.parse(variant if variant is not None else config.variant)
        self.record = record
        cfg = self.cfg
        n = cfg.nodes
        self.n = n
        streams = seed_streams(cfg.seed)
        self.fleet = Fleet(n, cfg.arena, cfg.max_speed, streams["mobility"], cfg.pause)
        self.flows = cfg.flows if cfg.flows is not None else default_flows(cfg, streams["traffic"])
        endpoints = sorted({f.source for f in self.flows} | {f.destination for f in self.flows})
        self.roles = assign_roles(n, cfg.malicious_fraction, streams["roles"], cfg.attack,
                                  cfg.control == "silent", endpoints)
        self.queue = EventQueue(end_time=cfg.sim_ms)
        self.topology = Topology.from_fleet(self.fleet, cfg.radio_range)
        self.labels: dict[int, Label] = {i: Label.NORMAL for i in range(n)}
        self.medium = Medium(self.queue, n, cfg.hop_latency_ms, lambda: self.topology)
        self.eligible = self.medium.eligible
        self.discovery_rows: list[tuple] = []
        self.router = Router(self.medium, cfg.duplicate_limit, on_reply=self._on_reply,
                             transcript=self.discovery_rows if record else None)
        self.counters = [PacketCounters() for _ in range(n)]
        self.totals = [PacketCounters() for _ in range(n)]
        self.dataplane = DataPlane(self.router, self.counters, self.roles, streams["attack"],
                                   self._on_data_event)
        self.states = [FlowState(f) for f in self.flows]
        self._disc_flow: dict[tuple[int, int], int] = {}
        self.model = WinnowModel.initial(3 * cfg.bins)
        self.mode = TrustMode(cfg.trust_mode)
        self.evidence: dict[int, TrustRecord] = {}
        self.packet_rows: list[tuple] = []
        self.path_rows: list[tuple] = []
        self.trust_records: list[TrustRecord] = []
        self._probe_neighbors: dict[int, list[list[int]]] = {}
        self._window_start = 0
        self._classify_seconds = 0.0
        self._classified_nodes = 0
        self.stats = {"discoveries": 0, "failed_discoveries": 0, "invalidated_paths": 0,
                      "relabels": 0, "epochs": 0}

    # -- event handlers -------------------------------------------------
    def run(self) -> RunResult:
        cfg = self.cfg
        q = self.queue
        epoch_ms = int(round(cfg.epoch * 1000))
        q.schedule(TICK_MS, EventKind.MOBILITY_TICK)
        for e, t in enumerate(range(epoch_ms, cfg.sim_ms + 1, epoch_ms), start=1):
            q.schedule(t, EventKind.TRUST_EPOCH, e)
        generate_traffic(self.flows, q)
        q.schedule(cfg.sim_ms, EventKind.SIM_END)
        dispatch = {
            EventKind.MOBILITY_TICK: self._on_tick,
            EventKind.PACKET_ARRIVAL: self._on_arrival,
            EventKind.PACKET_SEND: self._on_send,
            EventKind.TRUST_EPOCH: self._on_epoch,
            EventKind.HANDSHAKE_TIMEOUT: self._on_handshake_timeout,
            EventKind.DISCOVERY_TIMEOUT: self._on_discovery_timeout,
        }
        while (ev := q.pop()) is not None:
            if ev.kind is EventKind.SIM_END:
                break
            dispatch[ev.kind](ev.payload)
        return self._finish()

    def _on_tick(self, _payload) -> None:
        self.fleet.step(TICK_MS / 1000)
        self.topology = Topology.from_fleet(self.fleet, self.cfg.radio_range)
        self.queue.schedule(self.queue.now + TICK_MS, EventKind.MOBILITY_TICK)

    def _on_arrival(self, payload) -> None:
        message, sender, receivers, sent_on = payload
        if isinstance(message, DataPacket):
            self.dataplane.arrive(message, sender, receivers, sent_on)
        else:
            self.router.deliver(message, sender, receivers, sent_on)

    def _row(self, event: str, node: int, p: DataPacket) -> None:
        self.packet_rows.append((self.queue.now, event, p.flow, p.seq, node, p.path_id, p.hops,
                                 p.origin_time))

    def _on_send(self, payload) -> None:
        fid, seq = payload
        st = self.states[fid]
        f = st.spec
        p = DataPacket(fid, seq, f.source, f.destination, -1, 0, self.queue.now)
        self._row("send", f.source, p)
        if st.paths:
            self._dispatch(st, p)
            return
        st.buffer.append(p)
        if st.discovery is None:
            self._discover(fid)

    def _dispatch(self, st: FlowState, p: DataPacket) -> None:
        path, pid = st.paths[assign_path(p.seq, len(st.paths))]
        p.path_id = pid
        p.hops = len(path) - 1
        self.dataplane.send(p)

    def _discover(self, fid: int) -> None:
        st = self.states[fid]
        f = st.spec
        try:
            disc = self.router.originate_rreq(f.source, f.destination)
        except DiscoveryRefused:
            self._flush_lost(st)
            return
        self.stats["discoveries"] += 1
        st.discovery = disc
        self._disc_flow[disc.request_id] = fid
        self.queue.schedule(self.queue.now + self.cfg.discovery_timeout_ms, EventKind.DISCOVERY_TIMEOUT,
                            disc.request_id)

    def _on_reply(self, disc: Discovery, _rrep: RouteReply) -> None:
        if len(disc.replies) == 1:
            self.queue.schedule(self.queue.now + self.cfg.reply_collect_ms, EventKind.DISCOVERY_TIMEOUT,
                                disc.request_id)

    def _on_discovery_timeout(self, rid: tuple[int, int]) -> None:
        disc = self.router.discoveries[rid]
        if disc.closed:
            return
        disc.closed = True
        fid = self._disc_flow.pop(rid)
        st = self.states[fid]
        st.discovery = None
        chosen = select_paths(disc.replies, self.cfg.paths, self.eligible)
        now = self.queue.now
        if self.record:
            for i, (path, pid) in enumerate(zip(chosen.paths, chosen.path_ids)):
                self.path_rows.append((now, fid, rid[0], rid[1], i, pid, "-".join(map(str, path))))
        if not chosen.paths:
            self.stats["failed_discoveries"] += 1
            self._flush_lost(st)
            return
        st.paths = list(zip(chosen.paths, chosen.path_ids))
        pending, st.buffer = st.buffer, []
        for p in pending:
            if not st.paths:
                st.buffer.append(p)
                continue
            self._dispatch(st, p)
        if st.buffer and st.discovery is None:
            self._discover(fid)

    def _flush_lost(self, st: FlowState) -> None:
        for p in st.buffer:
            self._row("noroute", p.source, p)
        st.buffer = []

    def _on_data_event(self, kind: str, node: int, p: DataPacket) -> None:
        self._row(kind, node, p)
        if kind != "break":
            return
        st = self.states[p.flow]
        if node == p.source:
            # the source sees its own link fail and stops using the path at once
            st.paths = [(path, pid) for path, pid in st.paths if pid != p.path_id]
            self._maybe_rediscover(p.flow)
        else:
            # no route errors travel upstream; the source learns at the next epoch
            st.broken.add(p.path_id)

    def _maybe_rediscover(self, fid: int) -> None:
        st = self.states[fid]
        if not st.paths and st.discovery is None and self.queue.now < st.spec.end * 1000:
            self._discover(fid)

    def _on_epoch(self, epoch: int) -> None:
        self._probe_neighbors[epoch] = [list(ns) for ns in self.topology.lists]
        self.queue.schedule(self.queue.now + self.cfg.handshake_timeout_ms, EventKind.HANDSHAKE_TIMEOUT,
                            epoch)

    def _on_handshake_timeout(self, epoch: int) -> None:
        cfg = self.cfg
        now = self.queue.now
        nbrs = self._probe_neighbors.pop(epoch)
        records = trust_epoch(self.counters, nbrs, self.roles, epoch, self.mode,
                              cfg.handshake_timeout_ms, 2 * cfg.hop_latency_ms)
        self.stats["epochs"] += 1
        if self.record:
            self.trust_records.extend(records)
        for r in records:
            if not r.idle:
                self.evidence[r.node_id] = r
        if not self.model.frozen and self._window_start < cfg.warmup_ms:
            for r in records:
                if not r.idle:
                    truth = Label.MALICIOUS if self.roles[r.node_id].malicious else Label.NORMAL
                    self.model = self.model.update(featurize(r, cfg.bins), truth)
        if now >= cfg.warmup_ms:
            if not self.model.frozen:
                self.model = self.model.freeze()
            self._relabel(self._classify())
        self._maintain_paths()
        for c, tot in zip(self.counters, self.totals):
            _accumulate(tot, c)
            c.reset()
        self._window_start = now

    def _classify(self) -> dict[int, Label]:
        """Labels from each node's latest window with relay evidence.

        Nodes never seen relaying keep their current label.
        """
        bins = self.cfg.bins
        v = self.variant
        out = dict(self.labels)
        t0 = time.perf_counter()
        for i in range(self.n):
            r = self.evidence.get(i)
            if r is None:
                continue
            if v.kind == "wtmrd":
                out[i] = self.model.predict(featurize(r, bins))
            elif v.kind == "threshold":
                out[i] = Label.NORMAL if r.trust >= v.threshold else Label.MALICIOUS
            else:
                out[i] = Label.NORMAL
        self._classify_seconds += time.perf_counter() - t0
        self._classified_nodes += self.n
        return out

    def _relabel(self, labels: dict[int, Label]) -> None:
        for i, lab in labels.items():
            if lab != self.labels[i]:
                self.stats["relabels"] += 1
                self.eligible[i] = lab == Label.NORMAL
        self.labels = labels

    def _maintain_paths(self) -> None:
        """Epoch-boundary route maintenance.

        Drops paths that crossed a route break during the window or now pass
        through a malicious-labelled node, then rediscovers for emptied flows.
        """
        eligible = self.eligible
        for fid, st in enumerate(self.states):
            keep = [(path, pid) for path, pid in st.paths
                    if pid not in st.broken and all(eligible[v] for v in path[1:-1])]
            self.stats["invalidated_paths"] += len(st.paths) - len(keep)
            st.paths = keep
            st.broken.clear()
            self._maybe_rediscover(fid)

    def _finish(self) -> RunResult:
        cfg = self.cfg
        for c, tot in zip(self.counters, self.totals):
            _accumulate(tot, c)
        for i, tot in enumerate(self.totals):
            if not tot.balanced():
                raise RuntimeError(f"packet counters of node {i} do not balance: {tot}")
        per_node_ms = (1000.0 * self._classify_seconds / self._classified_nodes
                       if self._classified_nodes else 0.0)
        measured = None if cfg.packets is None else [0]
        report = aggregate(self.packet_rows, self.roles, self.labels, per_node_ms, cfg.hop_latency_ms,
                           measure_from_ms=cfg.warmup_ms, flows=measured)
        stats = dict(self.stats)
        stats.update(transmissions=self.medium.transmissions, lost_in_air=self.medium.lost_in_air,
                     rrep_drops=self.router.rrep_drops, rreq_discards=self.router.discards,
                     mistakes=self.model.mistakes)
        return RunResult(cfg, self.variant, report, self.roles, dict(self.labels), self.model, self.flows,
                         self.packet_rows, self.trust_records, self.discovery_rows, self.path_rows,
                         self.totals, stats)


def _accumulate(total: PacketCounters, window: PacketCounters) -> None:
    total.received += window.received
    total.forwarded += window.forwarded
    total.dropped += window.dropped
    total.originated += window.originated
    total.consumed += window.consumed
    total.broken += window.broken


def run_scenario(config: ScenarioConfig, variant: Variant | str | None = None,
                 record: bool = True) -> RunResult:
    return Simulation(config, variant, record).run()
