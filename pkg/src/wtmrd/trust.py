"""Neighbour-based trust: cooperative count, forwarding rate, drop rate, trust value."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Mapping, Sequence

from .engine import HONEST, PacketCounters, Role


class TrustMode(str, Enum):
    FAITHFUL = "faithful"
    CORRECTED = "corrected"


@dataclass(frozen=True, slots=True)
class TrustRecord:
    node_id: int
    cooperative_count: int
    cooperative_norm: float
    forwarding_rate: float
    drop_rate: float
    trust: float
    epoch: int
    # relay packets seen in the window; 0 means no behavioural evidence
    relayed: int = 0
    mode: TrustMode = TrustMode.CORRECTED

    @property
    def idle(self) -> bool:
        return self.relayed == 0


def handshake_probe(node_id: int, neighbor_ids: Iterable[int], roles: Mapping[int, Role] | Sequence[Role],
                    timeout_ms: int = 100, round_trip_ms: int = 4) -> int:
    """Number of neighbours whose probe reply lands before ``timeout_ms``.

    A node that ignores probes does not run the handshake either, so its own
    count is zero.
    """
    if not _role(roles, node_id).answers_probes or round_trip_ms > timeout_ms:
        return 0
    return sum(1 for j in neighbor_ids if _role(roles, j).answers_probes)


def _role(roles: Mapping[int, Role] | Sequence[Role], i: int) -> Role:
    if isinstance(roles, Mapping):
        return roles.get(i, HONEST)
    return roles[i]


def forwarding_rate(counters: PacketCounters) -> float:
    m = counters.relayed
    return counters.forwarded / m if m > 0 else 0.0


def drop_rate(counters: PacketCounters) -> float:
    m = counters.relayed
    return counters.dropped / m if m > 0 else 0.0


def trust_value(cooperative_norm: float, forwarding: float, dropping: float,
                mode: TrustMode = TrustMode.CORRECTED) -> float:
    """Aggregate trust.

    FAITHFUL adds all three components as published; CORRECTED subtracts the
    drop rate and clamps at zero.
    """
    for name, v in (("cooperative_norm", cooperative_norm), ("forwarding", forwarding),
                    ("dropping", dropping)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]; upstream accounting is broken")
    if TrustMode(mode) is TrustMode.FAITHFUL:
        return cooperative_norm + forwarding + dropping
    return max(0.0, cooperative_norm + forwarding - dropping)


def trust_epoch(counters: Sequence[PacketCounters], neighbor_sets: Sequence[Sequence[int]],
                roles: Sequence[Role], epoch: int, mode: TrustMode = TrustMode.CORRECTED,
                timeout_ms: int = 100, round_trip_ms: int = 4) -> list[TrustRecord]:
    """One record per node for the window behind ``counters``.

    Pure: the caller resets the window counters afterwards.
    """
    records = []
    answers = [r.answers_probes for r in roles] if round_trip_ms <= timeout_ms else [False] * len(roles)
    for i, c in enumerate(counters):
        nbrs = neighbor_sets[i]
        alpha = sum(1 for j in nbrs if answers[j]) if answers[i] else 0
        norm = alpha / max(1, len(nbrs))
        beta = forwarding_rate(c)
        gamma = drop_rate(c)
        records.append(TrustRecord(i, alpha, norm, beta, gamma, trust_value(norm, beta, gamma, mode),
                                   epoch, c.relayed, TrustMode(mode)))
    return records


TRUST_COLUMNS = ["epoch", "nodeId", "alpha", "alphaNorm", "beta", "gamma", "tau", "mode"]


def write_trust_csv(records: Iterable[TrustRecord], out: IO[str], header: bool = True) -> None:
    w = csv.writer(out, lineterminator="\n")
    if header:
        w.writerow(TRUST_COLUMNS)
    for r in records:
        w.writerow([r.epoch, r.node_id, r.cooperative_count, f"{r.cooperative_norm:.6f}",
                    f"{r.forwarding_rate:.6f}", f"{r.drop_rate:.6f}", f"{r.trust:.6f}", r.mode.value])
