"""Winnow linear-threshold classifier over thermometer-encoded trust features.

Weights start at 1 and only ever double or halve, so every weight is an exact
dyadic rational and comparisons in tests are exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import IO, Iterable, Sequence

import numpy as np

from . import kernels
from .trust import TrustRecord


class Label(IntEnum):
    NORMAL = 1
    MALICIOUS = -1


def thermometer(value: float, bins: int) -> tuple[int, ...]:
    """``bins`` bits; bit k is set iff ``value > k / bins``."""
    return tuple(1 if value > k / bins else 0 for k in range(bins))


def featurize(record: TrustRecord, bins: int = 4) -> tuple[int, ...]:
    """Concatenate thermometer blocks for cooperation, forwarding, and 1 - drop rate."""
    if bins < 2:
        raise ValueError("need at least two bins per component")
    return (thermometer(record.cooperative_norm, bins)
            + thermometer(record.forwarding_rate, bins)
            + thermometer(1.0 - record.drop_rate, bins))


class FrozenModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class WinnowModel:
    weights: tuple[float, ...]
    threshold: float
    mistakes: int = 0
    frozen: bool = False

    @classmethod
    def initial(cls, n_features: int, threshold: float | None = None) -> "WinnowModel":
        if n_features < 1:
            raise ValueError("n_features must be positive")
        return cls((1.0,) * n_features, n_features / 2 if threshold is None else float(threshold))

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def score(self, x: Sequence[int]) -> float:
        if len(x) != len(self.weights):
            raise ValueError(f"feature length {len(x)} != model length {len(self.weights)}")
        return sum(w for w, b in zip(self.weights, x) if b)

    def predict(self, x: Sequence[int]) -> Label:
        # ties fall to MALICIOUS: the rule is a strict inequality
        return Label.NORMAL if self.score(x) > self.threshold else Label.MALICIOUS

    def update(self, x: Sequence[int], truth: Label | int) -> "WinnowModel":
        if self.frozen:
            raise FrozenModelError("model is frozen")
        predicted = self.predict(x)
        if predicted == truth:
            return self
        factor = 2.0 if truth == Label.NORMAL else 0.5
        weights = tuple(w * factor if b else w for w, b in zip(self.weights, x))
        return replace(self, weights=weights, mistakes=self.mistakes + 1)

    def train(self, stream: Iterable[tuple[Sequence[int], Label | int]]) -> "WinnowModel":
        model = self
        for x, truth in stream:
            model = model.update(x, truth)
        return model

    def freeze(self) -> "WinnowModel":
        return replace(self, frozen=True)

    def write_csv(self, out: IO[str]) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerow(["threshold", repr(self.threshold)])
        w.writerow(["mistakes", self.mistakes])
        w.writerow(["frozen", int(self.frozen)])
        w.writerow(["bitIndex", "weight"])
        for i, wt in enumerate(self.weights):
            w.writerow([i, repr(wt)])


def classify_network(model: WinnowModel, records: Sequence[TrustRecord], bins: int = 4) -> dict[int, Label]:
    if not model.frozen:
        raise RuntimeError("classify_network needs a frozen model")
    return {r.node_id: model.predict(featurize(r, bins)) for r in records}


def train_to_convergence(model: WinnowModel, samples, labels, max_passes: int = 100) -> tuple[WinnowModel, int]:
    """Cycle over a fixed sample set until one full pass makes no mistake.

    Online semantics are kept exactly; batch scoring only locates the next
    mistake under the current weights. Returns ``(model, passes)``.
    """
    bits = np.ascontiguousarray(samples, dtype=np.uint8)
    truth = np.asarray(labels, dtype=np.int64)
    if bits.ndim != 2 or bits.shape[0] != truth.shape[0]:
        raise ValueError("samples must be 2-D with one label per row")
    for passes in range(1, max_passes + 1):
        pos, clean = 0, True
        while pos < bits.shape[0]:
            scores = kernels.active_weight_sums(np.asarray(model.weights), bits[pos:])
            predicted = np.where(scores > model.threshold, 1, -1)
            wrong = np.flatnonzero(predicted != truth[pos:])
            if wrong.size == 0:
                break
            i = pos + int(wrong[0])
            model = model.update(bits[i].tolist(), Label(int(truth[i])))
            clean = False
            pos = i + 1
        if clean:
            return model, passes
    return model, max_passes
