"""Mechanism variants: the Winnow classifier and the two in-repo baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .trust import TrustRecord
from .winnow import Label, WinnowModel, classify_network


@dataclass(frozen=True)
class Variant:
    kind: str = "wtmrd"
    threshold: float = 1.0

    @classmethod
    def parse(cls, text: "str | Variant") -> "Variant":
        if isinstance(text, Variant):
            return text
        name, _, arg = str(text).strip().lower().partition(":")
        if name == "wtmrd" and not arg:
            return cls("wtmrd")
        if name == "noclass" and not arg:
            return cls("noclass")
        if name == "threshold":
            try:
                return cls("threshold", float(arg) if arg else 1.0)
            except ValueError:
                raise ValueError(f"bad threshold in {text!r}") from None
        raise ValueError(f"unknown variant {text!r}; expected wtmrd, noclass or threshold:t")

    def __str__(self) -> str:
        return self.kind if self.kind != "threshold" else f"threshold:{self.threshold:g}"


def baseline_labels(variant: Variant, records: Sequence[TrustRecord],
                    model: WinnowModel | None = None, bins: int = 4) -> dict[int, Label]:
    """Eligibility labels for ``records`` under ``variant``."""
    if variant.kind == "noclass":
        return {r.node_id: Label.NORMAL for r in records}
    if variant.kind == "threshold":
        return {r.node_id: Label.NORMAL if r.trust >= variant.threshold else Label.MALICIOUS
                for r in records}
    if model is None:
        raise ValueError("the wtmrd variant needs a trained model")
    return classify_network(model, records, bins)
