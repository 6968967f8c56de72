"""Task metrics: classification accuracy and span F1 in two flavors.

Binary-F1 treats a predicted span as correct when it overlaps any gold span
of the same role (each gold span satisfies recall once, however many
predictions touch it). Proportional F1 credits fractional token overlap:
precision averages, over predicted spans, the best overlap fraction of the
prediction's length; recall mirrors this over gold spans.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ContractError


def accuracy(preds, golds) -> float:
    if len(preds) != len(golds):
        raise ContractError("prediction/gold length mismatch")
    if not golds:
        raise ContractError("empty evaluation set")
    return sum(p == g for p, g in zip(preds, golds)) / len(golds)


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class PRF:
    precision: float
    recall: float
    f1: float


@dataclass
class _RoleTally:
    n_pred: int = 0
    n_gold: int = 0
    bin_pred_hit: int = 0   # predicted spans overlapping some gold
    bin_gold_hit: int = 0   # gold spans overlapped by some prediction
    prop_pred: float = 0.0  # sum of best overlap fractions, prediction side
    prop_gold: float = 0.0


class SpanScorer:
    """Accumulates (predicted, gold) span sets sentence by sentence."""

    def __init__(self, roles):
        self.roles = list(roles)
        self.tally = {r: _RoleTally() for r in self.roles}

    def add(self, pred_spans, gold_spans):
        for r in self.roles:
            preds = [s for s in pred_spans if s.role == r]
            golds = [s for s in gold_spans if s.role == r]
            t = self.tally[r]
            t.n_pred += len(preds)
            t.n_gold += len(golds)
            for p in preds:
                best = max((p.overlap(g) for g in golds), default=0)
                if best > 0:
                    t.bin_pred_hit += 1
                t.prop_pred += best / p.length()
            for g in golds:
                best = max((g.overlap(p) for p in preds), default=0)
                if best > 0:
                    t.bin_gold_hit += 1
                t.prop_gold += best / g.length()

    @staticmethod
    def _prf(num_p, den_p, num_r, den_r) -> PRF:
        if den_p == 0 and den_r == 0:
            return PRF(1.0, 1.0, 1.0)  # nothing to find, nothing predicted
        p = num_p / den_p if den_p else 0.0
        r = num_r / den_r if den_r else 0.0
        return PRF(p, r, f1(p, r))

    def binary(self, role: str) -> PRF:
        t = self.tally[role]
        return self._prf(t.bin_pred_hit, t.n_pred, t.bin_gold_hit, t.n_gold)

    def proportional(self, role: str) -> PRF:
        t = self.tally[role]
        return self._prf(t.prop_pred, t.n_pred, t.prop_gold, t.n_gold)

    def _micro(self, fn) -> PRF:
        np_, ng, hp, hg = 0, 0, 0.0, 0.0
        for r in self.roles:
            t = self.tally[r]
            np_ += t.n_pred
            ng += t.n_gold
            if fn == "binary":
                hp += t.bin_pred_hit
                hg += t.bin_gold_hit
            else:
                hp += t.prop_pred
                hg += t.prop_gold
        return self._prf(hp, np_, hg, ng)

    def report(self) -> dict:
        """role -> {binary: PRF, prop: PRF}, plus 'micro' aggregates."""
        out = {}
        for r in self.roles:
            out[r] = {"binary": self.binary(r), "prop": self.proportional(r)}
        out["micro"] = {"binary": self._micro("binary"), "prop": self._micro("prop")}
        return out


def span_f1(pred_sets, gold_sets, roles) -> dict:
    """Convenience wrapper over parallel per-sentence span lists."""
    if len(pred_sets) != len(gold_sets):
        raise ContractError("prediction/gold length mismatch")
    scorer = SpanScorer(roles)
    for p, g in zip(pred_sets, gold_sets):
        scorer.add(p, g)
    return scorer.report()
