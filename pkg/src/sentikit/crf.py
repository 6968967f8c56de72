"""Linear-chain CRF and the BIOS tag scheme for span labeling.

The log-partition runs through the autograd graph (logsumexp recurrence),
so CRF training needs no hand-derived gradient. Viterbi decoding is plain
numpy; argmax ties resolve to the lowest tag id at every backtrack step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ContractError

O_TAG = "O"


def make_tagset(roles) -> list:
    """O first, then B/I/S per role in the given order."""
    tags = [O_TAG]
    for r in roles:
        tags += [f"B-{r}", f"I-{r}", f"S-{r}"]
    return tags


def roles_from_tagset(tags) -> list:
    roles = []
    for t in tags:
        if t.startswith("B-") and t[2:] not in roles:
            roles.append(t[2:])
    return roles


@dataclass
class TaggedSpan:
    role: str
    start: int  # token indices, inclusive
    end: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ContractError(f"bad span bounds ({self.start}, {self.end})")

    def key(self):
        return (self.role, self.start, self.end)

    def length(self) -> int:
        return self.end - self.start + 1

    def overlap(self, other: "TaggedSpan") -> int:
        if self.role != other.role:
            return 0
        lo, hi = max(self.start, other.start), min(self.end, other.end)
        return max(0, hi - lo + 1)


def spans_from_bios(tags) -> list:
    """Decode tag strings to spans; an orphan I- opens a new span (repair)."""
    spans = []
    open_role, open_start = None, None

    def close(end):
        nonlocal open_role, open_start
        if open_role is not None:
            spans.append(TaggedSpan(open_role, open_start, end))
            open_role, open_start = None, None

    for i, t in enumerate(tags):
        if t == O_TAG:
            close(i - 1)
        elif t.startswith("S-"):
            close(i - 1)
            spans.append(TaggedSpan(t[2:], i, i))
        elif t.startswith("B-"):
            close(i - 1)
            open_role, open_start = t[2:], i
        elif t.startswith("I-"):
            if open_role != t[2:]:
                close(i - 1)
                open_role, open_start = t[2:], i
        else:
            raise ContractError(f"not a BIOS tag: {t!r}")
    close(len(tags) - 1)
    return spans


def bios_from_spans(spans, length: int) -> list:
    tags = [O_TAG] * length
    occupied = set()
    for s in spans:
        if s.end >= length:
            raise ContractError(f"span {s} beyond sequence of length {length}")
        for i in range(s.start, s.end + 1):
            if i in occupied:
                raise ContractError(f"overlapping spans at position {i}")
            occupied.add(i)
        if s.length() == 1:
            tags[s.start] = f"S-{s.role}"
        else:
            tags[s.start] = f"B-{s.role}"
            for i in range(s.start + 1, s.end + 1):
                tags[i] = f"I-{s.role}"
    return tags


# ---------------------------------------------------------------------------
# linear-chain CRF over tag ids

@dataclass
class CrfParams:
    """References into the fine-tuning parameter dict."""

    trans: Tensor  # (K, K) score of tag_from -> tag_to
    start: Tensor  # (K,)
    end: Tensor    # (K,)

    @property
    def n_tags(self) -> int:
        return self.trans.data.shape[0]


def crf_score(emissions: Tensor, tags, crf: CrfParams) -> Tensor:
    """Path score: start + emissions along `tags` + transitions + end."""
    tags = np.asarray(tags, dtype=np.int64)
    T = emissions.data.shape[0]
    if tags.shape != (T,):
        raise ContractError("tag sequence length mismatch")
    score = ag.take(crf.start, tags[0]) + ag.take(crf.end, tags[-1])
    score = score + ag.tsum(ag.take(emissions, (np.arange(T), tags)))
    if T > 1:
        score = score + ag.tsum(ag.take(crf.trans, (tags[:-1], tags[1:])))
    return score


def crf_log_partition(emissions: Tensor, crf: CrfParams) -> Tensor:
    """Forward algorithm in log space over the autograd graph."""
    T, K = emissions.data.shape
    if K != crf.n_tags:
        raise ContractError("emission width != tag count")
    alpha = crf.start + ag.take(emissions, 0)
    for t in range(1, T):
        step = ag.reshape(alpha, (K, 1)) + crf.trans
        alpha = ag.logsumexp(step, axis=0) + ag.take(emissions, t)
    return ag.logsumexp(alpha + crf.end, axis=0)


def crf_nll(emissions: Tensor, tags, crf: CrfParams) -> Tensor:
    return crf_log_partition(emissions, crf) - crf_score(emissions, tags, crf)


def crf_viterbi(emissions, trans, start, end) -> list:
    """Best tag sequence; ties take the lowest tag id."""
    e = np.asarray(emissions, dtype=np.float64)
    trans = np.asarray(trans, dtype=np.float64)
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    T, K = e.shape
    score = start + e[0]
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        cand = score[:, None] + trans  # (from, to)
        back[t] = np.argmax(cand, axis=0)  # first max = lowest id
        score = cand[back[t], np.arange(K)] + e[t]
    score = score + end
    best = int(np.argmax(score))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return path
