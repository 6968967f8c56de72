"""The three joint pre-training losses over masked batches.

  SW: recover masked word identities with a vocab softmax head; covers the
      knowledge-masked sentiment words and the common 80/10/10 fills.
  WP: predict the polarity of masked sentiment tokens (two-class head),
      including the sentiment member of every masked pair.
  AP: predict, per masked pair, which vocabulary items the pair contains:
      a multi-label sigmoid over the vocab driven by the [CLS] state
      (sent_vector) or by the two words' concatenated states (pair_vector).
      The ap_i ablation replaces this with per-position softmaxes through
      the SW head.

Reduction everywhere: sum over targets, divided by the number of sequences
in the batch. Terms with no targets are exactly 0. The reported total is
accumulated in the same order as the tensor graph, so additivity is exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ContractError
from .masker import MaskedExample, build_ap_target

SENT_VECTOR, PAIR_VECTOR = "sent_vector", "pair_vector"
FULL, POSITIVE_ONLY = "full", "positive_only"
AP_JOINT, AP_INDEPENDENT = "ap", "ap_i"


@dataclass
class LossBreakdown:
    l_sw: float
    l_wp: float
    l_ap: float
    total: float
    n_sw: int = 0
    n_wp: int = 0
    n_ap: int = 0

    def __post_init__(self):
        if self.total != (self.l_sw + self.l_wp) + self.l_ap:
            raise ContractError("loss total is not the exact sum of its terms")


def _gather_states(states: Tensor, rows) -> Tensor:
    b = np.array([r[0] for r in rows], dtype=np.int64)
    p = np.array([r[1] for r in rows], dtype=np.int64)
    return ag.take(states, (b, p))


def _check_positions(rows, seq_lens):
    for b, p, *_ in rows:
        if not 1 <= p < seq_lens[b]:
            raise ContractError(f"target position {p} outside sequence {b}")


def loss_sw(states: Tensor, rows, params, batch_size: int) -> Tensor:
    """rows: (example index, position, original id). Softmax CE on the word head."""
    if not rows:
        return Tensor(0.0)
    sel = _gather_states(states, rows)
    logits = ag.matmul(sel, params["lm_w"]) + params["lm_b"]
    lp = ag.log_softmax(logits, axis=-1)
    ids = np.array([r[2] for r in rows], dtype=np.int64)
    picked = ag.take(lp, (np.arange(len(rows)), ids))
    return ag.tsum(picked) * (-1.0 / batch_size)


def loss_wp(states: Tensor, rows, params, batch_size: int) -> Tensor:
    """rows: (example index, position, polarity01). Two-class CE on the polarity head."""
    if not rows:
        return Tensor(0.0)
    for *_, pol in rows:
        if pol not in (0, 1):
            raise ContractError("wp polarity must be 0 or 1")
    sel = _gather_states(states, rows)
    logits = ag.matmul(sel, params["wp_w"]) + params["wp_b"]
    lp = ag.log_softmax(logits, axis=-1)
    pols = np.array([r[2] for r in rows], dtype=np.int64)
    picked = ag.take(lp, (np.arange(len(rows)), pols))
    return ag.tsum(picked) * (-1.0 / batch_size)


def loss_ap(states: Tensor, pair_rows, params, batch_size: int, vocab_size: int,
            mode: str = SENT_VECTOR, bce: str = FULL) -> Tensor:
    """pair_rows: (example index, aspect positions, sentiment positions, pair ids).

    One sigmoid-over-vocab prediction per pair; an example's pairs share the
    prediction vector in sent_vector mode because both read the same [CLS].
    """
    if mode not in (SENT_VECTOR, PAIR_VECTOR):
        raise ContractError(f"unknown ap mode {mode!r}")
    if bce not in (FULL, POSITIVE_ONLY):
        raise ContractError(f"unknown bce mode {bce!r}")
    if not pair_rows:
        return Tensor(0.0)

    if mode == SENT_VECTOR:
        vecs = _gather_states(states, [(b, 0) for b, _, _, _ in pair_rows])
    else:
        per_pair = []
        for b, apos, spos, _ in pair_rows:
            a = ag.take(states, (np.full(len(apos), b), np.asarray(apos, dtype=np.int64)))
            s = ag.take(states, (np.full(len(spos), b), np.asarray(spos, dtype=np.int64)))
            per_pair.append(ag.concatenate([a.mean(axis=0), s.mean(axis=0)], axis=0))
        vecs = ag.stack(per_pair, axis=0)

    z = ag.matmul(vecs, params["ap_w"]) + params["ap_b"]  # (P, V)
    y = np.stack([build_ap_target(ids, vocab_size) for _, _, _, ids in pair_rows])
    if bce == FULL:
        per = ag.softplus(z) - z * Tensor(y)
        total = ag.tsum(per)
    else:
        # paper-literal positive term only: -sum_a y_a . log yhat
        total = ag.tsum(ag.softplus(-z) * Tensor(y))
    return total * (1.0 / batch_size)


def loss_ap_independent(states: Tensor, pair_rows, examples, params,
                        batch_size: int) -> Tensor:
    """Ablation: per-position softmax CE through the word head at pair positions."""
    rows = []
    for b, apos, spos, _ in pair_rows:
        for p in list(apos) + list(spos):
            rows.append((b, p, examples[b].original[p]))
    return loss_sw(states, rows, params, batch_size)


@dataclass
class JointConfig:
    include_sw: bool = True
    include_wp: bool = True
    include_ap: bool = True
    ap_variant: str = AP_JOINT      # ap | ap_i
    ap_mode: str = SENT_VECTOR      # sent_vector | pair_vector
    bce: str = FULL                 # full | positive_only

    def __post_init__(self):
        if self.ap_variant not in (AP_JOINT, AP_INDEPENDENT):
            raise ContractError(f"unknown ap variant {self.ap_variant!r}")


def target_rows(examples):
    """Flatten per-example targets into batch-indexed row lists."""
    sw_rows, wp_rows, pair_rows = [], [], []
    for b, ex in enumerate(examples):
        for p, orig in ex.sw_targets:
            sw_rows.append((b, p, orig))
        for p, pol in ex.wp_targets:
            wp_rows.append((b, p, pol))
        for (apos, spos), ids in zip(ex.pair_spans, ex.ap_targets):
            pair_rows.append((b, apos, spos, ids))
    return sw_rows, wp_rows, pair_rows


def joint_loss(states: Tensor, examples, params, vocab_size: int,
               config: JointConfig = JointConfig()) -> tuple[LossBreakdown, Tensor]:
    """Sum of the enabled terms over a batch of MaskedExamples."""
    if isinstance(examples, MaskedExample):
        examples = [examples]
    if not examples:
        raise ContractError("empty batch")
    B = len(examples)
    seq_lens = [len(ex.corrupted) for ex in examples]
    for ex in examples:
        ex.validate()
    sw_rows, wp_rows, pair_rows = target_rows(examples)
    _check_positions(sw_rows, seq_lens)
    _check_positions(wp_rows, seq_lens)

    sw = loss_sw(states, sw_rows, params, B) if config.include_sw else Tensor(0.0)
    wp = loss_wp(states, wp_rows, params, B) if config.include_wp else Tensor(0.0)
    if not config.include_ap:
        ap = Tensor(0.0)
    elif config.ap_variant == AP_INDEPENDENT:
        ap = loss_ap_independent(states, pair_rows, examples, params, B)
    else:
        ap = loss_ap(states, pair_rows, params, B, vocab_size,
                     config.ap_mode, config.bce)

    total = (sw + wp) + ap
    breakdown = LossBreakdown(
        l_sw=float(sw.data), l_wp=float(wp.data), l_ap=float(ap.data),
        total=(float(sw.data) + float(wp.data)) + float(ap.data),
        n_sw=len(sw_rows), n_wp=len(wp_rows), n_ap=len(pair_rows),
    )
    return breakdown, total
