"""Joint pre-training loop over a masked corpus.

Determinism contract: parameter init, batch shuffling, and dropout all
derive from one master seed, so a (config, seed, corpus) triple always
produces byte-identical checkpoints.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .checkpoint import save_checkpoint
from .corpus import pad_batch
from .encoder import EncoderConfig, forward, init_params
from .errors import ContractError, NumericalError
from .objectives import JointConfig, joint_loss

LOG_HEADER = "step\tl_sw\tl_wp\tl_ap\ttotal\tlr"


@dataclass
class PretrainConfig:
    epochs: int = 3
    batch_size: int = 32
    lr: float = 5e-5
    grad_clip: float = 1.0
    log_every: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError("epochs and batch_size must be >= 1")


@dataclass
class PretrainResult:
    params: dict
    log_rows: list            # (step, l_sw, l_wp, l_ap, total, lr)
    epoch_means: list         # per-epoch mean LossBreakdown tuples
    steps: int = 0


def _rngs(seed: int):
    master = np.random.SeedSequence(seed)
    init_ss, shuffle_ss, dropout_ss = master.spawn(3)
    return (np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss),
            np.random.default_rng(dropout_ss))


def run_pretrain(encoder_cfg: EncoderConfig, joint_cfg: JointConfig, examples,
                 pcfg: PretrainConfig, out_dir=None,
                 params: dict | None = None) -> PretrainResult:
    """Train on MaskedExamples; pass `params` to warm-start from a checkpoint."""
    if not examples:
        raise ContractError("no training examples")
    init_rng, shuffle_rng, dropout_rng = _rngs(pcfg.seed)
    if params is None:
        params = init_params(encoder_cfg, init_rng)
    opt = ag.Adam(params, lr=pcfg.lr)

    log_rows = []
    epoch_means = []
    step = 0
    last_good = None
    log_f = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_f = open(os.path.join(out_dir, "train_log.tsv"), "w", encoding="utf-8")
        log_f.write(LOG_HEADER + "\n")

    def snapshot():
        return {k: v.data.copy() for k, v in params.items()}

    try:
        for epoch in range(pcfg.epochs):
            order = shuffle_rng.permutation(len(examples))
            sums = np.zeros(4)
            n_batches = 0
            for lo in range(0, len(order), pcfg.batch_size):
                batch = [examples[i] for i in order[lo: lo + pcfg.batch_size]]
                padded = pad_batch([ex.corrupted for ex in batch])
                try:
                    out = forward(params, encoder_cfg, padded.ids, padded.attn,
                                  train=True, rng=dropout_rng)
                    breakdown, total = joint_loss(out.states, batch, params,
                                                  encoder_cfg.vocab_size, joint_cfg)
                    if not np.isfinite(breakdown.total):
                        raise NumericalError("non-finite loss")
                except NumericalError as err:
                    raise _diverged(out_dir, last_good, encoder_cfg, step, err) from err
                last_good = snapshot()
                ag.zero_grads(params)
                total.backward()
                ag.clip_grad_norm(params, pcfg.grad_clip)
                opt.step()
                step += 1
                sums += (breakdown.l_sw, breakdown.l_wp, breakdown.l_ap, breakdown.total)
                n_batches += 1
                if step % pcfg.log_every == 0 or lo + pcfg.batch_size >= len(order):
                    row = (step, breakdown.l_sw, breakdown.l_wp, breakdown.l_ap,
                           breakdown.total, pcfg.lr)
                    log_rows.append(row)
                    if log_f:
                        log_f.write("%d\t%.6f\t%.6f\t%.6f\t%.6f\t%g\n" % row)
            epoch_means.append(tuple(sums / max(1, n_batches)))
    finally:
        if log_f:
            log_f.close()
    return PretrainResult(params, log_rows, epoch_means, step)


def _diverged(out_dir, last_good, encoder_cfg, step, err):
    """last_good holds the parameters that most recently produced a finite loss."""
    hint = ""
    if out_dir is not None and last_good is not None:
        path = os.path.join(out_dir, "last_good.ckpt")
        save_checkpoint(path, encoder_cfg.to_dict(), last_good)
        hint = f"; last good parameters saved to {path}"
    return NumericalError(f"pre-training diverged at step {step}: {err}{hint}")
