"""Task heads and fine-tuning loops on top of a pre-trained encoder.

Three tasks share one driver: whole-sentence classification, aspect
classification over a combined [CLS] aspect [SEP] context input, and
opinion role labeling with a CRF output layer. Each run is deterministic
per seed; the three-seed protocol picks the run with the median dev score.
"""
from __future__ import annotations

import hashlib
import itertools
import os
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .checkpoint import save_checkpoint
from .corpus import CLS_ID, SEP_ID, pad_batch
from .crf import CrfParams, crf_nll, crf_viterbi, make_tagset, spans_from_bios
from .encoder import EncoderConfig, forward, init_params
from .errors import ContractError, DataError, NumericalError, UsageError
from .metrics import SpanScorer, accuracy

TASK_SENTENCE = "sentence"
TASK_ASPECT = "aspect"
TASK_ORL = "orl"
TASKS = (TASK_SENTENCE, TASK_ASPECT, TASK_ORL)


@dataclass
class FinetuneConfig:
    task: str = TASK_SENTENCE
    epochs: int = 10
    batch_size: int = 16
    lr: float = 3e-5
    grad_clip: float = 1.0
    seed: int = 0
    log_every: int = 0  # 0 = epoch summaries only

    def __post_init__(self):
        if self.task not in TASKS:
            raise UsageError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError("epochs and batch_size must be >= 1")


# ---------------------------------------------------------------------------
# input encoding

def encode_sentence(tokens, vocab, max_len: int) -> list[int]:
    ids = [CLS_ID] + vocab.encode(tokens)
    return ids[:max_len]


def encode_aspect_input(aspect_tokens, context_tokens, vocab, max_len: int) -> list[int]:
    """[CLS] aspect [SEP] context; the context tail is dropped on overflow,
    the aspect never is."""
    head = [CLS_ID] + vocab.encode(aspect_tokens) + [SEP_ID]
    if len(head) > max_len:
        raise DataError(f"aspect of {len(aspect_tokens)} tokens does not fit in max_seq_len={max_len}")
    room = max_len - len(head)
    return head + vocab.encode(context_tokens)[:room]


# ---------------------------------------------------------------------------
# heads

def init_classifier_head(hidden_dim: int, n_classes: int) -> dict:
    # zero init makes the untrained head exactly uniform
    return {"cls_w": ag.parameter(np.zeros((hidden_dim, n_classes))),
            "cls_b": ag.parameter(np.zeros(n_classes))}


def init_orl_head(hidden_dim: int, n_tags: int) -> dict:
    return {"tag_w": ag.parameter(np.zeros((hidden_dim, n_tags))),
            "tag_b": ag.parameter(np.zeros(n_tags)),
            "crf_trans": ag.parameter(np.zeros((n_tags, n_tags))),
            "crf_start": ag.parameter(np.zeros(n_tags)),
            "crf_end": ag.parameter(np.zeros(n_tags))}


def crf_view(params: dict) -> CrfParams:
    return CrfParams(params["crf_trans"], params["crf_start"], params["crf_end"])


def label_mapping(labels) -> dict:
    """Stable label -> index map: sorted unique labels from the training data."""
    uniq = sorted(set(labels))
    if len(uniq) < 2:
        raise DataError(f"need at least 2 classes, found {uniq}")
    return {lab: i for i, lab in enumerate(uniq)}


# ---------------------------------------------------------------------------
# forward passes

def class_logits(params, cfg: EncoderConfig, ids, attn=None, train=False, rng=None):
    out = forward(params, cfg, ids, attn, train=train, rng=rng)
    first = ag.take(out.states, (slice(None), 0))  # (B, H) state above [CLS]
    return ag.add(ag.matmul(first, params["cls_w"]), params["cls_b"])


def classify(params, cfg: EncoderConfig, ids, attn=None):
    """Class probabilities, rows summing to 1."""
    with ag.no_grad():
        logits = class_logits(params, cfg, ids, attn)
        return ag.softmax(logits, axis=-1).data


def classify_sentence(params, cfg: EncoderConfig, tokens, vocab):
    ids = encode_sentence(tokens, vocab, cfg.max_seq_len)
    return classify(params, cfg, np.asarray([ids]))[0]


def classify_aspect(params, cfg: EncoderConfig, aspect_tokens, context_tokens, vocab):
    ids = encode_aspect_input(aspect_tokens, context_tokens, vocab, cfg.max_seq_len)
    return classify(params, cfg, np.asarray([ids]))[0]


def emission_scores(params, cfg: EncoderConfig, ids, attn=None, train=False, rng=None):
    out = forward(params, cfg, ids, attn, train=train, rng=rng)
    return ag.add(ag.matmul(out.states, params["tag_w"]), params["tag_b"])


def decode_tags(params, cfg: EncoderConfig, sentences, vocab, tagset) -> list:
    """Viterbi tag sequences for a batch of token lists."""
    seqs = [encode_sentence(s, vocab, cfg.max_seq_len) for s in sentences]
    batch = pad_batch(seqs)
    with ag.no_grad():
        em = emission_scores(params, cfg, batch.ids, batch.attn).data
    crf = crf_view(params)
    preds = []
    for b, s in enumerate(sentences):
        n = min(len(s), cfg.max_seq_len - 1)
        rows = em[b, 1: 1 + n]  # token t sits at position t+1, after [CLS]
        tags = crf_viterbi(rows, crf.trans.data, crf.start.data, crf.end.data)
        preds.append([tagset[t] for t in tags])
    return preds


# ---------------------------------------------------------------------------
# evaluation

def evaluate_classifier(params, cfg: EncoderConfig, rows, vocab, label_map,
                        batch_size: int = 64) -> float:
    preds, golds = [], []
    for lo in range(0, len(rows), batch_size):
        chunk = rows[lo: lo + batch_size]
        seqs = [_encode_row(r, vocab, cfg.max_seq_len) for r in chunk]
        batch = pad_batch(seqs)
        probs = classify(params, cfg, batch.ids, batch.attn)
        preds.extend(int(np.argmax(p)) for p in probs)
        golds.extend(label_map[r.label] for r in chunk)
    return accuracy(preds, golds)


def evaluate_orl(params, cfg: EncoderConfig, sentences, vocab, tagset,
                 batch_size: int = 32) -> dict:
    roles = sorted({t.split("-", 1)[1] for t in tagset if t != "O"})
    scorer = SpanScorer(roles)
    for lo in range(0, len(sentences), batch_size):
        chunk = sentences[lo: lo + batch_size]
        pred_tags = decode_tags(params, cfg, [s.tokens for s in chunk], vocab, tagset)
        for s, pt in zip(chunk, pred_tags):
            scorer.add(spans_from_bios(pt), spans_from_bios(s.tags[: len(pt)]))
    return scorer.report()


def _encode_row(row, vocab, max_len):
    if row.aspect is not None:
        return encode_aspect_input(row.aspect, row.tokens, vocab, max_len)
    return encode_sentence(row.tokens, vocab, max_len)


# ---------------------------------------------------------------------------
# training driver

@dataclass
class FinetuneResult:
    params: dict
    dev_score: float
    history: list          # (epoch, train_loss, dev_score)
    label_map: dict | None = None
    tagset: list | None = None
    seed: int = 0

    def dev_report(self) -> dict:
        return {"seed": self.seed, "dev_score": self.dev_score,
                "history": [list(h) for h in self.history]}


def _clone_with_head(pretrained: dict | None, enc_cfg: EncoderConfig,
                     head: dict, rng) -> dict:
    if pretrained is None:
        params = init_params(enc_cfg, rng)
    else:
        params = {k: ag.parameter(v.data.copy() if isinstance(v, ag.Tensor) else np.array(v))
                  for k, v in pretrained.items()}
    for k in ("lm_w", "lm_b", "wp_w", "wp_b", "ap_w", "ap_b"):
        params.pop(k, None)  # pre-training heads are not part of the task model
    params.update(head)
    return params


def finetune_classifier(pretrained, enc_cfg: EncoderConfig, train_rows, dev_rows,
                        vocab, cfg: FinetuneConfig, label_map=None,
                        out_dir=None) -> FinetuneResult:
    if label_map is None:
        label_map = label_mapping([r.label for r in train_rows])
    for r in train_rows + dev_rows:
        if r.label not in label_map:
            raise DataError(f"label {r.label!r} absent from training label set")
    master = np.random.SeedSequence(cfg.seed)
    init_ss, shuffle_ss, drop_ss = master.spawn(3)
    head = init_classifier_head(enc_cfg.hidden_dim, len(label_map))
    params = _clone_with_head(pretrained, enc_cfg, head, np.random.default_rng(init_ss))
    opt = ag.Adam(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)

    history = []
    last_good = None
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_rows))
        total_loss, n_batches = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [train_rows[i] for i in order[lo: lo + cfg.batch_size]]
            seqs = [_encode_row(r, vocab, enc_cfg.max_seq_len) for r in chunk]
            batch = pad_batch(seqs)
            try:
                logits = class_logits(params, enc_cfg, batch.ids, batch.attn,
                                      train=True, rng=drop_rng)
                logp = ag.log_softmax(logits, axis=-1)
                rows = np.arange(len(chunk))
                cols = np.asarray([label_map[r.label] for r in chunk])
                picked = ag.take(logp, (rows, cols))
                loss = ag.mul(ag.tmean(picked), -1.0)
                if not np.isfinite(loss.data):
                    raise NumericalError("non-finite loss")
            except NumericalError as err:
                raise _diverged(out_dir, last_good, enc_cfg, epoch, err) from err
            last_good = {k: v.data.copy() for k, v in params.items()}
            ag.zero_grads(params)
            loss.backward()
            ag.clip_grad_norm(params, cfg.grad_clip)
            opt.step()
            total_loss += float(loss.data)
            n_batches += 1
        try:
            dev_score = evaluate_classifier(params, enc_cfg, dev_rows, vocab, label_map)
        except NumericalError as err:
            raise _diverged(out_dir, last_good, enc_cfg, epoch, err) from err
        history.append((epoch, total_loss / max(1, n_batches), dev_score))
    return FinetuneResult(params, history[-1][2], history, label_map=label_map,
                          seed=cfg.seed)


def finetune_orl(pretrained, enc_cfg: EncoderConfig, train_sents, dev_sents,
                 vocab, cfg: FinetuneConfig, tagset=None,
                 out_dir=None) -> FinetuneResult:
    if tagset is None:
        roles = sorted({t.split("-", 1)[1] for s in train_sents for t in s.tags if t != "O"})
        if not roles:
            raise DataError("training data contains no labeled spans")
        tagset = make_tagset(roles)
    tag_index = {t: i for i, t in enumerate(tagset)}
    master = np.random.SeedSequence(cfg.seed)
    init_ss, shuffle_ss, drop_ss = master.spawn(3)
    head = init_orl_head(enc_cfg.hidden_dim, len(tagset))
    params = _clone_with_head(pretrained, enc_cfg, head, np.random.default_rng(init_ss))
    opt = ag.Adam(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    drop_rng = np.random.default_rng(drop_ss)

    history = []
    last_good = None
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_sents))
        total_loss, n_batches = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [train_sents[i] for i in order[lo: lo + cfg.batch_size]]
            seqs = [encode_sentence(s.tokens, vocab, enc_cfg.max_seq_len) for s in chunk]
            batch = pad_batch(seqs)
            try:
                em = emission_scores(params, enc_cfg, batch.ids, batch.attn,
                                     train=True, rng=drop_rng)
                crf = crf_view(params)
                terms = []
                for b, s in enumerate(chunk):
                    n = min(len(s.tokens), enc_cfg.max_seq_len - 1)
                    rows = ag.take(em, (b, slice(1, 1 + n)))
                    tags = [tag_index[t] for t in s.tags[:n]]
                    terms.append(crf_nll(rows, tags, crf))
                loss = ag.mul(_tensor_sum(terms), 1.0 / len(chunk))
                if not np.isfinite(loss.data):
                    raise NumericalError("non-finite loss")
            except NumericalError as err:
                raise _diverged(out_dir, last_good, enc_cfg, epoch, err) from err
            last_good = {k: v.data.copy() for k, v in params.items()}
            ag.zero_grads(params)
            loss.backward()
            ag.clip_grad_norm(params, cfg.grad_clip)
            opt.step()
            total_loss += float(loss.data)
            n_batches += 1
        try:
            report = evaluate_orl(params, enc_cfg, dev_sents, vocab, tagset)
        except NumericalError as err:
            raise _diverged(out_dir, last_good, enc_cfg, epoch, err) from err
        dev_score = report["micro"]["binary"].f1
        history.append((epoch, total_loss / max(1, n_batches), dev_score))
    return FinetuneResult(params, history[-1][2], history, tagset=tagset,
                          seed=cfg.seed)


def _tensor_sum(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = ag.add(acc, t)
    return acc


def _diverged(out_dir, last_good, enc_cfg, epoch, err):
    """last_good holds the parameters that most recently produced a finite loss."""
    hint = ""
    if out_dir is not None and last_good is not None:
        path = os.path.join(out_dir, "last_good.ckpt")
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(path, enc_cfg.to_dict(), last_good)
        hint = f"; last good parameters saved to {path}"
    return NumericalError(f"fine-tuning diverged in epoch {epoch}: {err}{hint}")


# ---------------------------------------------------------------------------
# seed protocol, hyperparameter grids, cross-validation

def median_of_three(results) -> FinetuneResult:
    """The run whose dev score is the middle of the three (ties by seed)."""
    if len(results) != 3:
        raise ContractError(f"median selection needs exactly 3 runs, got {len(results)}")
    ranked = sorted(results, key=lambda r: (r.dev_score, r.seed))
    return ranked[1]


def run_three_seeds(run_one, seeds=(0, 1, 2)):
    """run_one(seed) -> FinetuneResult; returns (all results, median pick)."""
    if len(seeds) != 3 or len(set(seeds)) != 3:
        raise ContractError("need 3 distinct seeds")
    results = [run_one(s) for s in seeds]
    return results, median_of_three(results)


def parse_grid(text: str) -> list[dict]:
    """key=v1,v2 lines -> one dict per point of the cartesian product."""
    axes = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"grid line {ln}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key in axes:
            raise UsageError(f"grid line {ln}: duplicate key {key!r}")
        values = [_coerce(v.strip()) for v in val.split(",") if v.strip()]
        if not values:
            raise UsageError(f"grid line {ln}: no values for {key!r}")
        axes[key] = values
    if not axes:
        raise UsageError("empty hyperparameter grid")
    keys = sorted(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _coerce(s: str):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def fold_of(doc_id: str, n_folds: int = 4) -> int:
    """Stable fold assignment from the document id alone."""
    digest = hashlib.md5(doc_id.encode("utf-8")).hexdigest()
    return int(digest, 16) % n_folds


def cv_splits(sentences, n_folds: int = 4):
    """(train, heldout) per fold, grouped so a document never straddles a split."""
    folds = [fold_of(s.doc_id, n_folds) for s in sentences]
    if len(set(folds)) < n_folds:
        raise DataError(f"{n_folds}-fold split needs documents in every fold; "
                        f"got folds {sorted(set(folds))}")
    out = []
    for k in range(n_folds):
        train = [s for s, f in zip(sentences, folds) if f != k]
        held = [s for s, f in zip(sentences, folds) if f == k]
        out.append((train, held))
    return out
