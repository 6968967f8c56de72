"""Tokenization, vocabulary, and dataset loaders.

Text is lowercased and split into alphanumeric runs (with internal
apostrophes) plus single punctuation marks. One input line = one sentence.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from .errors import ContractError, DataError, FormatError

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*|[^\sa-z0-9]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split; never produces a token that collides with a special."""
    return _TOKEN_RE.findall(text.lower())


class Vocab:
    """Bidirectional token<->id map with the five reserved specials at ids 0..4."""

    def __init__(self, tokens):
        self.itos = list(tokens)
        if tuple(self.itos[:5]) != SPECIALS:
            raise ContractError(f"vocab must start with {SPECIALS}")
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            dup = [t for t, n in Counter(self.itos).items() if n > 1]
            raise ContractError(f"duplicate vocab entries: {dup[:5]}")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def encode(self, tokens) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for t in self.itos:
                f.write(t + "\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as f:
                tokens = [line.rstrip("\n") for line in f]
        except OSError as e:
            raise DataError(f"cannot read vocab file {path}: {e}") from e
        while tokens and tokens[-1] == "":
            tokens.pop()
        if len(tokens) < 5 or tuple(tokens[:5]) != SPECIALS:
            raise FormatError(f"{path} is not a vocab file (bad specials header)")
        return cls(tokens)


def build_vocab(sentences, min_freq: int = 1, max_size: int | None = None) -> Vocab:
    """Frequency-sorted vocab (ties alphabetical). max_size includes the specials."""
    counts = Counter()
    for sent in sentences:
        counts.update(sent)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_freq and t not in SPECIALS),
        key=lambda t: (-counts[t], t),
    )
    if max_size is not None:
        if max_size < len(SPECIALS):
            raise ContractError(f"max_size={max_size} cannot fit the {len(SPECIALS)} specials")
        kept = kept[: max_size - len(SPECIALS)]
    return Vocab(list(SPECIALS) + kept)


def read_corpus(path) -> list[list[str]]:
    """One sentence per line; blank lines are skipped."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read corpus {path}: {e}") from e
    sents = []
    for line in lines:
        toks = tokenize(line)
        if toks:
            sents.append(toks)
    if not sents:
        raise DataError(f"corpus {path} contains no sentences")
    return sents


@dataclass
class LabeledExample:
    """Sentence-level classification row. `aspect` is set for aspect-level data."""

    tokens: list[str]
    label: str
    aspect: list[str] | None = None


def load_classification_tsv(path) -> list[LabeledExample]:
    """label<TAB>text, or label<TAB>aspect<TAB>text for aspect-level tasks."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e
    out = []
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) == 2:
            label, text = parts
            aspect = None
        elif len(parts) == 3:
            label, asp, text = parts
            aspect = tokenize(asp)
            if not aspect:
                raise FormatError(f"{path}:{n}: empty aspect field")
        else:
            raise FormatError(f"{path}:{n}: expected 2 or 3 tab-separated fields, got {len(parts)}")
        label = label.strip()
        toks = tokenize(text)
        if not label or not toks:
            raise FormatError(f"{path}:{n}: empty label or text")
        out.append(LabeledExample(toks, label, aspect))
    if not out:
        raise DataError(f"dataset {path} contains no examples")
    return out


@dataclass
class TaggedSentence:
    """One span-labeling block: surface tokens plus a BIOS tag per token."""

    tokens: list[str]
    tags: list[str]
    doc_id: str = ""


@dataclass
class ConllLoadResult:
    sentences: list[TaggedSentence]
    repaired_tags: int = 0  # orphan I- tags promoted to B-


def load_conll(path, tagset=None) -> ConllLoadResult:
    """Blank-line separated blocks of `token<TAB>tag` rows.

    `# doc_id = X` comments attach X to the following blocks until changed.
    An I- tag with no matching open span is repaired to B- and counted.
    """
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e

    sentences = []
    toks, tags = [], []
    doc_id = ""
    repaired = 0

    def flush():
        nonlocal toks, tags, repaired
        if not toks:
            return
        prev = "O"
        fixed = []
        for t in tags:
            if t.startswith("I-") and not (prev in (f"B-{t[2:]}", f"I-{t[2:]}")):
                t = "B-" + t[2:]
                repaired += 1
            fixed.append(t)
            prev = t
        sentences.append(TaggedSentence(toks, fixed, doc_id))
        toks, tags = [], []

    for n, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if line.startswith("#"):
            m = re.match(r"#\s*doc_id\s*=\s*(\S+)", line)
            if m:
                doc_id = m.group(1)
            continue
        if not line.strip():
            flush()
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{n}: expected token<TAB>tag, got {len(parts)} fields")
        tok, tag = parts
        if tagset is not None and tag not in tagset:
            raise FormatError(f"{path}:{n}: unknown tag {tag!r}")
        if tag != "O" and not re.fullmatch(r"[BIS]-\w+", tag):
            raise FormatError(f"{path}:{n}: malformed tag {tag!r}")
        toks.append(tok.lower())
        tags.append(tag)
    flush()
    if not sentences:
        raise DataError(f"{path} contains no tagged sentences")
    return ConllLoadResult(sentences, repaired)


@dataclass
class EncodedBatch:
    """Padded id matrix plus mask; built right-padded with [PAD]."""

    ids: "object"  # (B, T) int64
    attn: "object"  # (B, T) float, 1 where real token

    def __post_init__(self):
        if self.ids.shape != self.attn.shape:
            raise ContractError("ids and attn shapes differ")


def pad_batch(seqs, pad_id: int = PAD_ID):
    import numpy as np

    if not seqs:
        raise ContractError("empty batch")
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), pad_id, dtype=np.int64)
    attn = np.zeros((len(seqs), width), dtype=np.float64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        attn[i, : len(s)] = 1.0
    return EncodedBatch(ids, attn)
