"""Synthetic review-like corpora with controlled sentiment structure.

Used by the demo command and the behavioral test suites. The generator
plants 20 polar adjectives (10 per polarity) whose seed co-occurrence is
polarity-consistent at a configurable skew (default 10:1), and wires one
canonical (sentiment word, aspect noun) pair per (topic, polarity) so pair
mining, pair masking, and pair prediction all have recoverable structure:

  - every topic owns two nouns; a pair sentence shows one noun in the open
    and builds the canonical pair on the other, so the visible noun
    determines the hidden aspect;
  - free sentiment slots sit more than three tokens from any noun, keeping
    them word-level (they never form accidental pairs);
  - fillers are closed-class words and verbs, invisible to the miner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crf import TaggedSpan, bios_from_spans
from .errors import ContractError

TOPICS = (
    ("price", "shipping"),
    ("screen", "battery"),
    ("camera", "lens"),
    ("story", "ending"),
    ("service", "staff"),
)

PLANTED_POS = ("superb", "delightful", "flawless", "stunning", "marvelous",
               "charming", "graceful", "splendid", "radiant", "sublime")
PLANTED_NEG = ("awful", "terrible", "horrible", "dreadful", "lousy",
               "miserable", "pathetic", "dismal", "atrocious", "abysmal")

# canonical pair sentiment word per (topic, polarity): the first five
# planted words of each polarity, one per topic
def canonical_word(topic: int, positive: bool) -> str:
    return (PLANTED_POS if positive else PLANTED_NEG)[topic]


# seeds used in free sentiment slots; deliberately unambiguous ones
SLOT_SEEDS_POS = ("great", "good", "excellent", "nice", "love", "best")
SLOT_SEEDS_NEG = ("bad", "poor", "worst", "boring", "wrong", "disappointed")

_DETS = ("the", "my", "our")
_VERBS = ("got", "ordered", "bought", "tested")
_TAILS = ("overall", "honestly", "frankly")


@dataclass
class SyntheticConfig:
    skew: float = 10.0        # same-polarity : opposite-polarity seed exposure
    p_pair: float = 0.70      # sentence mix
    p_words: float = 0.15
    p_seed_slot: float = 0.5  # free slot draws a seed (vs a planted word)

    def __post_init__(self):
        if self.skew <= 0:
            raise ContractError("skew must be positive")
        if self.p_pair + self.p_words > 1.0:
            raise ContractError("sentence mix probabilities exceed 1")


def _flip(rng, positive: bool, skew: float) -> bool:
    """Keep polarity with probability skew/(skew+1)."""
    return positive if rng.random() < skew / (skew + 1.0) else not positive


def _slot_word(rng, positive: bool, cfg: SyntheticConfig) -> str:
    if rng.random() < cfg.p_seed_slot:
        pool = SLOT_SEEDS_POS if positive else SLOT_SEEDS_NEG
    else:
        pool = PLANTED_POS if positive else PLANTED_NEG
    return pool[rng.integers(len(pool))]


def pair_sentence(rng, cfg: SyntheticConfig, topic: int | None = None,
                  positive: bool | None = None) -> list:
    """One canonical pair plus two word-level slots, 16 tokens.

    Layout keeps the pair's noun adjacent to its sentiment word and every
    other sentiment slot at distance > 3 from any noun.
    """
    if topic is None:
        topic = int(rng.integers(len(TOPICS)))
    if positive is None:
        positive = bool(rng.integers(2))
    a, b = TOPICS[topic]
    visible, aspect = (a, b) if rng.integers(2) else (b, a)
    s = canonical_word(topic, positive)
    w1 = _slot_word(rng, positive, cfg)
    w2 = _slot_word(rng, _flip(rng, positive, cfg.skew), cfg)
    det = _DETS[rng.integers(len(_DETS))]
    verb = _VERBS[rng.integers(len(_VERBS))]
    return [det, visible, "was", "there", "and", "we", verb, "the",
            s, aspect, "so", "it", "was", w1, "and", w2]


def words_sentence(rng, cfg: SyntheticConfig, positive: bool | None = None) -> list:
    """No pairs; two word-level sentiment slots far from any noun."""
    if positive is None:
        positive = bool(rng.integers(2))
    w1 = _slot_word(rng, positive, cfg)
    w2 = _slot_word(rng, _flip(rng, positive, cfg.skew), cfg)
    verb = _VERBS[rng.integers(len(_VERBS))]
    tail = _TAILS[rng.integers(len(_TAILS))]
    return ["we", verb, "it", "again", "today", "and", "it", "was",
            w1, "and", "then", w2, tail]


def neutral_sentence(rng) -> list:
    noun = TOPICS[rng.integers(len(TOPICS))][rng.integers(2)]
    verb = ("arrived", "shipped")[rng.integers(2)]
    return ["the", noun, verb, "today", "and", "we", "opened", "the",
            "box", "then", "we", "went", "home"]


def generate_corpus(n_sentences: int, seed: int,
                    cfg: SyntheticConfig = SyntheticConfig()) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sentences):
        u = rng.random()
        if u < cfg.p_pair:
            out.append(pair_sentence(rng, cfg))
        elif u < cfg.p_pair + cfg.p_words:
            out.append(words_sentence(rng, cfg))
        else:
            out.append(neutral_sentence(rng))
    return out


def generate_pair_holdout(n_sentences: int, seed: int,
                          cfg: SyntheticConfig = SyntheticConfig()) -> list:
    """(tokens, aspect word, sentiment word) triples, pair template only."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sentences):
        topic = int(rng.integers(len(TOPICS)))
        positive = bool(rng.integers(2))
        toks = pair_sentence(rng, cfg, topic, positive)
        out.append((toks, toks[9], toks[8]))
    return out


# ---------------------------------------------------------------------------
# labeled datasets for fine-tuning

POS_LABEL, NEG_LABEL = "pos", "neg"


def _polar_words(positive: bool, heldout: bool):
    planted = PLANTED_POS if positive else PLANTED_NEG
    seeds = SLOT_SEEDS_POS if positive else SLOT_SEEDS_NEG
    if heldout:
        return list(planted[5:])          # never shown to fine-tuning
    return list(planted[:5]) + list(seeds[:3])


def classification_sentence(rng, positive: bool, heldout: bool) -> list:
    pool = _polar_words(positive, heldout)
    w1 = pool[rng.integers(len(pool))]
    w2 = pool[rng.integers(len(pool))]
    verb = _VERBS[rng.integers(len(_VERBS))]
    tail = _TAILS[rng.integers(len(_TAILS))]
    return ["we", verb, "it", "again", "today", "and", "it", "was",
            w1, "and", "then", w2, tail]


def generate_classification(n_train: int, n_dev: int, seed: int):
    """Balanced sentence-level dataset as (label, tokens) lists.

    The dev split only uses polar words held out from the train split; a
    model can close that gap only with knowledge picked up before
    fine-tuning.
    """
    rng = np.random.default_rng(seed)
    train, dev = [], []
    for i in range(n_train):
        positive = i % 2 == 0
        label = POS_LABEL if positive else NEG_LABEL
        train.append((label, classification_sentence(rng, positive, heldout=False)))
    for i in range(n_dev):
        positive = i % 2 == 0
        label = POS_LABEL if positive else NEG_LABEL
        dev.append((label, classification_sentence(rng, positive, heldout=True)))
    return train, dev


def generate_aspect(n_train: int, n_dev: int, seed: int):
    """Two-aspect sentences; the label depends on which aspect is queried."""
    rng = np.random.default_rng(seed)

    def make(n, heldout):
        rows = []
        while len(rows) < n:
            topic = int(rng.integers(len(TOPICS)))
            a, b = TOPICS[topic]
            qa = bool(rng.integers(2))
            wa = _polar_words(qa, heldout)[rng.integers(len(_polar_words(qa, heldout)))]
            wb = _polar_words(not qa, heldout)[rng.integers(len(_polar_words(not qa, heldout)))]
            text = ["the", a, "was", wa, "but", "the", b, "was", wb]
            rows.append((POS_LABEL if qa else NEG_LABEL, [a], text))
            if len(rows) < n:
                rows.append((NEG_LABEL if qa else POS_LABEL, [b], text))
        return rows

    return make(n_train, False), make(n_dev, True)


def generate_orl(n_train: int, n_dev: int, seed: int):
    """Opinion role sentences as (tokens, BIOS tags, doc_id) triples."""
    rng = np.random.default_rng(seed)
    holders = ("we", "they", "i", "everyone")

    def make(n, offset):
        rows = []
        for i in range(n):
            topic = int(rng.integers(len(TOPICS)))
            noun = TOPICS[topic][rng.integers(2)]
            positive = bool(rng.integers(2))
            w = _slot_word(rng, positive, SyntheticConfig())
            holder = holders[rng.integers(len(holders))]
            if rng.integers(2):
                toks = [holder, "said", "the", noun, "was", w, "yesterday"]
                spans = [TaggedSpan("H", 0, 0), TaggedSpan("T", 2, 3)]
            else:
                toks = [holder, "told", "us", noun, "was", w]
                spans = [TaggedSpan("H", 0, 0), TaggedSpan("T", 3, 3)]
            rows.append((toks, bios_from_spans(spans, len(toks)), f"doc{offset + i:04d}"))
        return rows

    return make(n_train, 0), make(n_dev, n_train)


# ---------------------------------------------------------------------------
# file writers (the CLI demo materializes datasets with these)

def write_corpus(sentences, path):
    with open(path, "w", encoding="utf-8") as f:
        for toks in sentences:
            f.write(" ".join(toks) + "\n")


def write_classification(rows, path, with_aspect: bool = False):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            if with_aspect:
                label, aspect, toks = row
                f.write(f"{label}\t{' '.join(aspect)}\t{' '.join(toks)}\n")
            else:
                label, toks = row
                f.write(f"{label}\t{' '.join(toks)}\n")


def write_conll(rows, path):
    with open(path, "w", encoding="utf-8") as f:
        for toks, tags, doc_id in rows:
            f.write(f"# doc_id = {doc_id}\n")
            for t, g in zip(toks, tags):
                f.write(f"{t}\t{g}\n")
            f.write("\n")
