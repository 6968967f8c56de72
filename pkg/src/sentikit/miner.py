"""Unsupervised sentiment-knowledge mining.

Builds a polarity lexicon from co-occurrence with a small set of seed words,
then extracts aspect-sentiment word pairs by nearest-noun attachment.

Word polarity score:  wp(w) = sum_{s+} pmi(w, s+) - sum_{s-} pmi(w, s-)
with the sums restricted to seeds that actually co-occur with w.

pmi(w, s) = log((1 - a) * r + a)  where  r = p(w, s) / (p(w) p(s))
and a is a smoothing weight that pulls the ratio toward independence.
a = 0 recovers plain PMI and is undefined for never-co-occurring pairs.
"""
from __future__ import annotations

import importlib.resources
import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import ContractError, DataError, FormatError, NumericalError
from .postag import Tagger

POS, NEG = 1, -1


@dataclass(frozen=True)
class MinerConfig:
    window: int = 10          # co-occurrence window (token distance, same sentence)
    smoothing: float = 0.1    # interpolation toward independence; 0 = plain PMI
    min_word_freq: int = 5    # candidate words rarer than this are dropped
    pair_window: int = 3      # max distance from sentiment word to its aspect noun
    min_pair_freq: int = 2    # mined pairs rarer than this are dropped
    pos_filter: bool = True   # restrict candidates to ADJ/ADV tokens
    max_words: int | None = None  # cap mined (non-seed) entries, by |score|

    def __post_init__(self):
        if self.window < 1 or self.pair_window < 1:
            raise ContractError("windows must be >= 1")
        if not 0.0 <= self.smoothing < 1.0:
            raise ContractError("smoothing must be in [0, 1)")


class SeedSet:
    """Seed words with fixed polarity; the anchor of the mining stage."""

    def __init__(self, positive, negative):
        self.positive = frozenset(positive)
        self.negative = frozenset(negative)
        overlap = self.positive & self.negative
        if overlap:
            raise ContractError(f"seeds listed with both polarities: {sorted(overlap)}")
        if not self.positive or not self.negative:
            raise ContractError("need at least one seed of each polarity")

    @property
    def all(self):
        return self.positive | self.negative

    def polarity(self, word: str) -> int:
        if word in self.positive:
            return POS
        if word in self.negative:
            return NEG
        return 0

    @classmethod
    def load(cls, path=None) -> "SeedSet":
        if path is None:
            ref = importlib.resources.files("sentikit.data").joinpath("seed_words.tsv")
            text = ref.read_text(encoding="utf-8")
            src = "seed_words.tsv"
        else:
            try:
                with open(path, encoding="utf-8") as f:
                    text = f.read()
            except OSError as e:
                raise DataError(f"cannot read seed file {path}: {e}") from e
            src = str(path)
        pos, neg = [], []
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("+", "-"):
                raise FormatError(f"{src}:{n}: expected word<TAB>+ or word<TAB>-")
            (pos if parts[1] == "+" else neg).append(parts[0])
        return cls(pos, neg)


@dataclass
class CoocStats:
    """Corpus counts needed for PMI. Mergeable across shards by summation."""

    window: int
    n_tokens: int = 0
    word_counts: Counter = field(default_factory=Counter)
    # (word, seed) -> co-occurrence events within `window`
    pair_counts: Counter = field(default_factory=Counter)
    n_events: int = 0

    def merge(self, other: "CoocStats") -> "CoocStats":
        if other.window != self.window:
            raise ContractError("cannot merge stats with different windows")
        self.n_tokens += other.n_tokens
        self.word_counts.update(other.word_counts)
        self.pair_counts.update(other.pair_counts)
        self.n_events += other.n_events
        return self


def collect_stats(sentences, seeds: SeedSet, window: int = 10) -> CoocStats:
    """One pass over the corpus. An event is a position pair (i, j), i != j,
    |i - j| <= window, where token j is a seed; duplicates count every time."""
    stats = CoocStats(window=window)
    seed_words = seeds.all
    for tokens in sentences:
        stats.n_tokens += len(tokens)
        stats.word_counts.update(tokens)
        seed_pos = [j for j, t in enumerate(tokens) if t in seed_words]
        if not seed_pos:
            continue
        for j in seed_pos:
            s = tokens[j]
            lo, hi = max(0, j - window), min(len(tokens), j + window + 1)
            for i in range(lo, hi):
                if i == j:
                    continue
                stats.pair_counts[(tokens[i], s)] += 1
                stats.n_events += 1
    return stats


def pmi(stats: CoocStats, word: str, seed: str, smoothing: float) -> float:
    c_ws = stats.pair_counts.get((word, seed), 0)
    c_w = stats.word_counts.get(word, 0)
    c_s = stats.word_counts.get(seed, 0)
    if c_w == 0 or c_s == 0 or stats.n_events == 0:
        raise NumericalError(f"pmi undefined: no occurrences for ({word!r}, {seed!r})")
    r = (c_ws / stats.n_events) / ((c_w / stats.n_tokens) * (c_s / stats.n_tokens))
    v = (1.0 - smoothing) * r + smoothing
    if v <= 0.0:
        raise NumericalError(
            f"pmi undefined for ({word!r}, {seed!r}): zero co-occurrence with smoothing=0"
        )
    return math.log(v)


def polarity_score(stats: CoocStats, seeds: SeedSet, word: str, smoothing: float):
    """Seed-contrast score, or None when the word co-occurs with no seed."""
    total = 0.0
    seen = False
    for s in seeds.positive:
        if stats.pair_counts.get((word, s), 0) > 0:
            total += pmi(stats, word, s, smoothing)
            seen = True
    for s in seeds.negative:
        if stats.pair_counts.get((word, s), 0) > 0:
            total -= pmi(stats, word, s, smoothing)
            seen = True
    return total if seen else None


@dataclass
class LexiconEntry:
    word: str
    polarity: int  # POS or NEG
    score: float
    freq: int
    is_seed: bool = False


class SentimentLexicon:
    """Mined word -> polarity map, the knowledge source for masking."""

    def __init__(self, entries):
        self.entries: dict[str, LexiconEntry] = {}
        for e in entries:
            if e.word in self.entries:
                raise ContractError(f"duplicate lexicon entry {e.word!r}")
            if e.polarity not in (POS, NEG):
                raise ContractError(f"bad polarity for {e.word!r}")
            if (e.score > 0) != (e.polarity == POS):
                raise ContractError(f"score/polarity sign mismatch for {e.word!r}")
            self.entries[e.word] = e

    def __contains__(self, word):
        return word in self.entries

    def __len__(self):
        return len(self.entries)

    def polarity(self, word: str) -> int:
        e = self.entries.get(word)
        return e.polarity if e else 0

    def words(self):
        return self.entries.keys()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("# word\tpolarity\tscore\tfreq\torigin\n")
            order = sorted(self.entries.values(), key=lambda e: (-e.score, e.word))
            for e in order:
                pol = "POS" if e.polarity == POS else "NEG"
                origin = "seed" if e.is_seed else "mined"
                f.write(f"{e.word}\t{pol}\t{e.score:.10g}\t{e.freq}\t{origin}\n")

    @classmethod
    def load(cls, path) -> "SentimentLexicon":
        try:
            with open(path, encoding="utf-8") as f:
                lines = f.readlines()
        except OSError as e:
            raise DataError(f"cannot read lexicon {path}: {e}") from e
        entries = []
        for n, line in enumerate(lines, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5 or parts[1] not in ("POS", "NEG") or parts[4] not in ("seed", "mined"):
                raise FormatError(f"{path}:{n}: bad lexicon row")
            try:
                score = float(parts[2])
                freq = int(parts[3])
            except ValueError as e:
                raise FormatError(f"{path}:{n}: bad numeric field") from e
            entries.append(LexiconEntry(parts[0], POS if parts[1] == "POS" else NEG,
                                        score, freq, parts[4] == "seed"))
        if not entries:
            raise DataError(f"lexicon {path} is empty")
        return cls(entries)


# Sentinel magnitude for seeds whose mined score is missing or has the wrong
# sign; keeps the polarity <=> sign(score) invariant while pinning polarity.
SEED_SENTINEL = 1.0


@dataclass
class MiningResult:
    lexicon: SentimentLexicon
    pairs: list  # list[PairEntry]
    stats: CoocStats
    n_candidates: int = 0
    n_seed_overrides: int = 0  # seeds whose mined score disagreed in sign


def mine_lexicon(sentences, seeds: SeedSet, config: MinerConfig,
                 tagger: Tagger | None = None,
                 stats: CoocStats | None = None) -> MiningResult:
    if tagger is None:
        tagger = Tagger()
    if stats is None:
        stats = collect_stats(sentences, seeds, config.window)

    entries = []
    overrides = 0
    for word in sorted(seeds.all):
        pol = seeds.polarity(word)
        score = polarity_score(stats, seeds, word, config.smoothing)
        if score is None or (score > 0) != (pol == POS):
            score = SEED_SENTINEL * pol
            overrides += 1
        entries.append(LexiconEntry(word, pol, score, stats.word_counts.get(word, 0), True))

    candidates = []
    for word, freq in stats.word_counts.items():
        if freq < config.min_word_freq or word in seeds.all:
            continue
        if config.pos_filter and tagger.tag_token(word) not in ("ADJ", "ADV"):
            continue
        candidates.append(word)
    candidates.sort()

    mined = []
    for word in candidates:
        score = polarity_score(stats, seeds, word, config.smoothing)
        if score is None:
            continue
        pol = POS if score > 0 else NEG
        if score == 0.0:
            score = -1e-12  # exact zero carries no evidence either way; call it NEG
        mined.append(LexiconEntry(word, pol, score, stats.word_counts[word], False))
    if config.max_words is not None:
        mined.sort(key=lambda e: (-abs(e.score), e.word))
        mined = mined[: config.max_words]

    lexicon = SentimentLexicon(entries + mined)
    pairs = mine_pairs(sentences, lexicon, tagger, config.pair_window, config.min_pair_freq)
    return MiningResult(lexicon, pairs, stats, len(candidates), overrides)


# ---------------------------------------------------------------------------
# aspect-sentiment pairs

@dataclass
class PairEntry:
    aspect: str
    sentiment: str
    count: int


def nearest_noun(tags, pos: int, window: int, taken=None) -> int | None:
    """Closest NOUN position within `window` of `pos`; ties prefer the left."""
    for d in range(1, window + 1):
        for cand in (pos - d, pos + d):
            if 0 <= cand < len(tags) and tags[cand] == "NOUN":
                if taken is None or cand not in taken:
                    return cand
    return None


def mine_pairs(sentences, lexicon: SentimentLexicon, tagger: Tagger,
               pair_window: int = 3, min_pair_freq: int = 2) -> list[PairEntry]:
    """Count (aspect noun, sentiment word) attachments over the corpus.

    Counting is per sentiment-word occurrence, without consuming nouns, so
    one noun may anchor several sentiment words in the same sentence.
    """
    counts = Counter()
    for tokens in sentences:
        tags = tagger.tag(tokens)
        for i, t in enumerate(tokens):
            if t not in lexicon:
                continue
            j = nearest_noun(tags, i, pair_window)
            if j is not None:
                counts[(tokens[j], t)] += 1
    out = [PairEntry(a, s, c) for (a, s), c in counts.items() if c >= min_pair_freq]
    out.sort(key=lambda p: (-p.count, p.aspect, p.sentiment))
    return out


def save_pairs(pairs, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("# aspect\tsentiment\tcount\n")
        for p in pairs:
            f.write(f"{p.aspect}\t{p.sentiment}\t{p.count}\n")


def load_pairs(path) -> list[PairEntry]:
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read pairs {path}: {e}") from e
    out = []
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}:{n}: expected aspect<TAB>sentiment<TAB>count")
        try:
            out.append(PairEntry(parts[0], parts[1], int(parts[2])))
        except ValueError as e:
            raise FormatError(f"{path}:{n}: bad count") from e
    return out


# ---------------------------------------------------------------------------
# bundled knowledge artifact

@dataclass
class Knowledge:
    """Everything the masking stage needs: word polarities plus known pairs."""

    lexicon: SentimentLexicon
    pairs: list  # list[PairEntry]

    @property
    def pair_set(self) -> frozenset:
        return frozenset((p.aspect, p.sentiment) for p in self.pairs)

    @classmethod
    def load(cls, lexicon_path, pairs_path) -> "Knowledge":
        return cls(SentimentLexicon.load(lexicon_path), load_pairs(pairs_path))
