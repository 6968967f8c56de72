"""Sentiment detection and knowledge-directed masking.

Each sentence is classified position by position into PAIR / SENTIMENT /
COMMON against the mined knowledge, then corrupted in three steps:

  1. up to `max_pairs` detected pairs, all tokens -> [MASK], one multi-label
     target per pair, polarity targets on the pair's sentiment tokens;
  2. remaining sentiment words, whole words -> [MASK], word + polarity
     targets, never exceeding the budget;
  3. the budget remainder, random common positions with the 80/10/10
     mask/random-id/keep rule, word targets only.

The budget for steps 2 and 3 together is max(1, floor(rate * n)) over the
n sentence tokens; pair masking rides on top of it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import CLS_ID, MASK_ID, Vocab
from .errors import ContractError, DataError, FormatError
from .miner import Knowledge, nearest_noun
from .postag import Tagger

PAIR, SENTIMENT, COMMON = "PAIR", "SENTIMENT", "COMMON"
MODES = ("hybrid", "words", "random")


@dataclass(frozen=True)
class MaskConfig:
    budget_rate: float = 0.10
    max_pairs: int = 2
    mode: str = "hybrid"
    mask_prob: float = 0.8   # common-fill branch probabilities
    random_prob: float = 0.1
    pair_window: int = 3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}")
        if not 0.0 < self.budget_rate <= 1.0:
            raise ContractError("budget_rate must be in (0, 1]")
        if self.mask_prob + self.random_prob > 1.0:
            raise ContractError("mask_prob + random_prob must be <= 1")


@dataclass
class DetectionResult:
    """Per-sentence knowledge hits, in sentence-token coordinates."""

    pair_spans: list   # [(aspect positions, sentiment positions), ...]
    sentiment_word_spans: list  # [positions, ...] outside any pair
    classes: list      # per position: PAIR | SENTIMENT | COMMON

    def validate(self):
        seen = set()
        for apos, spos in self.pair_spans:
            for p in list(apos) + list(spos):
                if p in seen:
                    raise ContractError("overlapping detection spans")
                seen.add(p)
                if self.classes[p] != PAIR:
                    raise ContractError("pair position not classed PAIR")
        for span in self.sentiment_word_spans:
            for p in span:
                if p in seen:
                    raise ContractError("overlapping detection spans")
                seen.add(p)
                if self.classes[p] != SENTIMENT:
                    raise ContractError("sentiment position not classed SENTIMENT")


def detect(tokens, knowledge: Knowledge, tagger: Tagger,
           pair_window: int = 3) -> DetectionResult:
    """Greedy left-to-right detection; a detected pair consumes both words.

    A sentiment word pairs with its nearest free noun only when that exact
    (noun, word) combination was mined; there is no second-nearest fallback.
    Lexicon hits that stay unpaired are sentiment-word spans.
    """
    lexicon = knowledge.lexicon
    pair_set = knowledge.pair_set
    tags = tagger.tag(tokens)
    hits = [i for i, t in enumerate(tokens) if t in lexicon]
    consumed = set()
    pair_spans = []
    for i in hits:
        if i in consumed:
            continue
        j = nearest_noun(tags, i, pair_window, consumed)
        if j is not None and (tokens[j], tokens[i]) in pair_set:
            pair_spans.append(([j], [i]))
            consumed.add(i)
            consumed.add(j)
    word_spans = [[i] for i in hits if i not in consumed]

    classes = [COMMON] * len(tokens)
    for apos, spos in pair_spans:
        for p in list(apos) + list(spos):
            classes[p] = PAIR
    for span in word_spans:
        for p in span:
            classes[p] = SENTIMENT
    return DetectionResult(pair_spans, word_spans, classes)


def build_ap_target(pair_token_ids, vocab_size: int) -> np.ndarray:
    """Multi-hot vocab vector with a 1 at every id the pair contains."""
    if len(pair_token_ids) == 0:
        raise ContractError("empty pair")
    y = np.zeros(vocab_size, dtype=np.float64)
    y[np.asarray(pair_token_ids, dtype=np.int64)] = 1.0
    return y


@dataclass
class MaskedExample:
    """Parallel (corrupted, original) ids plus per-objective targets.

    Positions are in corrupted coordinates, where [CLS] sits at 0 and
    sentence token i at i + 1. `ap_targets` keeps the sparse id lists; use
    build_ap_target to densify. `pair_spans` records the masked pairs'
    (aspect positions, sentiment positions) for pair-vector prediction.
    """

    corrupted: list
    original: list
    sw_targets: list          # [(position, original id), ...]
    wp_targets: list          # [(position, polarity01), ...]
    ap_targets: list          # [sorted unique ids, ...] one per masked pair
    pair_spans: list = field(default_factory=list)
    seed: int = 0

    def validate(self, max_pairs: int = 2):
        if len(self.corrupted) != len(self.original):
            raise ContractError("corrupted/original length mismatch")
        if self.corrupted[0] != CLS_ID or self.original[0] != CLS_ID:
            raise ContractError("position 0 must be [CLS]")
        if len(self.ap_targets) > max_pairs or len(self.pair_spans) != len(self.ap_targets):
            raise ContractError("pair bookkeeping out of shape")
        pair_pos = {p for apos, spos in self.pair_spans for p in list(apos) + list(spos)}
        sw_pos = {p for p, _ in self.sw_targets}
        wp_pos = {p for p, _ in self.wp_targets}
        if sw_pos & pair_pos:
            raise ContractError("pair position leaked into sw_targets")
        pair_sent = {p for _, spos in self.pair_spans for p in spos}
        if not wp_pos <= (pair_sent | (sw_pos - pair_pos)):
            raise ContractError("wp target outside sentiment/pair positions")
        for p in pair_pos:
            if self.corrupted[p] != MASK_ID:
                raise ContractError("pair position not [MASK]")
        for p, pol in self.wp_targets:
            if pol not in (0, 1):
                raise ContractError("polarity must be 0 or 1")
            if self.corrupted[p] != MASK_ID:
                raise ContractError("wp position not [MASK]")
        for p, orig in self.sw_targets:
            if self.original[p] != orig:
                raise ContractError("sw target id disagrees with original")
        for apos, spos in self.pair_spans:
            dist = min(abs(a - s) for a in apos for s in spos)
            if dist < 1:
                raise ContractError("degenerate pair span")

    def restore(self) -> list:
        """Round-trip check helper: un-corrupt every recorded position."""
        out = list(self.corrupted)
        for p, orig in self.sw_targets:
            out[p] = orig
        for p, _ in self.wp_targets:
            out[p] = self.original[p]
        for apos, spos in self.pair_spans:
            for p in list(apos) + list(spos):
                out[p] = self.original[p]
        return out


def budget_for(n_tokens: int, rate: float) -> int:
    return max(1, int(rate * n_tokens))


def mask(tokens, detection: DetectionResult, vocab: Vocab,
         knowledge: Knowledge, rng_seed, config: MaskConfig = MaskConfig(),
         record_seed: int = 0) -> MaskedExample:
    """Corrupt one sentence. Deterministic given (tokens, rng_seed, config)."""
    if not tokens:
        raise ContractError("cannot mask an empty sentence")
    rng = np.random.default_rng(rng_seed)
    n = len(tokens)
    ids = vocab.encode(tokens)
    original = [CLS_ID] + ids
    corrupted = list(original)
    off = 1  # sentence token i lives at corrupted position i + 1

    sw_targets, wp_targets, ap_targets, pair_spans = [], [], [], []
    masked = set()

    def polarity01(word):
        return 1 if knowledge.lexicon.polarity(word) > 0 else 0

    # step 1: pair masking
    if config.mode == "hybrid" and detection.pair_spans:
        order = rng.permutation(len(detection.pair_spans))
        for k in order[: config.max_pairs]:
            apos, spos = detection.pair_spans[k]
            span_ids = sorted({ids[p] for p in list(apos) + list(spos)})
            ap_targets.append(span_ids)
            pair_spans.append(([p + off for p in apos], [p + off for p in spos]))
            for p in list(apos) + list(spos):
                corrupted[p + off] = MASK_ID
                masked.add(p)
            for p in spos:
                wp_targets.append((p + off, polarity01(tokens[p])))

    # steps 2 and 3 share the budget
    budget = budget_for(n, config.budget_rate)
    used = 0

    if config.mode in ("hybrid", "words"):
        candidates = [s for s in detection.sentiment_word_spans
                      if not any(p in masked for p in s)]
        if candidates:
            for k in rng.permutation(len(candidates)):
                span = candidates[k]
                if used + len(span) > budget:
                    continue  # whole word or nothing
                used += len(span)
                for p in span:
                    corrupted[p + off] = MASK_ID
                    masked.add(p)
                    sw_targets.append((p + off, ids[p]))
                    wp_targets.append((p + off, polarity01(tokens[p])))

    if config.mode == "random":
        common = [p for p in range(n) if p not in masked]
    else:
        common = [p for p in range(n)
                  if detection.classes[p] == COMMON and p not in masked]
    remainder = budget - used
    if remainder > 0 and common:
        take = min(remainder, len(common))
        chosen = rng.choice(len(common), size=take, replace=False)
        for c in sorted(chosen):
            p = common[c]
            branch = rng.random()
            if branch < config.mask_prob:
                corrupted[p + off] = MASK_ID
            elif branch < config.mask_prob + config.random_prob:
                corrupted[p + off] = int(rng.integers(5, len(vocab)))
            # else: keep the original token
            masked.add(p)
            sw_targets.append((p + off, ids[p]))

    sw_targets.sort()
    wp_targets.sort()
    ex = MaskedExample(corrupted, original, sw_targets, wp_targets,
                       ap_targets, pair_spans, seed=record_seed)
    ex.validate(config.max_pairs)
    return ex


# ---------------------------------------------------------------------------
# corpus-level driver and serialization

@dataclass
class MaskStats:
    sentences: int = 0
    tokens: int = 0
    budget_total: int = 0
    pairs_detected: int = 0
    pairs_masked: int = 0
    words_detected: int = 0
    step2_positions: int = 0
    step3_positions: int = 0
    branch_mask: int = 0
    branch_random: int = 0
    branch_keep: int = 0

    def step2_fraction(self) -> float:
        d = self.step2_positions + self.step3_positions
        return self.step2_positions / d if d else 0.0


def _record(ex: MaskedExample) -> str:
    rec = {
        "corrupted": ex.corrupted,
        "original": ex.original,
        "sw_targets": [list(t) for t in ex.sw_targets],
        "wp_targets": [list(t) for t in ex.wp_targets],
        "ap_targets": [list(t) for t in ex.ap_targets],
        "pair_spans": [[list(a), list(s)] for a, s in ex.pair_spans],
        "seed": ex.seed,
    }
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def example_from_record(obj) -> MaskedExample:
    try:
        return MaskedExample(
            list(obj["corrupted"]), list(obj["original"]),
            [tuple(t) for t in obj["sw_targets"]],
            [tuple(t) for t in obj["wp_targets"]],
            [list(t) for t in obj["ap_targets"]],
            [(list(a), list(s)) for a, s in obj["pair_spans"]],
            int(obj.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad masked-corpus record: {e}") from e


def sentence_seed(global_seed: int, index: int):
    # worker-scheduling independent: the seed depends only on (run, sentence)
    return np.random.SeedSequence(entropy=global_seed, spawn_key=(index,))


def mask_corpus(sentences, knowledge: Knowledge, global_seed: int, out_path,
                config: MaskConfig = MaskConfig(),
                tagger: Tagger | None = None,
                vocab: Vocab | None = None) -> MaskStats:
    """Write one JSON record per sentence; byte-identical for a fixed seed."""
    if tagger is None:
        tagger = Tagger()
    if vocab is None:
        raise ContractError("mask_corpus needs a vocab")
    stats = MaskStats()
    with open(out_path, "w", encoding="utf-8") as f:
        for idx, tokens in enumerate(sentences):
            det = detect(tokens, knowledge, tagger, config.pair_window)
            ex = mask(tokens, det, vocab, knowledge,
                      sentence_seed(global_seed, idx), config, record_seed=idx)
            stats.sentences += 1
            stats.tokens += len(tokens)
            stats.budget_total += budget_for(len(tokens), config.budget_rate)
            stats.pairs_detected += len(det.pair_spans)
            stats.pairs_masked += len(ex.ap_targets)
            stats.words_detected += len(det.sentiment_word_spans)
            pair_pos = {p for a, s in ex.pair_spans for p in list(a) + list(s)}
            sw_pos = [p for p, _ in ex.sw_targets]
            wp_pos = {p for p, _ in ex.wp_targets}
            step2 = [p for p in sw_pos if p in wp_pos]
            step3 = [p for p in sw_pos if p not in wp_pos and p not in pair_pos]
            stats.step2_positions += len(step2)
            stats.step3_positions += len(step3)
            for p in step3:
                if ex.corrupted[p] == MASK_ID:
                    stats.branch_mask += 1
                elif ex.corrupted[p] == ex.original[p]:
                    stats.branch_keep += 1
                else:
                    stats.branch_random += 1
            f.write(_record(ex) + "\n")
    return stats


def load_masked_corpus(path) -> list:
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise DataError(f"cannot read masked corpus {path}: {e}") from e
    out = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{n}: not valid JSON: {e}") from e
        out.append(example_from_record(obj))
    if not out:
        raise DataError(f"masked corpus {path} is empty")
    return out
