import numpy as np
import pytest

from sentikit.corpus import load_classification_tsv, load_conll, read_corpus
from sentikit.crf import spans_from_bios
from sentikit.errors import ContractError
from sentikit.synthetic import (PLANTED_NEG, PLANTED_POS, SLOT_SEEDS_NEG,
                                SLOT_SEEDS_POS, TOPICS, SyntheticConfig,
                                canonical_word, generate_aspect,
                                generate_classification, generate_corpus,
                                generate_orl, generate_pair_holdout,
                                neutral_sentence, pair_sentence,
                                words_sentence, write_classification,
                                write_conll, write_corpus)

ALL_POS = set(PLANTED_POS) | set(SLOT_SEEDS_POS)
ALL_NEG = set(PLANTED_NEG) | set(SLOT_SEEDS_NEG)
NOUNS = {n for pair in TOPICS for n in pair}


def polarity_of(word):
    if word in ALL_POS:
        return 1
    if word in ALL_NEG:
        return -1
    return 0


class TestConfig:
    def test_skew_must_be_positive(self):
        with pytest.raises(ContractError):
            SyntheticConfig(skew=0.0)

    def test_mix_must_fit(self):
        with pytest.raises(ContractError):
            SyntheticConfig(p_pair=0.8, p_words=0.3)


class TestDeterminism:
    def test_same_seed_same_corpus(self):
        a = generate_corpus(60, seed=9)
        b = generate_corpus(60, seed=9)
        assert a == b

    def test_different_seed_differs(self):
        assert generate_corpus(60, seed=9) != generate_corpus(60, seed=10)

    def test_labeled_sets_deterministic(self):
        assert generate_classification(40, 10, seed=3) == \
            generate_classification(40, 10, seed=3)
        assert generate_orl(20, 5, seed=3) == generate_orl(20, 5, seed=3)


class TestTemplates:
    def test_pair_sentence_layout(self):
        rng = np.random.default_rng(0)
        for topic in range(len(TOPICS)):
            for positive in (False, True):
                toks = pair_sentence(rng, SyntheticConfig(), topic, positive)
                assert len(toks) == 16
                assert toks[8] == canonical_word(topic, positive)
                assert {toks[1], toks[9]} == set(TOPICS[topic])
                assert toks[1] != toks[9]
                assert polarity_of(toks[13]) != 0
                assert polarity_of(toks[15]) != 0

    def test_pair_sentence_has_no_other_nouns(self):
        rng = np.random.default_rng(1)
        toks = pair_sentence(rng, SyntheticConfig(), 2, True)
        noun_positions = [i for i, t in enumerate(toks) if t in NOUNS]
        assert noun_positions == [1, 9]

    def test_free_slots_sit_far_from_nouns(self):
        # word-level slots must never be within pairing distance of a noun
        rng = np.random.default_rng(2)
        for _ in range(50):
            toks = pair_sentence(rng, SyntheticConfig(), None, None)
            noun_pos = [i for i, t in enumerate(toks) if t in NOUNS]
            for slot in (13, 15):
                assert all(abs(slot - i) > 3 for i in noun_pos)

    def test_words_sentence_has_no_nouns(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            toks = words_sentence(rng, SyntheticConfig())
            assert len(toks) == 13
            assert not NOUNS & set(toks)
            assert polarity_of(toks[8]) != 0
            assert polarity_of(toks[11]) != 0

    def test_neutral_sentence_has_no_sentiment(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            toks = neutral_sentence(rng)
            assert sum(t in NOUNS for t in toks) == 1
            assert all(polarity_of(t) == 0 for t in toks)


class TestCorpusMix:
    def test_template_fractions_match_config(self, world):
        sents = world["sents"]
        pair_frac = sum(len(s) == 16 for s in sents) / len(sents)
        assert abs(pair_frac - 0.70) < 0.04
        words = sum(len(s) == 13 and not (NOUNS & set(s)) for s in sents)
        assert abs(words / len(sents) - 0.15) < 0.03

    def test_skew_controls_polarity_agreement(self):
        sents = generate_corpus(3000, seed=21, cfg=SyntheticConfig(skew=10.0))
        pairs = [s for s in sents if len(s) == 16]
        agree = sum(polarity_of(s[15]) == polarity_of(s[8]) for s in pairs)
        assert abs(agree / len(pairs) - 10 / 11) < 0.03

    def test_low_skew_weakens_agreement(self):
        sents = generate_corpus(3000, seed=21, cfg=SyntheticConfig(skew=1.0))
        pairs = [s for s in sents if len(s) == 16]
        agree = sum(polarity_of(s[15]) == polarity_of(s[8]) for s in pairs)
        assert abs(agree / len(pairs) - 0.5) < 0.04


class TestPairHoldout:
    def test_triples_expose_the_hidden_pair(self):
        rows = generate_pair_holdout(100, seed=6)
        for toks, aspect, sentiment in rows:
            assert toks[9] == aspect and toks[8] == sentiment
            assert {toks[1], aspect} in [set(t) for t in TOPICS]
            # the sentiment word is one of the five canonical words per sign
            assert sentiment in PLANTED_POS[:5] + PLANTED_NEG[:5]


class TestClassificationSplits:
    def test_balanced_labels(self):
        train, dev = generate_classification(100, 40, seed=5)
        assert sum(lab == "pos" for lab, _ in train) == 50
        assert sum(lab == "pos" for lab, _ in dev) == 20

    def test_dev_words_held_out_of_train(self):
        train, dev = generate_classification(200, 60, seed=5)
        train_polar = {t for _, toks in train for t in toks if polarity_of(t)}
        dev_polar = {t for _, toks in dev for t in toks if polarity_of(t)}
        assert train_polar and dev_polar
        assert not train_polar & dev_polar

    def test_dev_uses_late_planted_words_only(self):
        _, dev = generate_classification(10, 50, seed=5)
        allowed = set(PLANTED_POS[5:]) | set(PLANTED_NEG[5:])
        for _, toks in dev:
            polar = {t for t in toks if polarity_of(t)}
            assert polar <= allowed

    def test_label_matches_word_polarity(self):
        train, dev = generate_classification(100, 40, seed=5)
        for lab, toks in train + dev:
            want = 1 if lab == "pos" else -1
            assert polarity_of(toks[8]) == want
            assert polarity_of(toks[11]) == want


class TestAspectSplits:
    def test_rows_query_both_aspects_of_one_text(self):
        train, _ = generate_aspect(40, 10, seed=8)
        by_text = {}
        for lab, aspect, text in train:
            by_text.setdefault(tuple(text), []).append((lab, aspect[0]))
        for text, rows in by_text.items():
            if len(rows) == 2:
                (l1, a1), (l2, a2) = rows
                assert {l1, l2} == {"pos", "neg"}
                assert {a1, a2} == {text[1], text[6]}

    def test_aspect_is_always_in_the_text(self):
        train, dev = generate_aspect(40, 10, seed=8)
        for lab, aspect, text in train + dev:
            assert aspect[0] in text

    def test_label_tracks_queried_aspects_word(self):
        train, _ = generate_aspect(40, 10, seed=8)
        for lab, aspect, text in train:
            idx = text.index(aspect[0])
            word = text[idx + 2]  # "the A was W ..."
            assert polarity_of(word) == (1 if lab == "pos" else -1)


class TestOrl:
    def test_tags_well_formed_and_typed(self):
        train, dev = generate_orl(50, 20, seed=9)
        for toks, tags, doc_id in train + dev:
            assert len(toks) == len(tags)
            spans = spans_from_bios(tags)
            roles = sorted({s.role for s in spans})
            assert roles == ["H", "T"]

    def test_holder_is_single_token_span(self):
        train, _ = generate_orl(50, 20, seed=9)
        for toks, tags, _ in train:
            holders = [s for s in spans_from_bios(tags) if s.role == "H"]
            assert len(holders) == 1
            assert holders[0].start == holders[0].end == 0

    def test_doc_ids_unique_across_splits(self):
        train, dev = generate_orl(30, 10, seed=9)
        ids = [d for _, _, d in train + dev]
        assert len(set(ids)) == len(ids)


class TestWriters:
    def test_corpus_round_trip(self, tmp_path):
        sents = generate_corpus(20, seed=12)
        p = tmp_path / "c.txt"
        write_corpus(sents, p)
        assert read_corpus(p) == sents

    def test_classification_round_trip(self, tmp_path):
        train, _ = generate_classification(20, 4, seed=12)
        p = tmp_path / "d.tsv"
        write_classification(train, p)
        rows = load_classification_tsv(p)
        assert [(r.label, r.tokens) for r in rows] == train

    def test_aspect_round_trip(self, tmp_path):
        train, _ = generate_aspect(10, 4, seed=12)
        p = tmp_path / "a.tsv"
        write_classification(train, p, with_aspect=True)
        rows = load_classification_tsv(p)
        assert [(r.label, r.aspect, r.tokens) for r in rows] == train

    def test_conll_round_trip(self, tmp_path):
        train, _ = generate_orl(15, 4, seed=12)
        p = tmp_path / "o.conll"
        write_conll(train, p)
        loaded = load_conll(p)
        assert loaded.repaired_tags == 0
        got = [(s.tokens, s.tags, s.doc_id) for s in loaded.sentences]
        assert got == train
