"""Shared fixtures: one synthetic world and a few pre-trained encoders.

Everything heavy is session-scoped and lazy, so module tests stay fast and
only the behavioral suites pay for pre-training.
"""
import numpy as np
import pytest

from sentikit.corpus import LabeledExample, build_vocab
from sentikit.encoder import EncoderConfig
from sentikit.masker import MaskConfig, detect, mask, sentence_seed
from sentikit.miner import Knowledge, MinerConfig, SeedSet, mine_lexicon
from sentikit.objectives import JointConfig
from sentikit.postag import Tagger
from sentikit.pretrain import PretrainConfig, run_pretrain
from sentikit.synthetic import SyntheticConfig, generate_classification, generate_corpus

CORPUS_SEED = 11
MASK_SEED = 7
PRETRAIN_SEED = 3


@pytest.fixture(scope="session")
def tagger():
    return Tagger()


@pytest.fixture(scope="session")
def world(tagger):
    """Synthetic corpus plus everything mined from it."""
    sents = generate_corpus(2000, seed=CORPUS_SEED, cfg=SyntheticConfig())
    result = mine_lexicon(sents, SeedSet.load(), MinerConfig(), tagger)
    knowledge = Knowledge(result.lexicon, result.pairs)
    vocab = build_vocab(sents, min_freq=1)
    enc = EncoderConfig(vocab_size=len(vocab), n_layers=2, hidden_dim=64,
                        n_heads=2, ffn_dim=256, max_seq_len=64)
    dets = [detect(t, knowledge, tagger, 3) for t in sents]
    return {"sents": sents, "mining": result, "knowledge": knowledge,
            "vocab": vocab, "enc": enc, "dets": dets}


def _masked(world, mode):
    cfg = MaskConfig(mode=mode)
    return [mask(t, d, world["vocab"], world["knowledge"],
                 sentence_seed(MASK_SEED, i), cfg, record_seed=i)
            for i, (t, d) in enumerate(zip(world["sents"], world["dets"]))]


@pytest.fixture(scope="session")
def masked_hybrid(world):
    return _masked(world, "hybrid")


@pytest.fixture(scope="session")
def masked_words(world):
    return _masked(world, "words")


@pytest.fixture(scope="session")
def masked_random(world):
    return _masked(world, "random")


def _pretrain(world, examples, joint, epochs, lr):
    pcfg = PretrainConfig(epochs=epochs, batch_size=32, lr=lr, seed=PRETRAIN_SEED)
    return run_pretrain(world["enc"], joint, examples, pcfg)


@pytest.fixture(scope="session")
def pre_hybrid3(world, masked_hybrid):
    """3-epoch full-objective encoder: the pinned-protocol checkpoint."""
    return _pretrain(world, masked_hybrid, JointConfig(), 3, 1e-3)


@pytest.fixture(scope="session")
def pre_words3(world, masked_words):
    return _pretrain(world, masked_words,
                     JointConfig(include_wp=False, include_ap=False), 3, 1e-3)


@pytest.fixture(scope="session")
def pre_random3(world, masked_random):
    return _pretrain(world, masked_random,
                     JointConfig(include_wp=False, include_ap=False), 3, 1e-3)


@pytest.fixture(scope="session")
def pre_strong(world, masked_hybrid):
    """Longer full-objective run used where no epoch count is pinned."""
    return _pretrain(world, masked_hybrid, JointConfig(), 10, 2e-3)


@pytest.fixture(scope="session")
def cls_data():
    """500 training + 100 dev labeled sentences; dev words never train."""
    tr, dv = generate_classification(500, 100, seed=5)
    train = [LabeledExample(toks, lab, None) for lab, toks in tr]
    dev = [LabeledExample(toks, lab, None) for lab, toks in dv]
    return train, dev


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
