"""Sentiment-aware pre-training toolkit.

The pipeline mines a sentiment lexicon and aspect-sentiment pairs from
unlabeled text, masks sentences around that knowledge, pre-trains a small
transformer encoder against three sentiment objectives, and fine-tunes
task heads for sentence, aspect, and opinion-role prediction.
"""

__version__ = "0.1.0"

from .corpus import (LabeledExample, TaggedSentence, Vocab, build_vocab,
                     load_classification_tsv, load_conll, read_corpus, tokenize)
from .crf import TaggedSpan, bios_from_spans, crf_viterbi, make_tagset, spans_from_bios
from .encoder import EncoderConfig, forward, init_params
from .errors import (CheckpointError, ContractError, DataError, FormatError,
                     NumericalError, SentikitError, UsageError)
from .finetune import (FinetuneConfig, classify_aspect, classify_sentence,
                       finetune_classifier, finetune_orl, median_of_three)
from .masker import DetectionResult, MaskConfig, MaskedExample, detect, mask, mask_corpus
from .metrics import PRF, SpanScorer, accuracy, span_f1
from .miner import (Knowledge, MinerConfig, SeedSet, SentimentLexicon,
                    mine_lexicon, mine_pairs)
from .objectives import JointConfig, LossBreakdown, joint_loss
from .postag import Tagger
from .pretrain import PretrainConfig, run_pretrain

__all__ = [
    "__version__",
    "CheckpointError", "ContractError", "DataError", "DetectionResult",
    "EncoderConfig", "FinetuneConfig", "FormatError", "JointConfig", "Knowledge",
    "LabeledExample", "LossBreakdown", "MaskConfig", "MaskedExample", "MinerConfig",
    "NumericalError", "PRF", "PretrainConfig", "SeedSet", "SentikitError",
    "SentimentLexicon", "SpanScorer", "TaggedSentence", "TaggedSpan", "Tagger",
    "UsageError", "Vocab",
    "accuracy", "bios_from_spans", "build_vocab", "classify_aspect",
    "classify_sentence", "crf_viterbi", "detect", "finetune_classifier",
    "finetune_orl", "forward", "init_params", "joint_loss",
    "load_classification_tsv", "load_conll", "make_tagset", "mask", "mask_corpus",
    "median_of_three", "mine_lexicon", "mine_pairs", "read_corpus", "run_pretrain",
    "span_f1", "spans_from_bios", "tokenize",
]
