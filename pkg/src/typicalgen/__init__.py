"""Entropy-anchored truncated sampling with an n-gram LM and evaluation suite."""

__version__ = "0.1.0"

from .dist import (
    CategoricalLogDist,
    InvalidInputError,
    RandomSource,
    apply_temperature,
    entropy,
    epsilon,
    log_normalize,
    sample,
    surprisal,
)
from .generation import GenerationRecord, TokenRecord, batch_generate, generate
from .metrics import (
    EpsilonProfile,
    MetricsReport,
    UndefinedMetricError,
    check_epsilon_typical,
    corpus_perplexity,
    epsilon_profile,
    evaluate_corpus,
    ngram_diversity,
    rep,
    rep_l,
    zipf_coefficient,
    zipf_from_frequencies,
)
from .ngram import BOS, EOS, UNK, ModelFormatError, NGramModel, Vocab, load, save, tokenize, train
from .strategies import (
    StrategyConfig,
    TruncatedDist,
    apply_strategy,
    truncate_nucleus,
    truncate_top_k,
    truncate_typical,
)

__all__ = [
    "BOS",
    "EOS",
    "UNK",
    "CategoricalLogDist",
    "EpsilonProfile",
    "GenerationRecord",
    "InvalidInputError",
    "MetricsReport",
    "ModelFormatError",
    "NGramModel",
    "RandomSource",
    "StrategyConfig",
    "TokenRecord",
    "TruncatedDist",
    "UndefinedMetricError",
    "Vocab",
    "apply_strategy",
    "apply_temperature",
    "batch_generate",
    "check_epsilon_typical",
    "corpus_perplexity",
    "entropy",
    "epsilon",
    "epsilon_profile",
    "evaluate_corpus",
    "generate",
    "load",
    "log_normalize",
    "ngram_diversity",
    "rep",
    "rep_l",
    "sample",
    "save",
    "surprisal",
    "tokenize",
    "train",
    "truncate_nucleus",
    "truncate_top_k",
    "truncate_typical",
    "zipf_coefficient",
    "zipf_from_frequencies",
]
