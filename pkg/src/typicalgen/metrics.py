"""Automatic evaluation suite for generated text.

Surface metrics (REP, Zipf coefficient, n-gram diversity) depend only on the
equality pattern of tokens; model-based metrics (perplexity, the
entropy-deviation profile, the band diagnostic) score token-id sequences
under an n-gram model. Corpus aggregation is token-weighted throughout.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .dist import InvalidInputError
from .ngram import EOS, NGramModel, UNK

REP_WINDOWS = (16, 32, 128)
DIVERSITY_MAX_N = 4

# Deviation histogram: 0.1-nat bins over [0, 6] plus one overflow bin.
EPS_BIN_WIDTH = 0.1
EPS_MAX = 6.0
LN2 = math.log(2.0)


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined for the given input."""


@dataclass(frozen=True)
class EpsilonProfile:
    """Per-token entropy-deviation summary: mean (nats) plus fixed-bin histogram."""

    mean: float
    histogram: tuple[tuple[float, float, int], ...]
    n_tokens: int


@dataclass(frozen=True)
class MetricsReport:
    """Aggregated evaluation results for one corpus of sequences."""

    rep: float
    rep_per_l: dict[int, float]
    zipf: float
    diversity: float
    ppl_g: float
    ppl_i: float
    eps_mean: float
    eps_histogram: tuple[tuple[float, float, int], ...] = field(repr=False)
    n_sequences: int
    n_tokens: int

    def __post_init__(self) -> None:
        mean_rep = sum(self.rep_per_l.values()) / len(self.rep_per_l)
        if abs(self.rep - mean_rep) > 1e-12:
            raise InvalidInputError("rep must equal the mean of rep_per_l")
        if sum(c for _, _, c in self.eps_histogram) != self.n_tokens:
            raise InvalidInputError("histogram counts must sum to the scored token count")


def rep_l(tokens: Sequence[Hashable], window: int) -> float:
    """Fraction of tokens repeating within the previous ``window`` tokens."""
    hits, positions = _rep_l_counts(tokens, window)
    if positions == 0:
        raise UndefinedMetricError("rep needs at least two tokens")
    return hits / positions


def rep(tokens: Sequence[Hashable]) -> float:
    """Mean of rep_l over the standard windows (16, 32, 128)."""
    return sum(rep_l(tokens, w) for w in REP_WINDOWS) / len(REP_WINDOWS)


def zipf_coefficient(tokens: Sequence[Hashable]) -> float:
    """Negated slope of the log-log rank-frequency least-squares fit.

    Ranks run over all token types (rank 1 = most frequent, frequency ties
    broken by lexicographic token order, which cannot affect the fit).
    """
    freq = Counter(tokens)
    if len(freq) < 2:
        raise UndefinedMetricError("Zipf fit needs at least two token types")
    ordered = sorted(freq.items(), key=lambda kv: (-kv[1], str(kv[0])))
    return zipf_from_frequencies([c for _, c in ordered])


def zipf_from_frequencies(frequencies: Sequence[float]) -> float:
    """Power-law exponent from a rank-ordered positive frequency table."""
    f = np.asarray(frequencies, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] < 2:
        raise UndefinedMetricError("frequency table needs at least two ranks")
    if not np.all(f > 0):
        raise UndefinedMetricError("frequencies must be positive")
    x = np.log(np.arange(1, f.shape[0] + 1, dtype=np.float64))
    y = np.log(f)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    return -slope


def ngram_diversity(tokens: Sequence[Hashable]) -> float:
    """Mean distinct-to-total n-gram ratio for n = 1..4 (those that fit)."""
    length = len(tokens)
    if length < 1:
        raise UndefinedMetricError("diversity needs at least one token")
    fractions = []
    for n in range(1, DIVERSITY_MAX_N + 1):
        total = length - n + 1
        if total < 1:
            break
        grams = {tuple(tokens[i:i + n]) for i in range(total)}
        fractions.append(len(grams) / total)
    return sum(fractions) / len(fractions)


def epsilon_profile(model: NGramModel, sequences: Sequence[Sequence[int]]) -> EpsilonProfile:
    """Entropy-deviation of every token across ``sequences`` under ``model``.

    Returns the mean |H - I| in nats and a histogram with 0.1-nat bins over
    [0, 6] plus an overflow bin; the bin counts sum to the scored tokens.
    """
    deviations = _deviations(model, sequences)
    if not deviations:
        raise UndefinedMetricError("deviation profile needs at least one token")
    return EpsilonProfile(
        mean=sum(deviations) / len(deviations),
        histogram=_histogram(deviations),
        n_tokens=len(deviations),
    )


def check_epsilon_typical(model: NGramModel, tokens: Sequence[int], eps_bits: float) -> bool:
    """Whether the message probability falls in the band 2^{-N(H +- eps)}.

    H is the mean per-step conditional entropy over the message, in bits;
    the message's total information content (also bits) must lie within
    [N(H - eps), N(H + eps)]. A whole-message diagnostic, not a per-token one.
    """
    if not (np.isfinite(eps_bits) and eps_bits > 0):
        raise InvalidInputError(f"eps_bits must be positive, got {eps_bits!r}")
    steps = model.score_steps(tokens)
    if not steps:
        raise InvalidInputError("message must contain at least one token")
    total_entropy_bits = sum(h for h, _ in steps) / LN2
    total_info_bits = sum(i for _, i in steps) / LN2
    n = len(steps)
    eps = float(eps_bits)
    return total_entropy_bits - n * eps <= total_info_bits <= total_entropy_bits + n * eps


def corpus_perplexity(model: NGramModel, sequences: Sequence[Sequence[int]]) -> float:
    """exp(total information / total tokens) over EOS-terminated sequences."""
    total_info = 0.0
    total_tokens = 0
    for seq in sequences:
        total_info += model.sequence_information(seq)
        total_tokens += len(seq)
    if total_tokens == 0:
        raise UndefinedMetricError("perplexity needs at least one token")
    return math.exp(total_info / total_tokens)


def evaluate_corpus(
    model_g: NGramModel,
    model_i: NGramModel,
    sequences: Sequence[Sequence[str]],
) -> MetricsReport:
    """Fill every report field for a corpus of token-string sequences.

    Surface metrics are computed on the token strings as given. For
    model-based metrics each sequence is encoded through the respective
    model's vocabulary (out-of-vocabulary tokens become UNK) and terminated
    with EOS; perplexities are token-weighted over those scored tokens, and
    the deviation profile is computed under ``model_g``.
    """
    sequences = [list(seq) for seq in sequences]
    if not sequences or all(len(s) == 0 for s in sequences):
        raise UndefinedMetricError("corpus must contain at least one token")

    rep_per_l = {}
    for w in REP_WINDOWS:
        hits = positions = 0
        for seq in sequences:
            h, p = _rep_l_counts(seq, w)
            hits += h
            positions += p
        if positions == 0:
            raise UndefinedMetricError("rep needs at least one sequence of length >= 2")
        rep_per_l[w] = hits / positions

    pooled = [tok for seq in sequences for tok in seq]
    zipf = zipf_coefficient(pooled)
    weights = [len(s) for s in sequences if len(s) > 0]
    diversity = (
        sum(len(s) * ngram_diversity(s) for s in sequences if len(s) > 0) / sum(weights)
    )

    ids_g = [model_g.vocab.encode(seq) + [EOS] for seq in sequences]
    ids_i = [model_i.vocab.encode(seq) + [EOS] for seq in sequences]
    profile = epsilon_profile(model_g, ids_g)

    return MetricsReport(
        rep=sum(rep_per_l.values()) / len(rep_per_l),
        rep_per_l=rep_per_l,
        zipf=zipf,
        diversity=diversity,
        ppl_g=corpus_perplexity(model_g, ids_g),
        ppl_i=corpus_perplexity(model_i, ids_i),
        eps_mean=profile.mean,
        eps_histogram=profile.histogram,
        n_sequences=len(sequences),
        n_tokens=profile.n_tokens,
    )


def unk_fraction(model: NGramModel, sequences: Sequence[Sequence[str]]) -> float:
    """Share of tokens that fall outside the model's vocabulary."""
    total = unk = 0
    for seq in sequences:
        for tok in seq:
            total += 1
            unk += model.vocab.id_of(tok) == UNK
    return unk / total if total else 0.0


def _rep_l_counts(tokens: Sequence[Hashable], window: int) -> tuple[int, int]:
    if not isinstance(window, int) or window < 1:
        raise InvalidInputError(f"window must be an integer >= 1, got {window!r}")
    length = len(tokens)
    hits = 0
    recent: Counter = Counter()
    for t in range(1, length):
        recent[tokens[t - 1]] += 1
        stale = t - window - 1
        if stale >= 0:
            recent[tokens[stale]] -= 1
            if recent[tokens[stale]] == 0:
                del recent[tokens[stale]]
        hits += recent[tokens[t]] > 0
    return hits, max(length - 1, 0)


def _deviations(model: NGramModel, sequences: Sequence[Sequence[int]]) -> list[float]:
    out = []
    for seq in sequences:
        for h, i in model.score_steps(seq):
            out.append(abs(h - i))
    return out


def _histogram(values: Sequence[float]) -> tuple[tuple[float, float, int], ...]:
    n_bins = int(round(EPS_MAX / EPS_BIN_WIDTH))
    edges = [round(i * EPS_BIN_WIDTH, 10) for i in range(n_bins + 1)]
    counts = [0] * (n_bins + 1)
    for v in values:
        idx = int(v / EPS_BIN_WIDTH)
        counts[idx if idx < n_bins else n_bins] += 1
    bins = [(edges[i], edges[i + 1], counts[i]) for i in range(n_bins)]
    bins.append((EPS_MAX, math.inf, counts[n_bins]))
    return tuple(bins)
