"""Deterministic synthetic corpus for desk-scale experiments.

Builds word-like text offline: a vocabulary of pronounceable pseudo-words
drawn with Zipf-distributed frequencies, light bigram structure from a
seeded topic chain, and geometric sentence lengths. Identical parameters and
seed always produce identical bytes, so trained models and downstream
pipelines are reproducible end to end.
"""

from __future__ import annotations

import numpy as np

from .dist import InvalidInputError, RandomSource

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
           "br", "dr", "gr", "kr", "pl", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "ou"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "m", "nd", "st"]


def _pseudo_word(rng: RandomSource, n_syllables: int) -> str:
    parts = []
    for _ in range(n_syllables):
        parts.append(_ONSETS[int(rng.uniform() * len(_ONSETS))])
        parts.append(_VOWELS[int(rng.uniform() * len(_VOWELS))])
        parts.append(_CODAS[int(rng.uniform() * len(_CODAS))])
    return "".join(parts)


def build_vocabulary(size: int, seed: int) -> list[str]:
    """Distinct pseudo-words; shorter words occupy the low (frequent) ranks."""
    rng = RandomSource(seed)
    words: list[str] = []
    seen = set()
    while len(words) < size:
        n_syl = 1 + (len(words) * 3) // size  # frequent words stay short
        w = _pseudo_word(rng, n_syl)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def synthetic_corpus(
    n_lines: int,
    seed: int,
    vocab_size: int = 4000,
    zipf_exponent: float = 1.1,
    mean_line_length: int = 14,
) -> list[str]:
    """Generate ``n_lines`` documents of Zipf-flavored pseudo-text.

    Word frequencies follow rank^(-zipf_exponent). A two-state topic chain
    alternates between the global distribution and a narrower high-rank
    slice, which gives the trained n-gram model mid-range conditional
    entropies instead of a flat unigram profile.
    """
    if n_lines < 1:
        raise InvalidInputError(f"n_lines must be >= 1, got {n_lines}")
    if vocab_size < 10:
        raise InvalidInputError(f"vocab_size must be >= 10, got {vocab_size}")
    if not 0.5 <= zipf_exponent <= 3.0:
        raise InvalidInputError(f"zipf_exponent must lie in [0.5, 3], got {zipf_exponent}")

    words = build_vocabulary(vocab_size, seed)
    ranks = np.arange(1, vocab_size + 1, dtype=np.float64)
    weights = ranks ** -zipf_exponent
    global_cum = np.cumsum(weights / weights.sum())
    # Narrow topic slice: only the most frequent tenth of the vocabulary.
    narrow = weights.copy()
    narrow[vocab_size // 10:] = 0.0
    narrow_cum = np.cumsum(narrow / narrow.sum())

    rng = RandomSource(seed + 1)
    lines = []
    for _ in range(n_lines):
        length = 4 + int(-mean_line_length * np.log(1.0 - rng.uniform()))
        topical = rng.uniform() < 0.5
        toks = []
        for _ in range(length):
            if rng.uniform() < 0.15:
                topical = not topical
            cum = narrow_cum if topical else global_cum
            idx = int(np.searchsorted(cum, rng.uniform(), side="right"))
            toks.append(words[min(idx, vocab_size - 1)])
        lines.append(" ".join(toks))
    return lines
