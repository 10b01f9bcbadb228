"""Numerically stable categorical-distribution math over a fixed vocabulary.

Everything here works in natural-log probabilities (nats). A distribution is
a full-support log-probability vector: no entry is -inf, and the exponentials
sum to one within a tight tolerance. All functions are pure; the only mutable
object is :class:`RandomSource`, which a caller must not share between
concurrent tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Tolerance for the "probabilities sum to one" invariant.
NORMALIZATION_TOL = 1e-9


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


@dataclass(frozen=True)
class CategoricalLogDist:
    """Full-support categorical distribution stored as natural-log probabilities.

    Invariants (checked at construction):
      * every entry is finite (no -inf tails),
      * exp of the entries sums to 1 within ``NORMALIZATION_TOL``,
      * the vocabulary has at least two tokens.
    """

    log_probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        lp = np.asarray(self.log_probs, dtype=np.float64)
        if lp.ndim != 1 or lp.shape[0] < 2:
            raise InvalidInputError(
                f"log_probs must be a 1-D vector of length >= 2, got shape {lp.shape}"
            )
        if not np.all(np.isfinite(lp)):
            raise InvalidInputError("log_probs must be finite (full support, no -inf)")
        total = float(np.exp(lp).sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidInputError(
                f"exp(log_probs) sums to {total!r}, expected 1 within {NORMALIZATION_TOL}"
            )
        lp.setflags(write=False)
        object.__setattr__(self, "log_probs", lp)

    @property
    def vocab_size(self) -> int:
        return int(self.log_probs.shape[0])

    def probs(self) -> np.ndarray:
        """Probabilities as a fresh float64 vector."""
        return np.exp(self.log_probs)


class RandomSource:
    """Seedable, platform-independent uniform source.

    Wraps NumPy's PCG64 bit generator, whose output stream for a given seed
    is fixed by the numpy random API compatibility policy, so identical seeds
    reproduce identical draw sequences across platforms and runs. Single
    owner: never share an instance between concurrent tasks.
    """

    def __init__(self, seed: int) -> None:
        if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < 2**64:
            raise InvalidInputError(f"seed must be an integer in [0, 2**64), got {seed!r}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return float(self._gen.random())

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomSource(seed={self.seed})"


def log_normalize(scores) -> CategoricalLogDist:
    """Build a distribution from unnormalized real scores.

    Uses the max-shift log-sum-exp identity, so scores anywhere in
    [-700, 700] normalize without intermediate overflow. Shift-invariant:
    adding a constant to all scores leaves the result unchanged.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] < 2:
        raise InvalidInputError(f"scores must be a 1-D vector of length >= 2, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores must be finite")
    m = s.max()
    lse = m + np.log(np.exp(s - m).sum())
    return CategoricalLogDist(s - lse)


def entropy(d: CategoricalLogDist) -> float:
    """Shannon entropy -sum(p * log p) in nats; in [0, log vocab_size].

    Terms whose probability underflows to zero contribute zero, the correct
    p -> 0 limit of p*log(p).
    """
    lp = d.log_probs
    h = -float(np.dot(np.exp(lp), lp))
    return max(h, 0.0)


def surprisal(d: CategoricalLogDist, token: int) -> float:
    """Information content -log p(token) in nats; nonnegative and finite."""
    _check_token(d, token)
    return max(-float(d.log_probs[token]), 0.0)


def epsilon(d: CategoricalLogDist, token: int) -> float:
    """Absolute deviation of the token's surprisal from the entropy, in nats."""
    return abs(entropy(d) - surprisal(d, token))


def apply_temperature(d: CategoricalLogDist, t: float) -> CategoricalLogDist:
    """Rescale as p^(1/t) renormalized (log-probs divided by t). t=1 is identity."""
    if not (isinstance(t, (int, float, np.floating)) and np.isfinite(t) and t > 0):
        raise InvalidInputError(f"temperature must be a finite positive real, got {t!r}")
    return log_normalize(d.log_probs / float(t))


def sample(d: CategoricalLogDist, rng: RandomSource) -> int:
    """Draw one token id distributed per exp(log_probs).

    Consumes exactly one uniform from ``rng`` (inverse-CDF draw), so the
    token is a deterministic function of the distribution and the rng state.
    """
    return int(draw_index(d.probs(), rng))


def draw_index(probs: np.ndarray, rng: RandomSource) -> int:
    """Inverse-CDF draw of an index from a (near-)normalized probability vector."""
    cum = np.cumsum(probs)
    u = rng.uniform() * cum[-1]
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, probs.shape[0] - 1)


def _check_token(d: CategoricalLogDist, token: int) -> None:
    if not isinstance(token, (int, np.integer)) or not 0 <= int(token) < d.vocab_size:
        raise InvalidInputError(
            f"token id {token!r} out of range for vocab size {d.vocab_size}"
        )
