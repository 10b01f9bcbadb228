"""Truncation-based decoding strategies.

Each strategy selects a token subset from a full-support distribution and
renormalizes the retained mass:

  * top-k: the k highest-probability tokens;
  * nucleus: the shortest probability-descending prefix reaching mass >= n;
  * typical: rank tokens by how close their surprisal sits to the step's
    conditional entropy (ascending |H + log q(y)|) and greedily take them
    until the retained mass reaches tau.

Tie-breaking is deterministic everywhere: equal probabilities resolve to the
lower token id; equal entropy-distances resolve to the higher probability,
then the lower token id. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dist import (
    CategoricalLogDist,
    InvalidInputError,
    NORMALIZATION_TOL,
    RandomSource,
    apply_temperature,
    draw_index,
)

STRATEGY_KINDS = ("greedy", "ancestral", "temperature", "topk", "nucleus", "typical")

# Which hyperparameter field each strategy kind consumes.
_PARAM_FIELD = {
    "greedy": None,
    "ancestral": None,
    "temperature": "temperature",
    "topk": "k",
    "nucleus": "n",
    "typical": "tau",
}


@dataclass(frozen=True)
class StrategyConfig:
    """Tagged choice of decoding strategy plus its single hyperparameter.

    Exactly the field matching ``kind`` may be set: temperature > 0 for
    "temperature", integer k >= 1 for "topk", n in (0, 1] for "nucleus",
    tau in (0, 1] for "typical"; "greedy" and "ancestral" take none.
    """

    kind: str
    temperature: float | None = None
    k: int | None = None
    n: float | None = None
    tau: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise InvalidInputError(
                f"unknown strategy {self.kind!r}; expected one of {STRATEGY_KINDS}"
            )
        expected = _PARAM_FIELD[self.kind]
        for name in ("temperature", "k", "n", "tau"):
            value = getattr(self, name)
            if name == expected:
                continue
            if value is not None:
                raise InvalidInputError(f"strategy {self.kind!r} does not take {name!r}")
        if expected is None:
            return
        value = getattr(self, expected)
        if value is None:
            raise InvalidInputError(f"strategy {self.kind!r} requires {expected!r}")
        if expected == "temperature":
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"temperature must be positive, got {value!r}")
            object.__setattr__(self, "temperature", float(value))
        elif expected == "k":
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidInputError(f"k must be an integer >= 1, got {value!r}")
            object.__setattr__(self, "k", int(value))
        else:
            if not (np.isfinite(value) and 0.0 < value <= 1.0):
                raise InvalidInputError(f"{expected} must lie in (0, 1], got {value!r}")
            object.__setattr__(self, expected, float(value))

    @property
    def param(self) -> float | int | None:
        name = _PARAM_FIELD[self.kind]
        return None if name is None else getattr(self, name)

    def label(self) -> str:
        """Short human-readable form, e.g. ``typical(tau=0.95)``."""
        name = _PARAM_FIELD[self.kind]
        if name is None:
            return self.kind
        return f"{self.kind}({'t' if name == 'temperature' else name}={self.param:g})"

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        name = _PARAM_FIELD[self.kind]
        if name is not None:
            out[name] = self.param
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StrategyConfig":
        return cls(**data)


@dataclass(frozen=True)
class TruncatedDist:
    """Selected token subset with renormalized probabilities.

    ``support`` lists token ids in selection-rank order, ``probs`` aligns
    with it and sums to one, and ``mass_retained`` is the support's mass
    under the original distribution (Z_t).
    """

    support: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)
    mass_retained: float

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if support.ndim != 1 or probs.shape != support.shape or support.size == 0:
            raise InvalidInputError("support and probs must be equal-length 1-D and non-empty")
        if support.size and support.min() < 0:
            raise InvalidInputError("support token ids must be nonnegative")
        if support.size and int(np.bincount(support).max()) > 1:
            raise InvalidInputError("support token ids must be unique")
        if abs(float(probs.sum()) - 1.0) > NORMALIZATION_TOL:
            raise InvalidInputError("truncated probabilities must sum to 1")
        if not 0.0 < self.mass_retained <= 1.0 + NORMALIZATION_TOL:
            raise InvalidInputError(f"mass_retained must lie in (0, 1], got {self.mass_retained!r}")
        support.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return int(self.support.shape[0])

    def sample(self, rng: RandomSource) -> int:
        """Draw one token id from the renormalized support (one uniform used)."""
        return int(self.support[draw_index(self.probs, rng)])


def truncate_top_k(d: CategoricalLogDist, k: int) -> TruncatedDist:
    """Keep the min(k, |V|) most probable tokens, ties to the lower id."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidInputError(f"k must be an integer >= 1, got {k!r}")
    probs = d.probs()
    order = np.argsort(-probs, kind="stable")
    support = order[: min(int(k), d.vocab_size)]
    return _build(support, probs[support])


def truncate_nucleus(d: CategoricalLogDist, n: float) -> TruncatedDist:
    """Keep the shortest probability-descending prefix with mass >= n."""
    if not (np.isfinite(n) and 0.0 < n <= 1.0):
        raise InvalidInputError(f"n must lie in (0, 1], got {n!r}")
    probs = d.probs()
    order = np.argsort(-probs, kind="stable")
    ranked = probs[order]
    cut = _mass_prefix_cut(ranked, float(n))
    return _build(order[: cut + 1], ranked[: cut + 1])


def truncate_typical(d: CategoricalLogDist, tau: float) -> TruncatedDist:
    """Keep the tokens with surprisal closest to the conditional entropy.

    Tokens are ranked ascending by |H + log q(y)| against the entropy of the
    incoming (pre-truncation) distribution and taken greedily until their
    cumulative original mass reaches tau. The support is never empty. One
    O(|V| log |V|) sort dominates the runtime.
    """
    if not (np.isfinite(tau) and 0.0 < tau <= 1.0):
        raise InvalidInputError(f"tau must lie in (0, 1], got {tau!r}")
    lp = d.log_probs
    probs = np.exp(lp)
    h = max(-float(np.dot(probs, lp)), 0.0)
    distance = lp + h
    np.abs(distance, out=distance)
    # Unstable sort on the fast path (the per-step performance budget rules
    # out a stable one), then an explicit tie pass: only ties at or before
    # the cut can change the support or its documented order.
    order = np.argsort(distance)
    ranked = probs[order]
    cut = _mass_prefix_cut(ranked, float(tau))
    prefix = distance[order[: min(cut + 2, order.shape[0])]]
    if np.any(prefix[1:] == prefix[:-1]):
        # Ties resolve by (distance, higher probability, lower token id).
        order = np.lexsort((np.arange(lp.shape[0]), -probs, distance))
        ranked = probs[order]
        cut = _mass_prefix_cut(ranked, float(tau))
    return _build(order[: cut + 1], ranked[: cut + 1])


def apply_strategy(d: CategoricalLogDist, cfg: StrategyConfig) -> TruncatedDist:
    """Dispatch a StrategyConfig to its truncation.

    Greedy is top-k with k=1; ancestral keeps the full support unchanged;
    temperature keeps the full support of the rescaled distribution.
    """
    if cfg.kind == "greedy":
        return truncate_top_k(d, 1)
    if cfg.kind == "ancestral":
        return _identity_truncation(d)
    if cfg.kind == "temperature":
        return _identity_truncation(apply_temperature(d, cfg.temperature))
    if cfg.kind == "topk":
        return truncate_top_k(d, cfg.k)
    if cfg.kind == "nucleus":
        return truncate_nucleus(d, cfg.n)
    return truncate_typical(d, cfg.tau)


# Summation slack when testing "cumulative mass >= threshold": without it,
# rounding (e.g. a true 0.9 stored as 0.9 - 1ulp) would spill one token past
# the boundary.
MASS_TOL = 1e-12

_SCAN_BLOCK = 4096


def _mass_prefix_cut(ranked: np.ndarray, threshold: float) -> int:
    """Index ending the shortest prefix of ``ranked`` with sum >= threshold.

    Clamps to the last index when rounding leaves even the full sum short
    (e.g. threshold 1.0). Scans block sums first so the sequential cumsum
    only touches the crossing region, not the whole vector.
    """
    thr = threshold - MASS_TOL
    n = ranked.shape[0]
    if n <= 2 * _SCAN_BLOCK:
        cum = np.cumsum(ranked)
        return min(int(np.searchsorted(cum, thr, side="left")), n - 1)
    nb = n // _SCAN_BLOCK
    bcum = np.cumsum(ranked[: nb * _SCAN_BLOCK].reshape(nb, _SCAN_BLOCK).sum(axis=1))
    blk = int(np.searchsorted(bcum, thr, side="left"))
    start = blk * _SCAN_BLOCK
    base = float(bcum[blk - 1]) if blk else 0.0
    while start < n:
        cum = base + np.cumsum(ranked[start:start + _SCAN_BLOCK])
        j = int(np.searchsorted(cum, thr, side="left"))
        if j < cum.shape[0]:
            return start + j
        base = float(cum[-1])
        start += _SCAN_BLOCK
    return n - 1


def _build(support: np.ndarray, sub: np.ndarray) -> TruncatedDist:
    mass = float(sub.sum())
    return TruncatedDist(support=support, probs=sub / mass, mass_retained=mass)


def _identity_truncation(d: CategoricalLogDist) -> TruncatedDist:
    probs = d.probs()
    mass = float(probs.sum())
    return TruncatedDist(
        support=np.arange(d.vocab_size, dtype=np.int64),
        probs=probs / mass,
        mass_retained=mass,
    )
