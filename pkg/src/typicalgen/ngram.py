"""Interpolated count-based n-gram language model with a uniform floor.

The model mixes maximum-likelihood k-gram estimates for k = 1..order with
weights lambda_k, then blends in ``alpha`` of a uniform distribution so every
conditional has full support:

    p(y | ctx) = (1 - alpha) * sum_k lambda_k * ML_k(y | last k-1 tokens)
                 + alpha / |V|

A k-gram component whose context was never seen contributes the uniform
distribution. Lines are wrapped as BOS^(order-1) ... EOS for counting, so the
model places mass on ending a document.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dist import CategoricalLogDist, InvalidInputError, entropy, log_normalize, surprisal

BOS, EOS, UNK = 0, 1, 2
RESERVED_TOKENS = ("<bos>", "<eos>", "<unk>")

DEFAULT_ORDER = 3
DEFAULT_LAMBDAS = (0.1, 0.3, 0.6)
DEFAULT_ALPHA = 0.01

MODEL_MAGIC = "typicalgen-ngram"
MODEL_VERSION = 1

# Floor applied to exact-zero mixture probabilities (possible only when
# alpha=0) so log-probs stay finite. Too small to move any double-precision
# sum or nonzero entry.
_ZERO_PROB_FLOOR = 1e-300


class ModelFormatError(ValueError):
    """Raised when model bytes cannot be decoded; names the offending field."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"model format error in field '{field}': {message}")
        self.field = field


class Vocab:
    """Bijection between token strings and ids; ids 0..2 are BOS/EOS/UNK."""

    def __init__(self, tokens: Iterable[str] = ()) -> None:
        self.id_to_token: list[str] = list(RESERVED_TOKENS)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token in self.token_to_id:
            raise InvalidInputError(f"duplicate vocabulary token {token!r}")
        self.token_to_id[token] = len(self.id_to_token)
        self.id_to_token.append(token)
        return self.token_to_id[token]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.id_to_token == other.id_to_token

    def id_of(self, token: str) -> int:
        """Token id, falling back to UNK for out-of-vocabulary strings."""
        return self.token_to_id.get(token, UNK)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split on Unicode whitespace; punctuation stays attached to words."""
    if lowercase:
        text = text.lower()
    return text.split()


@dataclass
class NGramModel:
    """Trained interpolated n-gram model.

    ``counts[k-1]`` maps a context tuple of k-1 token ids to a Counter of
    next-token ids; ``context_totals`` caches the per-context count sums.
    Instances are immutable by convention after training; all query methods
    are pure and safe for concurrent reads.
    """

    order: int
    vocab: Vocab
    lambdas: tuple[float, ...]
    alpha: float
    counts: list[dict[tuple[int, ...], Counter]]
    lowercase: bool = True
    min_count: int = 1

    def __post_init__(self) -> None:
        _validate_hyperparameters(self.order, self.lambdas, self.alpha)
        if len(self.counts) != self.order:
            raise InvalidInputError(
                f"counts must hold one table per order 1..{self.order}"
            )
        self.context_totals: list[dict[tuple[int, ...], int]] = [
            {ctx: sum(c.values()) for ctx, c in table.items()} for table in self.counts
        ]

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def next_dist(self, context: Sequence[int]) -> CategoricalLogDist:
        """Conditional distribution over the next token given trailing context.

        Contexts shorter than order-1 are left-padded with BOS. Full support:
        every token gets at least alpha/|V|; with alpha=0, exact zeros are
        floored to a sub-double constant so log-probs stay finite.
        """
        v = self.vocab_size
        ctx = self._padded_context(context)
        p = np.full(v, self.alpha / v, dtype=np.float64)
        scale = 1.0 - self.alpha
        for k in range(1, self.order + 1):
            lam = self.lambdas[k - 1]
            if lam == 0.0:
                continue
            key = ctx[len(ctx) - (k - 1):] if k > 1 else ()
            total = self.context_totals[k - 1].get(key, 0)
            if total == 0:
                p += scale * lam / v
            else:
                nexts = self.counts[k - 1][key]
                ids = np.fromiter(nexts.keys(), dtype=np.int64, count=len(nexts))
                cs = np.fromiter(nexts.values(), dtype=np.float64, count=len(nexts))
                p[ids] += scale * lam * cs / total
        if p.min() <= 0.0:
            p = np.maximum(p, _ZERO_PROB_FLOOR)
        return log_normalize(np.log(p))

    def sequence_information(self, tokens: Sequence[int]) -> float:
        """Total surprisal (nats) of an EOS-terminated token-id sequence."""
        ids = self.validate_ids(tokens)
        if not ids or ids[-1] != EOS:
            raise InvalidInputError("sequence must be non-empty and end with EOS")
        return self._information(ids)

    def perplexity(self, tokens: Sequence[int]) -> float:
        """exp(mean per-token surprisal) over an EOS-terminated sequence."""
        total = self.sequence_information(tokens)
        return math.exp(total / len(tokens))

    def score_steps(self, tokens: Sequence[int]):
        """Per-step (entropy, surprisal) pairs scoring ``tokens`` left to right.

        Shared by the information/perplexity path and the deviation metrics;
        does not require EOS termination.
        """
        ids = self.validate_ids(tokens)
        window = max(self.order - 1, 0)
        ctx: list[int] = []
        out = []
        for tok in ids:
            d = self.next_dist(ctx[-window:] if window else [])
            out.append((entropy(d), surprisal(d, tok)))
            ctx.append(tok)
        return out

    def _information(self, ids: list[int]) -> float:
        total = 0.0
        window = max(self.order - 1, 0)
        ctx: list[int] = []
        for tok in ids:
            total += surprisal(self.next_dist(ctx[-window:] if window else []), tok)
            ctx.append(tok)
        return total

    def _padded_context(self, context: Sequence[int]) -> tuple[int, ...]:
        ids = self.validate_ids(context)
        keep = self.order - 1
        tail = ids[-keep:] if keep > 0 else []
        if len(tail) < keep:
            tail = [BOS] * (keep - len(tail)) + tail
        return tuple(tail)

    def validate_ids(self, tokens: Sequence[int]) -> list[int]:
        """Range-check token ids against the vocabulary; returns plain ints."""
        v = self.vocab_size
        out = []
        for t in tokens:
            ti = int(t)
            if not 0 <= ti < v:
                raise InvalidInputError(f"token id {t!r} out of range for vocab size {v}")
            out.append(ti)
        return out


def train(
    corpus: Iterable[str],
    order: int = DEFAULT_ORDER,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
    alpha: float = DEFAULT_ALPHA,
    min_count: int = 1,
    lowercase: bool = True,
) -> NGramModel:
    """Count k-grams (k <= order) over a line-per-document corpus.

    Each line is wrapped as BOS^(order-1) ... EOS. Types seen fewer than
    ``min_count`` times collapse to UNK. Vocabulary ids are assigned in
    sorted token order, so the same corpus always yields the same model
    regardless of line order.
    """
    _validate_hyperparameters(order, tuple(float(x) for x in lambdas), alpha)
    if min_count < 1:
        raise InvalidInputError(f"min_count must be >= 1, got {min_count}")

    tokenized = [tokenize(line, lowercase) for line in corpus]
    if not tokenized:
        raise InvalidInputError("corpus is empty")

    freq = Counter(tok for toks in tokenized for tok in toks)
    vocab = Vocab(sorted(t for t, c in freq.items() if c >= min_count))

    counts: list[dict[tuple[int, ...], Counter]] = [{} for _ in range(order)]
    pad = [BOS] * (order - 1)
    for toks in tokenized:
        ids = pad + vocab.encode(toks) + [EOS]
        for i in range(order - 1, len(ids)):
            nxt = ids[i]
            for k in range(1, order + 1):
                ctx = tuple(ids[i - (k - 1):i])
                table = counts[k - 1]
                c = table.get(ctx)
                if c is None:
                    c = Counter()
                    table[ctx] = c
                c[nxt] += 1

    return NGramModel(
        order=order,
        vocab=vocab,
        lambdas=tuple(float(x) for x in lambdas),
        alpha=float(alpha),
        counts=counts,
        lowercase=lowercase,
        min_count=min_count,
    )


def save(model: NGramModel) -> bytes:
    """Serialize to canonical UTF-8 JSON bytes (bit-exact round trip).

    Layout: magic string, integer format version, order, lambdas, alpha,
    min_count, lowercase flag, non-reserved vocabulary in id order, and the
    count tables as [k, [[context_ids, [[token, count], ...]], ...]] with
    contexts and tokens sorted.
    """
    payload = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "order": model.order,
        "lambdas": list(model.lambdas),
        "alpha": model.alpha,
        "min_count": model.min_count,
        "lowercase": model.lowercase,
        "vocab": model.vocab.id_to_token[len(RESERVED_TOKENS):],
        "counts": [
            [
                k + 1,
                [
                    [list(ctx), sorted((int(t), int(c)) for t, c in nexts.items())]
                    for ctx, nexts in sorted(model.counts[k].items())
                ],
            ]
            for k in range(model.order)
        ],
    }
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def load(data: bytes) -> NGramModel:
    """Inverse of :func:`save`; raises ModelFormatError naming the bad field."""
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError("json", f"not a valid UTF-8 JSON document: {exc}") from exc
    if not isinstance(payload, dict):
        raise ModelFormatError("json", "top-level value must be an object")
    if payload.get("magic") != MODEL_MAGIC:
        raise ModelFormatError("magic", f"expected {MODEL_MAGIC!r}, got {payload.get('magic')!r}")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            "version", f"unsupported version {payload.get('version')!r}, expected {MODEL_VERSION}"
        )

    def need(field, expected_type):
        if field not in payload:
            raise ModelFormatError(field, "missing")
        value = payload[field]
        if not isinstance(value, expected_type):
            raise ModelFormatError(field, f"expected {expected_type}, got {type(value).__name__}")
        return value

    order = need("order", int)
    lambdas = need("lambdas", list)
    alpha = need("alpha", (int, float))
    min_count = need("min_count", int)
    lowercase = need("lowercase", bool)
    vocab_tokens = need("vocab", list)
    raw_counts = need("counts", list)

    if not all(isinstance(t, str) for t in vocab_tokens):
        raise ModelFormatError("vocab", "entries must be strings")
    try:
        vocab = Vocab(vocab_tokens)
    except InvalidInputError as exc:
        raise ModelFormatError("vocab", str(exc)) from exc

    if len(raw_counts) != order:
        raise ModelFormatError("counts", f"expected {order} tables, got {len(raw_counts)}")
    v = len(vocab)
    counts: list[dict[tuple[int, ...], Counter]] = [{} for _ in range(order)]
    for entry in raw_counts:
        if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], int)):
            raise ModelFormatError("counts", "each entry must be [k, contexts]")
        k, contexts = entry
        if not 1 <= k <= order:
            raise ModelFormatError("counts", f"order {k} outside 1..{order}")
        for ctx_entry in contexts:
            if not (isinstance(ctx_entry, list) and len(ctx_entry) == 2):
                raise ModelFormatError("counts", "each context must be [ids, next_counts]")
            ctx_ids, nexts = ctx_entry
            if len(ctx_ids) != k - 1 or not all(
                isinstance(i, int) and 0 <= i < v for i in ctx_ids
            ):
                raise ModelFormatError("counts", f"bad context {ctx_ids!r} for order {k}")
            counter = Counter()
            for pair in nexts:
                if not (
                    isinstance(pair, list)
                    and len(pair) == 2
                    and isinstance(pair[0], int)
                    and isinstance(pair[1], int)
                    and 0 <= pair[0] < v
                    and pair[1] > 0
                ):
                    raise ModelFormatError("counts", f"bad next-count pair {pair!r}")
                counter[pair[0]] = pair[1]
            counts[k - 1][tuple(ctx_ids)] = counter

    try:
        return NGramModel(
            order=order,
            vocab=vocab,
            lambdas=tuple(float(x) for x in lambdas),
            alpha=float(alpha),
            counts=counts,
            lowercase=lowercase,
            min_count=min_count,
        )
    except InvalidInputError as exc:
        raise ModelFormatError("hyperparameters", str(exc)) from exc


def _validate_hyperparameters(order: int, lambdas: tuple[float, ...], alpha: float) -> None:
    if not isinstance(order, int) or order < 1:
        raise InvalidInputError(f"order must be an integer >= 1, got {order!r}")
    if len(lambdas) != order:
        raise InvalidInputError(
            f"need exactly {order} interpolation weights, got {len(lambdas)}"
        )
    if any(not (np.isfinite(x) and x >= 0) for x in lambdas):
        raise InvalidInputError(f"interpolation weights must be nonnegative, got {lambdas}")
    if abs(sum(lambdas) - 1.0) > 1e-9:
        raise InvalidInputError(f"interpolation weights must sum to 1, got {sum(lambdas)!r}")
    if not (np.isfinite(alpha) and 0.0 <= alpha < 1.0):
        raise InvalidInputError(f"floor mass alpha must lie in [0, 1), got {alpha!r}")
