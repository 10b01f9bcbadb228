"""Autoregressive decoding: model + strategy + seeded randomness.

Every decode step records diagnostics against the pre-truncation model
distribution q (not the renormalized sampling distribution), because the
entropy/surprisal deviation is a statement about the model's view of the
text. Records are fully determined by (model, strategy, prompt, max_len,
seed).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dist import InvalidInputError, RandomSource, draw_index, entropy
from .ngram import EOS, NGramModel
from .strategies import StrategyConfig, apply_strategy

TERMINATED_EOS = "eos"
TERMINATED_MAX_LENGTH = "max_length"


@dataclass(frozen=True)
class TokenRecord:
    """Diagnostics for one generated token.

    ``log_prob_truncated`` is the token's log-probability under the
    renormalized sampling distribution pi; ``log_prob_model`` under the full
    model distribution q; ``entropy`` and ``epsilon`` describe q at that step.
    """

    token: int
    log_prob_truncated: float
    log_prob_model: float
    entropy: float
    epsilon: float


@dataclass(frozen=True)
class GenerationRecord:
    """One decoded continuation with per-token diagnostics."""

    prompt: tuple[int, ...]
    generated: tuple[int, ...]
    strategy: StrategyConfig
    seed: int
    per_token: tuple[TokenRecord, ...]
    terminated_by: str

    def __post_init__(self) -> None:
        if len(self.per_token) != len(self.generated):
            raise InvalidInputError("per_token must align with generated tokens")


def generate(
    model: NGramModel,
    cfg: StrategyConfig,
    prompt=(),
    max_len: int = 100,
    seed: int = 0,
) -> GenerationRecord:
    """Decode up to ``max_len`` tokens, stopping early on EOS.

    The prompt conditions the model but is never scored into the record's
    diagnostics. Greedy takes the truncated argmax and consumes no
    randomness; every other strategy draws one uniform per step.
    """
    if not isinstance(max_len, (int, np.integer)) or max_len < 1:
        raise InvalidInputError(f"max_len must be an integer >= 1, got {max_len!r}")
    rng = RandomSource(seed)
    context = model.validate_ids(prompt)
    prompt_ids = tuple(context)
    window = max(model.order - 1, 0)

    generated: list[int] = []
    per_token: list[TokenRecord] = []
    terminated_by = TERMINATED_MAX_LENGTH
    for _ in range(int(max_len)):
        d = model.next_dist(context[-window:] if window else [])
        td = apply_strategy(d, cfg)
        pos = 0 if cfg.kind == "greedy" else draw_index(td.probs, rng)
        token = int(td.support[pos])
        h = entropy(d)
        log_q = float(d.log_probs[token])
        per_token.append(
            TokenRecord(
                token=token,
                log_prob_truncated=float(np.log(td.probs[pos])),
                log_prob_model=log_q,
                entropy=h,
                epsilon=abs(h + log_q),
            )
        )
        generated.append(token)
        context.append(token)
        if token == EOS:
            terminated_by = TERMINATED_EOS
            break

    return GenerationRecord(
        prompt=prompt_ids,
        generated=tuple(generated),
        strategy=cfg,
        seed=int(seed),
        per_token=tuple(per_token),
        terminated_by=terminated_by,
    )


def batch_generate(
    model: NGramModel,
    cfg: StrategyConfig,
    prompts,
    max_len: int,
    base_seed: int,
    workers: int = 1,
) -> list[GenerationRecord]:
    """Generate one record per prompt; record i uses seed base_seed + i.

    With ``workers`` > 1 the records are produced on a thread pool (the model
    is shared read-only, each task owns its RandomSource); the output order
    always matches the input order and equals the sequential result.
    """
    seeds = [(base_seed + i) % 2**64 for i in range(len(prompts))]
    if workers <= 1:
        return [
            generate(model, cfg, prompt, max_len, seed)
            for prompt, seed in zip(prompts, seeds)
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(generate, model, cfg, prompt, max_len, seed)
            for prompt, seed in zip(prompts, seeds)
        ]
        return [f.result() for f in futures]
