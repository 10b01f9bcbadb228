from collections import Counter

import numpy as np
import pytest

import typicalgen as tg
from typicalgen.corpus import synthetic_corpus
from typicalgen.ngram import NGramModel, Vocab


@pytest.fixture
def toy_bigram():
    """Pure-bigram model counted from one line 'a a a a' (alpha=0)."""
    return tg.train(["a a a a"], order=2, lambdas=(0.0, 1.0), alpha=0.0)


def make_uniform_model(vocab_size: int) -> NGramModel:
    """Model with no counts: every conditional is uniform over the vocab."""
    assert vocab_size >= 4
    vocab = Vocab(f"w{i}" for i in range(vocab_size - 3))
    return NGramModel(order=1, vocab=vocab, lambdas=(1.0,), alpha=0.0, counts=[{}])


def make_constant_model(next_token: int = 3) -> NGramModel:
    """Model that puts probability one on a single token in every context."""
    vocab = Vocab(["a"])
    return NGramModel(
        order=1, vocab=vocab, lambdas=(1.0,), alpha=0.0,
        counts=[{(): Counter({next_token: 7})}],
    )


@pytest.fixture(scope="session")
def small_corpus():
    return synthetic_corpus(400, seed=20, vocab_size=500)


@pytest.fixture(scope="session")
def small_model(small_corpus):
    """Default-hyperparameter trigram model at test scale."""
    return tg.train(small_corpus)


def random_distributions(count, seed, min_v=2, max_v=64):
    """Seeded Dirichlet test distributions of assorted vocabulary sizes."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        v = int(rng.integers(min_v, max_v + 1))
        concentration = float(rng.uniform(0.05, 3.0))
        p = rng.dirichlet(np.full(v, concentration))
        p = np.maximum(p, 1e-12)
        out.append(tg.log_normalize(np.log(p)))
    return out
