import math
import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

import typicalgen as tg
from typicalgen.dist import InvalidInputError, RandomSource
from typicalgen.ngram import BOS, EOS, UNK, ModelFormatError, NGramModel, Vocab

from conftest import make_uniform_model


class TestTokenize:
    def test_lowercases_and_keeps_punctuation(self):
        assert tg.tokenize("The cat sat.") == ["the", "cat", "sat."]

    def test_empty_text(self):
        assert tg.tokenize("") == []

    def test_collapses_whitespace(self):
        assert tg.tokenize("a  b\t c\n") == ["a", "b", "c"]

    def test_case_preserving_mode(self):
        assert tg.tokenize("The Cat", lowercase=False) == ["The", "Cat"]


class TestVocab:
    def test_reserved_ids(self):
        v = Vocab(["x"])
        assert v.id_of("<bos>") == BOS and v.id_of("<eos>") == EOS
        assert v.id_of("never-seen") == UNK
        assert v.decode(v.encode(["x", "???"])) == ["x", "<unk>"]

    def test_duplicate_rejected(self):
        with pytest.raises(InvalidInputError):
            Vocab(["x", "x"])


class TestTrain:
    def test_toy_bigram_counts(self, toy_bigram):
        a = toy_bigram.vocab.id_of("a")
        assert toy_bigram.counts[1][(a,)] == Counter({a: 3, EOS: 1})
        assert toy_bigram.counts[1][(BOS,)] == Counter({a: 1})
        d = toy_bigram.next_dist([a])
        p = np.exp(d.log_probs)
        assert p[a] == pytest.approx(0.75, abs=1e-12)
        assert p[EOS] == pytest.approx(0.25, abs=1e-12)

    def test_unigram_single_token_line(self):
        m = tg.train(["a"], order=1, lambdas=(1.0,), alpha=0.0)
        p = np.exp(m.next_dist([]).log_probs)
        assert p[m.vocab.id_of("a")] == pytest.approx(0.5, abs=1e-12)
        assert p[EOS] == pytest.approx(0.5, abs=1e-12)

    def test_floor_share_lower_bounds_every_probability(self):
        m = tg.train(["a"], order=1, lambdas=(1.0,), alpha=0.5)
        assert len(m.vocab) == 4
        p = np.exp(m.next_dist([]).log_probs)
        assert p.min() >= 0.125 - 1e-12

    def test_unigram_total_counts_corpus_tokens(self):
        m = tg.train(["a b", "c"], order=2, lambdas=(0.5, 0.5), alpha=0.01)
        assert m.context_totals[0][()] == 5  # 3 words + 2 EOS, no BOS

    def test_min_count_maps_rare_tokens_to_unk(self):
        m = tg.train(["a a b"], order=1, lambdas=(1.0,), alpha=0.0, min_count=2)
        assert m.vocab.id_of("b") == UNK
        assert m.vocab.id_of("a") != UNK
        assert m.counts[0][()][UNK] == 1

    def test_empty_corpus_rejected(self):
        with pytest.raises(InvalidInputError):
            tg.train([])

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lambdas": (0.5, 0.6)},
            {"order": 2, "lambdas": (1.0,)},
            {"order": 1, "lambdas": (1.0,), "alpha": 1.0},
            {"order": 1, "lambdas": (1.0,), "alpha": -0.1},
            {"order": 0, "lambdas": ()},
            {"order": 1, "lambdas": (1.0,), "min_count": 0},
        ],
    )
    def test_bad_hyperparameters_rejected(self, kwargs):
        with pytest.raises(InvalidInputError):
            tg.train(["a"], **{"order": 2, **kwargs})


class TestNextDist:
    def test_untrained_context_uniform_backstop(self):
        m = make_uniform_model(10)
        p = np.exp(m.next_dist([]).log_probs)
        assert np.allclose(p, 0.1, atol=1e-12)

    def test_normalization_over_random_contexts(self, small_model):
        rng = random.Random(4)
        v = small_model.vocab_size
        for _ in range(100):
            ctx = [rng.randrange(v) for _ in range(rng.randrange(0, 4))]
            d = small_model.next_dist(ctx)
            total = float(np.exp(d.log_probs).sum())
            assert abs(total - 1.0) <= 1e-9

    def test_full_support_floor(self, small_model):
        rng = random.Random(5)
        v = small_model.vocab_size
        floor = small_model.alpha / v
        for _ in range(100):
            ctx = [rng.randrange(v) for _ in range(rng.randrange(0, 4))]
            p = np.exp(small_model.next_dist(ctx).log_probs)
            assert p.min() >= floor - 1e-12

    def test_pure_ml_matches_exact_rationals(self):
        lines = ["b a b a b", "a b b"]
        m = tg.train(lines, order=2, lambdas=(0.0, 1.0), alpha=0.0)
        for ctx, nexts in m.counts[1].items():
            total = sum(nexts.values())
            p = np.exp(m.next_dist(list(ctx)).log_probs)
            for tok in range(m.vocab_size):
                exact = Fraction(nexts.get(tok, 0), total)
                assert p[tok] == pytest.approx(float(exact), abs=1e-12)

    def test_bos_never_exceeds_floor_shares(self, small_model):
        # BOS receives mass only from the alpha floor and unseen-context
        # uniform components, never from counts.
        a = small_model.alpha
        v = small_model.vocab_size
        rng = random.Random(6)
        for _ in range(50):
            ctx = [rng.randrange(v) for _ in range(rng.randrange(0, 3))]
            p_bos = float(np.exp(small_model.next_dist(ctx).log_probs)[BOS])
            assert p_bos <= 1.0 / v + 1e-12

    def test_seen_context_gives_bos_exactly_alpha_share(self, toy_bigram):
        m = tg.train(["a a a a"], order=2, lambdas=(0.0, 1.0), alpha=0.2)
        a = m.vocab.id_of("a")
        p = np.exp(m.next_dist([a]).log_probs)
        assert p[BOS] == pytest.approx(0.2 / m.vocab_size, abs=1e-15)

    def test_invalid_context_id(self, toy_bigram):
        with pytest.raises(InvalidInputError):
            toy_bigram.next_dist([toy_bigram.vocab_size])

    def test_long_context_uses_tail(self, toy_bigram):
        a = toy_bigram.vocab.id_of("a")
        lp1 = toy_bigram.next_dist([a]).log_probs
        lp2 = toy_bigram.next_dist([EOS, UNK, a]).log_probs
        assert np.array_equal(lp1, lp2)


class TestSequenceInformation:
    def test_uniform_model_three_tokens(self):
        m = make_uniform_model(4)
        assert m.sequence_information([3, UNK, EOS]) == pytest.approx(3 * math.log(4), abs=1e-9)

    def test_deterministic_chain_is_zero(self):
        m = tg.train(["a"], order=2, lambdas=(0.0, 1.0), alpha=0.0)
        seq = m.vocab.encode(["a"]) + [EOS]
        assert m.sequence_information(seq) == pytest.approx(0.0, abs=1e-12)

    def test_toy_chain_rule_value(self, toy_bigram):
        seq = toy_bigram.vocab.encode(["a"] * 4) + [EOS]
        expected = -math.log((3 / 4) ** 3 * (1 / 4))
        got = toy_bigram.sequence_information(seq)
        assert got == pytest.approx(expected, abs=1e-9)
        assert got == pytest.approx(2.249341, abs=1e-6)

    def test_matches_direct_chain_product(self, small_model):
        rng = RandomSource(8)
        for _ in range(5):
            seq = [tg.sample(small_model.next_dist([]), rng) for _ in range(12)] + [EOS]
            chain = 1.0
            ctx = []
            for tok in seq:
                chain *= float(np.exp(small_model.next_dist(ctx).log_probs)[tok])
                ctx.append(tok)
            assert small_model.sequence_information(seq) == pytest.approx(
                -math.log(chain), abs=1e-9
            )

    def test_requires_eos_termination(self, toy_bigram):
        with pytest.raises(InvalidInputError):
            toy_bigram.sequence_information(toy_bigram.vocab.encode(["a"]))

    def test_rejects_bad_ids(self, toy_bigram):
        with pytest.raises(InvalidInputError):
            toy_bigram.sequence_information([999, EOS])


class TestPerplexity:
    def test_uniform_hundred(self):
        m = make_uniform_model(100)
        assert m.perplexity([5, 17, 42, EOS]) == pytest.approx(100.0, abs=1e-9)

    def test_every_step_half(self):
        m = tg.train(["a b", "b a"], order=2, lambdas=(0.0, 1.0), alpha=0.0)
        seq = m.vocab.encode(["a", "b"]) + [EOS]
        assert m.perplexity(seq) == pytest.approx(2.0, abs=1e-12)

    def test_geometric_mean_of_inverse_probs(self):
        vocab = Vocab(["a", "b"])
        m = NGramModel(
            order=1, vocab=vocab, lambdas=(1.0,), alpha=0.0,
            counts=[{(): Counter({vocab.id_of("a"): 2, vocab.id_of("b"): 1, EOS: 1})}],
        )
        seq = [vocab.id_of("a"), EOS]  # probs 0.5, 0.25
        assert m.perplexity(seq) == pytest.approx(2 * math.sqrt(2), abs=1e-9)

    def test_empty_sequence_rejected(self, toy_bigram):
        with pytest.raises(InvalidInputError):
            toy_bigram.perplexity([])


class TestLineOrderInvariance:
    def test_counts_and_perplexity_ignore_line_order(self):
        lines = ["a b c", "c b a", "b b", "a c a"]
        shuffled = list(lines)
        random.Random(0).shuffle(shuffled)
        m1, m2 = tg.train(lines), tg.train(shuffled)
        assert tg.save(m1) == tg.save(m2)
        held_out = m1.vocab.encode(["a", "b"]) + [EOS]
        assert m1.perplexity(held_out) == m2.perplexity(held_out)


class TestSaveLoad:
    def test_round_trip_is_bit_exact(self, small_model):
        data = tg.save(small_model)
        clone = tg.load(data)
        assert tg.save(clone) == data
        rng = random.Random(9)
        v = small_model.vocab_size
        for _ in range(20):
            ctx = [rng.randrange(v) for _ in range(rng.randrange(0, 3))]
            assert np.array_equal(
                clone.next_dist(ctx).log_probs, small_model.next_dist(ctx).log_probs
            )

    def test_truncated_bytes_rejected(self, toy_bigram):
        data = tg.save(toy_bigram)
        with pytest.raises(ModelFormatError):
            tg.load(data[: len(data) // 2])

    def test_unknown_version_rejected(self, toy_bigram):
        data = tg.save(toy_bigram).replace(b'"version":1', b'"version":99')
        with pytest.raises(ModelFormatError) as err:
            tg.load(data)
        assert err.value.field == "version"

    def test_wrong_magic_rejected(self, toy_bigram):
        data = tg.save(toy_bigram).replace(b"typicalgen-ngram", b"something-else!!")
        with pytest.raises(ModelFormatError) as err:
            tg.load(data)
        assert err.value.field == "magic"

    def test_missing_field_named(self, toy_bigram):
        import json

        payload = json.loads(tg.save(toy_bigram))
        del payload["alpha"]
        with pytest.raises(ModelFormatError) as err:
            tg.load(json.dumps(payload).encode())
        assert err.value.field == "alpha"

    def test_bad_count_entry_rejected(self, toy_bigram):
        import json

        payload = json.loads(tg.save(toy_bigram))
        payload["counts"][0][1][0][1] = [[0, -3]]
        with pytest.raises(ModelFormatError):
            tg.load(json.dumps(payload).encode())
