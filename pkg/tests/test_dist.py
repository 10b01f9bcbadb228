import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import typicalgen as tg
from typicalgen.dist import InvalidInputError, RandomSource, draw_index

from conftest import random_distributions

scores_lists = st.lists(
    st.floats(min_value=-300, max_value=300, allow_nan=False), min_size=2, max_size=64
)
prob_lists = st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=2, max_size=64)


def dist_from(probs):
    p = np.asarray(probs, dtype=np.float64)
    return tg.log_normalize(np.log(p / p.sum()))


class TestLogNormalize:
    def test_uniform_scores(self):
        d = tg.log_normalize([0.0, 0.0, 0.0, 0.0])
        assert np.allclose(d.log_probs, -math.log(4), atol=1e-12)

    def test_huge_equal_scores_do_not_overflow(self):
        d = tg.log_normalize([1000.0, 1000.0])
        assert np.allclose(d.log_probs, -math.log(2), atol=1e-12)

    def test_already_normalized_is_fixed_point(self):
        scores = np.log([0.5, 0.3, 0.2])
        d = tg.log_normalize(scores)
        assert np.max(np.abs(d.log_probs - scores)) < 1e-12

    @given(scores_lists, st.floats(min_value=-300, max_value=300, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_shift_invariance(self, scores, shift):
        a = tg.log_normalize(scores)
        b = tg.log_normalize(np.asarray(scores) + shift)
        assert np.max(np.abs(a.log_probs - b.log_probs)) < 1e-12

    @given(scores_lists)
    @settings(max_examples=100, deadline=None)
    def test_normalization_invariant(self, scores):
        d = tg.log_normalize(scores)
        assert abs(float(np.exp(d.log_probs).sum()) - 1.0) <= 1e-9

    @pytest.mark.parametrize("bad", [[float("nan"), 0.0], [float("inf"), 1.0], [1.0], []])
    def test_invalid_scores_rejected(self, bad):
        with pytest.raises(InvalidInputError):
            tg.log_normalize(bad)


class TestCategoricalLogDist:
    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidInputError):
            tg.CategoricalLogDist(np.log([0.5, 0.4]))

    def test_rejects_minus_inf(self):
        with pytest.raises(InvalidInputError):
            tg.CategoricalLogDist(np.array([0.0, -np.inf]))

    def test_rejects_short_vector(self):
        with pytest.raises(InvalidInputError):
            tg.CategoricalLogDist(np.array([0.0]))

    def test_log_probs_frozen(self):
        d = tg.log_normalize([0.0, 0.0])
        with pytest.raises(ValueError):
            d.log_probs[0] = 1.0


class TestEntropy:
    def test_uniform_is_log_vocab(self):
        d = tg.log_normalize([0.0] * 8)
        assert tg.entropy(d) == pytest.approx(math.log(8), abs=1e-12)

    def test_hand_evaluated_three_point(self):
        d = dist_from([0.9, 0.05, 0.05])
        expected = -(0.9 * math.log(0.9) + 2 * 0.05 * math.log(0.05))
        assert tg.entropy(d) == pytest.approx(expected, abs=1e-12)
        assert tg.entropy(d) == pytest.approx(0.394398, abs=1e-6)

    def test_near_one_hot_is_tiny(self):
        e = 1e-15
        d = dist_from([1 - 2 * e, e, e])
        assert 0.0 <= tg.entropy(d) < 1e-12

    @given(prob_lists)
    @settings(max_examples=100, deadline=None)
    def test_bounds(self, probs):
        d = dist_from(probs)
        assert 0.0 <= tg.entropy(d) <= math.log(d.vocab_size) + 1e-12


class TestSurprisal:
    def test_half_probability(self):
        d = dist_from([0.5, 0.5])
        assert tg.surprisal(d, 0) == pytest.approx(math.log(2), abs=1e-12)

    def test_near_certain_event(self):
        e = 1e-15
        d = dist_from([1 - 2 * e, e, e])
        assert 0.0 <= tg.surprisal(d, 0) < 1e-12

    def test_hand_evaluated(self):
        d = dist_from([0.9, 0.05, 0.05])
        assert tg.surprisal(d, 0) == pytest.approx(-math.log(0.9), abs=1e-12)
        assert tg.surprisal(d, 0) == pytest.approx(0.105361, abs=1e-6)

    @pytest.mark.parametrize("token", [-1, 3, 100])
    def test_out_of_range_token(self, token):
        d = dist_from([0.5, 0.3, 0.2])
        with pytest.raises(InvalidInputError):
            tg.surprisal(d, token)


class TestEpsilon:
    def test_uniform_gives_zero_everywhere(self):
        d = tg.log_normalize([0.0] * 6)
        assert all(tg.epsilon(d, y) == pytest.approx(0.0, abs=1e-12) for y in range(6))

    def test_near_one_hot_supported_token(self):
        e = 1e-15
        d = dist_from([1 - 2 * e, e, e])
        assert tg.epsilon(d, 0) < 1e-12

    def test_hand_evaluated(self):
        d = dist_from([0.9, 0.05, 0.05])
        assert tg.epsilon(d, 0) == pytest.approx(0.289037, abs=1e-6)

    def test_matches_independent_recomputation(self):
        for d in random_distributions(50, seed=7):
            for y in (0, d.vocab_size - 1):
                expected = abs(tg.entropy(d) - tg.surprisal(d, y))
                assert tg.epsilon(d, y) == expected


class TestApplyTemperature:
    def test_identity_at_one(self):
        for d in random_distributions(20, seed=3):
            out = tg.apply_temperature(d, 1.0)
            assert np.max(np.abs(out.log_probs - d.log_probs)) < 1e-12

    def test_symmetric_pair_unchanged(self):
        d = dist_from([0.5, 0.5])
        for t in (0.1, 0.7, 2.5):
            out = tg.apply_temperature(d, t)
            assert np.allclose(np.exp(out.log_probs), 0.5, atol=1e-12)

    def test_sharpening_hand_value(self):
        d = dist_from([0.8, 0.2])
        out = tg.apply_temperature(d, 0.5)
        # p^2 renormalized: 0.64/0.68, 0.04/0.68
        assert np.exp(out.log_probs[0]) == pytest.approx(16 / 17, abs=1e-12)
        assert np.exp(out.log_probs[1]) == pytest.approx(1 / 17, abs=1e-12)
        assert np.exp(out.log_probs[0]) == pytest.approx(0.941176, abs=1e-6)

    def test_argmax_mass_grows_as_temperature_drops(self):
        d = dist_from([0.5, 0.3, 0.2])
        masses = [np.exp(tg.apply_temperature(d, t).log_probs[0]) for t in (1.0, 0.5, 0.25, 0.1)]
        assert all(b >= a for a, b in zip(masses, masses[1:]))

    @pytest.mark.parametrize("t", [0.0, -1.0, float("inf"), float("nan")])
    def test_invalid_temperature(self, t):
        with pytest.raises(InvalidInputError):
            tg.apply_temperature(dist_from([0.5, 0.5]), t)


class TestSample:
    def test_near_one_hot_dominates(self):
        e = 1e-9
        d = dist_from([1 - 2 * e, e, e])
        rng = RandomSource(123)
        draws = [tg.sample(d, rng) for _ in range(10_000)]
        assert draws.count(0) / len(draws) >= 0.999

    def test_same_seed_same_token(self):
        d = dist_from([0.4, 0.3, 0.3])
        assert tg.sample(d, RandomSource(99)) == tg.sample(d, RandomSource(99))

    def test_empirical_frequencies_match(self):
        d = dist_from([0.5, 0.3, 0.2])
        rng = RandomSource(7)
        counts = np.zeros(3)
        n = 1_000_000
        for _ in range(n):
            counts[tg.sample(d, rng)] += 1
        assert np.max(np.abs(counts / n - [0.5, 0.3, 0.2])) < 0.005

    def test_consumes_exactly_one_uniform(self):
        d = dist_from([0.4, 0.6])
        a, b = RandomSource(5), RandomSource(5)
        tg.sample(d, a)
        b.uniform()
        assert a.uniform() == b.uniform()

    def test_draw_index_hits_every_bin(self):
        probs = np.array([0.25, 0.25, 0.5])
        rng = RandomSource(11)
        seen = {draw_index(probs, rng) for _ in range(1000)}
        assert seen == {0, 1, 2}


class TestRandomSource:
    def test_reproducible_stream(self):
        a = [RandomSource(42).uniform() for _ in range(1)]
        b = [RandomSource(42).uniform() for _ in range(1)]
        assert a == b
        r1, r2 = RandomSource(42), RandomSource(42)
        assert [r1.uniform() for _ in range(100)] == [r2.uniform() for _ in range(100)]

    def test_distinct_seeds_diverge(self):
        assert RandomSource(1).uniform() != RandomSource(2).uniform()

    @pytest.mark.parametrize("seed", [-1, 2**64, 1.5, "x"])
    def test_invalid_seed(self, seed):
        with pytest.raises(InvalidInputError):
            RandomSource(seed)
