import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailsum import (
    DiscreteDistribution,
    InvalidDistribution,
    TrivialAnswer,
    estimate_log_delta,
    explicit_oracle,
    normalize,
    sample,
    truncated_oracle,
)
from tailsum.distributions import sample_many, truncate_dyadic

from conftest import brute_force_probability, dist


@st.composite
def distributions(draw, max_support=6, lo=-5, hi=15):
    values = draw(st.lists(st.integers(lo, hi), min_size=1, max_size=max_support, unique=True))
    weights = draw(st.lists(st.integers(1, 20), min_size=len(values), max_size=len(values)))
    total = sum(weights)
    return DiscreteDistribution([(v, Fraction(w, total)) for v, w in zip(values, weights)])


class TestDiscreteDistribution:
    def test_prefix_sums(self):
        d = dist({5: Fraction(1, 4), 0: Fraction(1, 4), 2: Fraction(1, 2)})
        assert d.values == [0, 2, 5]
        assert d.prefix == (Fraction(1, 4), Fraction(3, 4), Fraction(1))

    @pytest.mark.parametrize("points", [
        [(0, Fraction(1, 2)), (1, Fraction(1, 3))],
        [(0, Fraction(1)), (1, Fraction(0))],
        [(0, Fraction(1, 2)), (0, Fraction(1, 2))],
        [],
    ])
    def test_rejects_invalid(self, points):
        with pytest.raises(InvalidDistribution):
            DiscreteDistribution(points)

    def test_clamp(self):
        d = dist({0: Fraction(3, 10), 10: Fraction(7, 10)})
        assert d.clamped_above(5).as_dict() == {0: Fraction(3, 10), 5: Fraction(7, 10)}


class TestExplicitOracle:
    d = dist({0: Fraction(1, 4), 2: Fraction(1, 2), 5: Fraction(1, 4)})

    @pytest.mark.parametrize("n1,n2,expected", [
        (1, 4, Fraction(1, 2)),
        (0, 5, Fraction(1)),
        (3, 4, Fraction(0)),
        (4, 1, Fraction(0)),
        (-math.inf, 0, Fraction(1, 4)),
        (3, math.inf, Fraction(1, 4)),
    ])
    def test_queries(self, n1, n2, expected):
        assert explicit_oracle(self.d).query(n1, n2) == expected

    def test_counts_calls(self):
        o = explicit_oracle(self.d)
        for _ in range(3):
            o.query(0, 1)
        o.query(5, 1)
        assert o.calls == 4

    @given(distributions(), st.integers(-8, 18), st.integers(0, 10), st.integers(1, 10))
    def test_additivity(self, d, n1, a, b):
        o = explicit_oracle(d)
        n2, n3 = n1 + a, n1 + a + b
        assert o.query(n1, n2) + o.query(n2 + 1, n3) == o.query(n1, n3)

    @given(distributions(), st.integers(-8, 18), st.integers(-8, 18))
    def test_matches_direct_sum(self, d, n1, n2):
        direct = sum((m for v, m in d.points if n1 <= v <= n2), Fraction(0))
        assert explicit_oracle(d).query(n1, n2) == direct


class TestTruncation:
    def constant(self, value):
        return explicit_oracle(dist({0: value, 1: 1 - value})) if value < 1 else explicit_oracle(dist({0: 1}))

    @pytest.mark.parametrize("value,L,expected", [
        (Fraction(5, 8), 2, Fraction(1, 2)),
        (Fraction(5, 8), 3, Fraction(5, 8)),
        (Fraction(1), 1, Fraction(1)),
        (Fraction(1), 7, Fraction(1)),
    ])
    def test_examples(self, value, L, expected):
        assert truncated_oracle(self.constant(value), L).query(0, 0) == expected

    def test_zero_passes_through(self):
        o = truncated_oracle(explicit_oracle(dist({0: Fraction(1, 3), 4: Fraction(2, 3)})), 5)
        assert o.query(1, 3) == 0

    def test_rejects_zero_precision(self):
        with pytest.raises(ValueError):
            truncated_oracle(explicit_oracle(dist({0: 1})), 0)

    @given(distributions(lo=0), st.integers(1, 40), st.integers(-2, 16), st.integers(-2, 16))
    def test_one_sided_error(self, d, L, n1, n2):
        exact = explicit_oracle(d).query(n1, n2)
        got = truncated_oracle(explicit_oracle(d), L).query(n1, n2)
        assert 0 <= exact - got < Fraction(1, 2 ** L)
        assert (got * 2 ** L).denominator == 1

    def test_counts_every_query(self):
        inner = explicit_oracle(dist(COIN_LIKE))
        o = truncated_oracle(inner, 4)
        for _ in range(5):
            o.query(0, 0)
        assert o.calls == 5


COIN_LIKE = {0: Fraction(1, 2), 1: Fraction(1, 2)}


class TestEstimateLogDelta:
    @pytest.mark.parametrize("p0s,expected", [
        ([Fraction(1, 2)], 2),
        ([Fraction(1, 2)] * 3, 6),
        ([Fraction(1)], 1),
        ([Fraction(1, 4)], 3),
        ([Fraction(3, 10)], 3),
    ])
    def test_examples(self, p0s, expected):
        oracles = []
        for p in p0s:
            d = dist({0: p, 1: 1 - p}) if p < 1 else dist({0: 1})
            oracles.append(explicit_oracle(d))
        assert estimate_log_delta(oracles) == expected

    def test_probe_count(self):
        o = explicit_oracle(dist({0: Fraction(1, 4), 3: Fraction(3, 4)}))
        estimate_log_delta([o])
        assert o.calls == 3

    def test_zero_mass_at_origin(self):
        with pytest.raises(ValueError):
            estimate_log_delta([explicit_oracle(dist({1: 1}))])

    @given(st.lists(st.integers(1, 1000), min_size=1, max_size=5), st.integers(1, 1000))
    def test_upper_bounds_log_inverse_delta(self, nums, extra):
        oracles = []
        delta = Fraction(1)
        for k in nums:
            p = Fraction(k, k + extra)
            delta *= p
            oracles.append(explicit_oracle(dist({0: p, 2: 1 - p})))
        bound = estimate_log_delta(oracles)
        assert Fraction(2) ** bound * delta >= 1
        expected = sum(math.ceil(-math.log2(Fraction(k, k + extra))) + 1 for k in nums)
        assert bound == expected


class TestNormalize:
    def test_shift(self):
        inst = normalize([dist({1: Fraction(1, 2), 3: Fraction(1, 2)}), dist({2: 1})], 4)
        assert inst.threshold == 1
        assert inst.shift_total == 3
        assert inst.delta == Fraction(1, 2)
        assert inst.distributions[1].as_dict() == {0: 1}
        # support clamped at C' + 1 = 2, so the point 2 survives unchanged
        assert inst.distributions[0].as_dict() == {0: Fraction(1, 2), 2: Fraction(1, 2)}
        assert inst.trivial_answer is None

    def test_clamp(self):
        inst = normalize([dist({0: Fraction(3, 10), 10: Fraction(7, 10)})], 4)
        assert inst.threshold == 4
        assert inst.distributions[0].as_dict() == {0: Fraction(3, 10), 5: Fraction(7, 10)}
        assert inst.delta == Fraction(3, 10)

    def test_trivial_zero(self):
        inst = normalize([dist({2: 1})], 1)
        assert inst.trivial_answer is TrivialAnswer.ZERO
        assert inst.threshold == -1

    def test_trivial_one(self):
        inst = normalize([dist({0: Fraction(1, 2), 3: Fraction(1, 2)}), dist({-1: Fraction(1, 3), 1: Fraction(2, 3)})], 4)
        assert inst.trivial_answer is TrivialAnswer.ONE

    def test_empty(self):
        with pytest.raises(ValueError):
            normalize([], 3)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(distributions(max_support=4, lo=-4, hi=8), min_size=1, max_size=3), st.integers(-10, 20))
    def test_invariants_and_answer_preservation(self, raw, C):
        inst = normalize(raw, C)
        truth = brute_force_probability(raw, C)
        if inst.trivial_answer is TrivialAnswer.ZERO:
            assert truth == 0
            return
        if inst.trivial_answer is TrivialAnswer.ONE:
            assert truth == 1
        for d in inst.distributions:
            assert d.min_value == 0 and d.mass(0) > 0
            assert d.max_value <= inst.threshold + 1
        assert inst.delta > 0
        assert brute_force_probability(inst.distributions, inst.threshold) == truth


class TestSample:
    def test_point_mass(self):
        rng = np.random.default_rng(3)
        assert all(sample(dist({7: 1}), rng) == 7 for _ in range(50))

    def test_fair_coin_mean(self):
        # Hoeffding: Pr[|mean - 1/2| > 0.01] <= 2 exp(-2 * 1e5 * 1e-4) ~ 4e-9
        draws = sample_many(dist(COIN_LIKE), np.random.default_rng(11), 100_000)
        assert 0.49 <= draws.mean() <= 0.51

    def test_scalar_draws_match_frequencies(self):
        rng = np.random.default_rng(5)
        d = dist({0: Fraction(1, 2), 1: Fraction(1, 2)})
        mean = sum(sample(d, rng) for _ in range(20_000)) / 20_000
        assert abs(mean - 0.5) < 0.02

    def test_deterministic(self):
        d = dist({0: Fraction(1, 5), 3: Fraction(1, 2), 9: Fraction(3, 10)})
        a = [sample(d, np.random.default_rng(42)) for _ in range(1)] + list(sample_many(d, np.random.default_rng(42), 100))
        b = [sample(d, np.random.default_rng(42)) for _ in range(1)] + list(sample_many(d, np.random.default_rng(42), 100))
        assert a == b

    def test_only_support_values(self):
        d = dist({-2: Fraction(1, 3), 4: Fraction(2, 3)})
        assert set(sample_many(d, np.random.default_rng(0), 1000).tolist()) <= {-2, 4}


def test_truncate_dyadic_grid():
    assert truncate_dyadic(Fraction(2, 3), 0) == 0
    assert truncate_dyadic(Fraction(1), 0) == 1
    assert truncate_dyadic(Fraction(2, 3), 3) == Fraction(5, 8)
