import itertools
import random
from fractions import Fraction

import pytest

from tailsum import DiscreteDistribution, normalize

ACCEPTANCE_RESULTS: dict = {}


def dist(mapping) -> DiscreteDistribution:
    return DiscreteDistribution([(v, Fraction(m)) for v, m in mapping.items()])


COIN = {0: Fraction(1, 2), 1: Fraction(1, 2)}
DIE = {v: Fraction(1, 6) for v in range(1, 7)}


def brute_force_probability(dists, C) -> Fraction:
    """Pr[sum <= C] by enumerating the full product space."""
    total = Fraction(0)
    for combo in itertools.product(*(d.points for d in dists)):
        if sum(v for v, _ in combo) <= C:
            weight = Fraction(1)
            for _, m in combo:
                weight *= m
            total += weight
    return total


def brute_force_sum_pmf(dists) -> dict:
    pmf: dict = {}
    for combo in itertools.product(*(d.points for d in dists)):
        v = sum(x for x, _ in combo)
        w = Fraction(1)
        for _, m in combo:
            w *= m
        pmf[v] = pmf.get(v, Fraction(0)) + w
    return pmf


def brute_tau(pmf: dict, a) -> float:
    """Least c >= 0 with Pr[S <= c] >= a, by scanning upward."""
    if a == 0:
        return float("-inf")
    if a > 1:
        return float("inf")
    acc = Fraction(0)
    for c in range(0, max(pmf) + 1):
        acc += pmf.get(c, Fraction(0))
        if acc >= a:
            return c
    return float("inf")


def random_distribution(rng: random.Random, max_support: int, lo: int, hi: int, max_weight: int = 10):
    k = rng.randint(1, max_support)
    values = rng.sample(range(lo, hi + 1), k)
    weights = [rng.randint(1, max_weight) for _ in values]
    total = sum(weights)
    return DiscreteDistribution([(v, Fraction(w, total)) for v, w in zip(values, weights)])


def random_instance(rng: random.Random, max_n=6, max_support=8, hi=20, max_C=60, nontrivial=True):
    while True:
        n = rng.randint(1, max_n)
        raw = [random_distribution(rng, max_support, 0, hi) for _ in range(n)]
        C = rng.randint(0, max_C)
        inst = normalize(raw, C)
        if not nontrivial or inst.trivial_answer is None:
            return raw, C, inst


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
