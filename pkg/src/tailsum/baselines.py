"""Ground-truth convolution and the Monte-Carlo estimator."""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .distributions import DiscreteDistribution, NormalizedInstance, sample_many

DEFAULT_MAX_CELLS = 10**7
MC_CHUNK = 1 << 16


class SizeGuardError(RuntimeError):
    pass


@dataclass
class ExactPmf:
    """Dense pmf of a nonnegative integer variable; ``masses[c] = Pr[S = c]``."""

    masses: list[Fraction]

    def cdf(self) -> list[Fraction]:
        out = []
        acc = Fraction(0)
        for m in self.masses:
            acc += m
            out.append(acc)
        return out

    def prob_at_most(self, c) -> Fraction:
        if c < 0:
            return Fraction(0)
        return sum(self.masses[: int(min(c, len(self.masses) - 1)) + 1], Fraction(0))


def _dense(dist: DiscreteDistribution) -> list[Fraction]:
    out = [Fraction(0)] * (dist.max_value + 1)
    for v, m in dist.points:
        out[v] = m
    return out


def convolve(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    nz_b = [(k, q) for k, q in enumerate(b) if q]
    for i, p in enumerate(a):
        if not p:
            continue
        for k, q in nz_b:
            out[i + k] += p * q
    return out


def _check_nonnegative(distributions: Sequence[DiscreteDistribution]) -> None:
    if any(d.min_value < 0 for d in distributions):
        raise ValueError("exact convolution expects nonnegative supports; normalize first")


def partial_sum_pmfs(instance: NormalizedInstance, max_cells: int = DEFAULT_MAX_CELLS) -> list[ExactPmf]:
    """Pmfs of ``X_1``, ``X_1 + X_2``, ..., ``X_1 + ... + X_n``."""
    dists = instance.distributions
    _check_nonnegative(dists)
    if sum(d.max_value + 1 for d in dists) > max_cells:
        raise SizeGuardError(f"dense convolution needs more than {max_cells} cells")
    out = []
    acc = [Fraction(1)]
    for d in dists:
        acc = convolve(acc, _dense(d))
        out.append(ExactPmf(acc))
    return out


def exact_probability(instance: NormalizedInstance, threshold: int, max_cells: int = DEFAULT_MAX_CELLS) -> Fraction:
    """``Pr[X_1 + ... + X_n <= threshold]`` by exact dense convolution."""
    return partial_sum_pmfs(instance, max_cells)[-1].prob_at_most(threshold)


def tau_from_cdf(cdf: Sequence[Fraction], a) -> float:
    """Least ``c >= 0`` with ``cdf[c] >= a``; ``+inf`` for ``a > 1``, ``-inf`` for ``a = 0``."""
    if a == 0:
        return -math.inf
    if a > 1:
        return math.inf
    k = bisect.bisect_left(cdf, a)
    return k if k < len(cdf) else math.inf


def exact_tau(instance: NormalizedInstance, i: int, a, max_cells: int = DEFAULT_MAX_CELLS):
    if not 1 <= i <= instance.n:
        raise IndexError(f"i={i} outside 1..{instance.n}")
    pmf = partial_sum_pmfs(instance, max_cells)[i - 1]
    return tau_from_cdf(pmf.cdf(), a)


@dataclass
class MonteCarloResult:
    estimate: float
    radius: float
    hits: int
    samples: int
    delta: float
    seed: int

    @property
    def interval(self) -> tuple[float, float]:
        return max(0.0, self.estimate - self.radius), min(1.0, self.estimate + self.radius)


def hoeffding_radius(samples: int, delta: float) -> float:
    return math.sqrt(math.log(2 / delta) / (2 * samples))


def monte_carlo(
    instance: NormalizedInstance,
    threshold: int,
    samples: int,
    seed: int,
    delta: float = 1e-3,
    parallelism: int = 1,
) -> MonteCarloResult:
    """Empirical frequency of ``sum X_i <= threshold`` over ``samples`` draws.

    Draws are split into fixed-size chunks, each seeded from its own
    child of ``SeedSequence(seed)``; the result does not depend on
    ``parallelism``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    dists = instance.distributions

    def chunk(args) -> int:
        size, child = args
        rng = np.random.default_rng(child)
        total = np.zeros(size, dtype=np.int64)
        for d in dists:
            total += sample_many(d, rng, size)
        return int(np.count_nonzero(total <= threshold))

    jobs = list(zip(sizes, children))
    if parallelism > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            hits = sum(pool.map(chunk, jobs))
    else:
        hits = sum(map(chunk, jobs))
    return MonteCarloResult(hits / samples, hoeffding_radius(samples, delta), hits, samples, delta, seed)
