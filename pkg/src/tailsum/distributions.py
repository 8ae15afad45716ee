"""Discrete integer distributions, interval oracles and instance normalization."""

from __future__ import annotations

import bisect
import enum
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

Number = Union[int, float]


class InvalidDistribution(ValueError):
    pass


class DiscreteDistribution:
    """Finite-support integer distribution with exact rational masses.

    ``points`` is a tuple of ``(value, mass)`` pairs sorted by value and
    ``prefix[k]`` is the cumulative mass of the first ``k + 1`` points.
    """

    __slots__ = ("points", "prefix", "_values")

    def __init__(self, points: Iterable[tuple[int, Union[Fraction, int, str]]]):
        pts = sorted((int(v), Fraction(m)) for v, m in points)
        if not pts:
            raise InvalidDistribution("distribution has empty support")
        values = [v for v, _ in pts]
        if any(a == b for a, b in zip(values, values[1:])):
            raise InvalidDistribution("duplicate support value")
        if any(m <= 0 for _, m in pts):
            raise InvalidDistribution("support points must carry positive mass")
        prefix = []
        acc = Fraction(0)
        for _, m in pts:
            acc += m
            prefix.append(acc)
        if acc != 1:
            raise InvalidDistribution(f"masses sum to {acc}, not 1")
        self.points = tuple(pts)
        self.prefix = tuple(prefix)
        self._values = values

    @classmethod
    def from_dict(cls, masses: dict) -> "DiscreteDistribution":
        return cls(masses.items())

    @classmethod
    def point_mass(cls, value: int) -> "DiscreteDistribution":
        return cls([(value, 1)])

    @property
    def values(self) -> list[int]:
        return list(self._values)

    @property
    def masses(self) -> list[Fraction]:
        return [m for _, m in self.points]

    @property
    def min_value(self) -> int:
        return self._values[0]

    @property
    def max_value(self) -> int:
        return self._values[-1]

    def mass(self, value: int) -> Fraction:
        k = bisect.bisect_left(self._values, value)
        if k < len(self._values) and self._values[k] == value:
            return self.points[k][1]
        return Fraction(0)

    def cdf(self, x: Number) -> Fraction:
        k = bisect.bisect_right(self._values, x)
        return self.prefix[k - 1] if k else Fraction(0)

    def shifted(self, offset: int) -> "DiscreteDistribution":
        return DiscreteDistribution((v + offset, m) for v, m in self.points)

    def clamped_above(self, cap: int) -> "DiscreteDistribution":
        """Move all mass at values >= ``cap`` onto ``cap``."""
        kept = [(v, m) for v, m in self.points if v < cap]
        tail = sum((m for v, m in self.points if v >= cap), Fraction(0))
        if tail:
            kept.append((cap, tail))
        return DiscreteDistribution(kept)

    def as_dict(self) -> dict[int, Fraction]:
        return dict(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return self.points == other.points

    def __hash__(self) -> int:
        return hash(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        body = ", ".join(f"{v}: {m}" for v, m in self.points)
        return f"DiscreteDistribution({{{body}}})"


def truncate_dyadic(value: Fraction, bits: int) -> Fraction:
    """Round ``value`` in [0, 1] down to a multiple of ``2**-bits``."""
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    scaled = (value.numerator << bits) // value.denominator
    return Fraction(scaled, 1 << bits)


class DistributionOracle:
    """Answers ``Pr[n1 <= X <= n2]`` for closed integer intervals.

    Bounds may be ``-inf``/``+inf``. Every call increments ``calls``.
    Subclasses implement ``_answer``.
    """

    precision: Optional[int] = None

    def __init__(self) -> None:
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self) -> None:
        with self._lock:
            self._calls = 0

    def query(self, n1: Number, n2: Number):
        with self._lock:
            self._calls += 1
        if n1 > n2:
            return self._zero()
        return self._answer(n1, n2)

    def _zero(self):
        return Fraction(0)

    def _answer(self, n1: Number, n2: Number):
        raise NotImplementedError

    @property
    def distribution(self) -> DiscreteDistribution:
        raise NotImplementedError


class ExplicitOracle(DistributionOracle):
    """Prefix-sum oracle over an explicit distribution.

    A query binary-searches the sorted support for the smallest value
    ``>= n1`` and the largest value ``<= n2`` and subtracts prefix sums.
    With ``numeric=float`` answers are floats (uncertified fast mode).
    """

    def __init__(self, dist: DiscreteDistribution, numeric=Fraction):
        super().__init__()
        self._dist = dist
        self._values = dist.values
        self.numeric = numeric
        self._diffs: dict = {}
        if numeric is Fraction:
            self._prefix = (Fraction(0),) + dist.prefix
        elif numeric is float:
            self._prefix = (0.0,) + tuple(float(p) for p in dist.prefix[:-1]) + (1.0,)
        else:
            raise ValueError(f"unsupported numeric type {numeric!r}")

    @property
    def distribution(self) -> DiscreteDistribution:
        return self._dist

    def _zero(self):
        return self._prefix[0]

    def _answer(self, n1, n2):
        lo = bisect.bisect_left(self._values, n1)
        hi = bisect.bisect_right(self._values, n2)
        if hi <= lo:
            return self._prefix[0]
        key = (lo, hi)
        hit = self._diffs.get(key)
        if hit is None:
            hit = self._diffs[key] = self._prefix[hi] - self._prefix[lo]
        return hit


class TruncatedOracle(DistributionOracle):
    """Bit-model wrapper: answers are the inner answers truncated to ``L`` bits.

    Truncation rounds toward zero on the grid ``2**-L``, so exact 0 and 1
    pass through unchanged and the error lies in ``[0, 2**-L)``.
    Answers are memoised per interval; the call counter still counts
    every query.
    """

    def __init__(self, inner: DistributionOracle, L: int):
        if L < 1:
            raise ValueError("precision L must be >= 1")
        super().__init__()
        self.inner = inner
        self.precision = int(L)
        self._memo: dict = {}

    @property
    def distribution(self) -> DiscreteDistribution:
        return self.inner.distribution

    def _answer(self, n1, n2):
        key = (n1, n2)
        hit = self._memo.get(key)
        if hit is None:
            hit = truncate_dyadic(Fraction(self.inner.query(n1, n2)), self.precision)
            self._memo[key] = hit
        return hit


def explicit_oracle(dist: DiscreteDistribution, numeric=Fraction) -> ExplicitOracle:
    return ExplicitOracle(dist, numeric)


def truncated_oracle(inner: DistributionOracle, L: int) -> TruncatedOracle:
    return TruncatedOracle(inner, L)


def estimate_log_delta(oracles: Sequence[DistributionOracle]) -> int:
    """Upper bound on ``log2(1/Delta)`` from the leading bit of each ``Pr[X_i = 0]``.

    Precision ``l`` counts the units bit, so a probe at precision ``l``
    sees ``Pr[X_i = 0]`` on the grid ``2**-(l-1)``. The first precision with
    a nonzero answer is ``ceil(-log2 Pr[X_i = 0]) + 1``.
    """
    total = 0
    for idx, oracle in enumerate(oracles):
        ell = 1
        while True:
            value = Fraction(oracle.query(0, 0))
            if value == 0:
                raise ValueError(f"Pr[X_{idx + 1} = 0] is zero; instance is not normalized")
            if truncate_dyadic(value, ell - 1) != 0:
                break
            ell += 1
        total += ell
    return total


class TrivialAnswer(enum.Enum):
    ZERO = "ZERO"
    ONE = "ONE"


@dataclass
class NormalizedInstance:
    """Shifted, clamped instance in canonical form.

    ``threshold`` is the post-shift threshold and ``shift_total`` the sum
    of the support minima that was subtracted. For a ``ZERO`` trivial
    answer the distributions are shifted but not clamped.
    """

    distributions: list[DiscreteDistribution]
    threshold: int
    shift_total: int
    delta: Fraction
    trivial_answer: Optional[TrivialAnswer] = None
    oracles: list[DistributionOracle] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.oracles:
            self.oracles = [explicit_oracle(d) for d in self.distributions]

    @property
    def n(self) -> int:
        return len(self.distributions)

    def total_oracle_calls(self) -> int:
        return sum(o.calls for o in self.oracles)


def normalize(raw: Sequence[DiscreteDistribution], C: int) -> NormalizedInstance:
    if not raw:
        raise ValueError("instance needs at least one distribution")
    for d in raw:
        if not isinstance(d, DiscreteDistribution):
            raise TypeError("expected DiscreteDistribution instances")
        if sum(d.masses, Fraction(0)) == 0:
            raise InvalidDistribution("distribution with zero total mass")
    shift = sum(d.min_value for d in raw)
    threshold = int(C) - shift
    shifted = [d.shifted(-d.min_value) for d in raw]
    delta = Fraction(1)
    for d in shifted:
        delta *= d.mass(0)

    if threshold < 0:
        return NormalizedInstance(shifted, threshold, shift, delta, TrivialAnswer.ZERO)
    trivial = None
    if sum(d.max_value for d in shifted) <= threshold:
        trivial = TrivialAnswer.ONE
    clamped = [d.clamped_above(threshold + 1) for d in shifted]
    return NormalizedInstance(clamped, threshold, shift, delta, trivial)


def sample(dist: DiscreteDistribution, rng: np.random.Generator) -> int:
    """Draw one value by inverting the CDF at a uniform variate."""
    u = rng.random()
    cum = _float_cdf(dist)
    k = int(np.searchsorted(cum, u, side="right"))
    return dist.points[min(k, len(dist.points) - 1)][0]


def sample_many(dist: DiscreteDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    cum = _float_cdf(dist)
    idx = np.searchsorted(cum, rng.random(size), side="right")
    np.minimum(idx, len(dist.points) - 1, out=idx)
    return np.asarray(dist.values, dtype=np.int64)[idx]


def _float_cdf(dist: DiscreteDistribution) -> np.ndarray:
    cum = np.array([float(p) for p in dist.prefix], dtype=np.float64)
    cum[-1] = 1.0
    return cum
