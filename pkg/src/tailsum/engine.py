"""Quantile-grid dynamic program approximating Pr[X_1 + ... + X_n <= C].

Row ``i`` of the table holds integers ``T(i, j)`` approximating the least
threshold at which the partial sum ``X_1 + ... + X_i`` reaches probability
``Q**-j``. Row 1 comes from binary search on the first oracle, each later
cell from a binary search whose feasibility test aggregates the previous
row into at most ``s + 2`` interval queries.

Exact mode works in rationals. Comparisons go through a float pre-check
with a rigorous error margin and fall back to exact arithmetic whenever
the float result is inside the margin, so decisions are always the exact
ones.
"""

from __future__ import annotations

import bisect
import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .distributions import (
    DistributionOracle,
    NormalizedInstance,
    estimate_log_delta,
    explicit_oracle,
    truncate_dyadic,
    truncated_oracle,
)

INF = math.inf
NEG_INF = -math.inf

Extended = Union[int, float]

# relative slack for float pre-checks; float error is below 1e-12 whenever
# every scaled exponent stays under FLOAT_EXP_LIMIT in absolute value
FILTER_MARGIN = 1e-9
FLOAT_EXP_LIMIT = 690.0


class ParameterError(ValueError):
    pass


class OracleError(RuntimeError):
    pass


class Mode(enum.Enum):
    EXACT_RATIONAL = "EXACT_RATIONAL"
    BIT = "BIT"
    FLOAT = "FLOAT"


def ceil_log2(x: Fraction) -> int:
    """Smallest integer k with 2**k >= x, for rational x > 0."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("ceil_log2 needs a positive argument")
    num, den = x.numerator, x.denominator
    k = num.bit_length() - den.bit_length()
    # 2**(k-1) < x < 2**(k+1)
    while _pow2_ge(k - 1, num, den):
        k -= 1
    while not _pow2_ge(k, num, den):
        k += 1
    return k


def _pow2_ge(k: int, num: int, den: int) -> bool:
    # 2**k >= num/den
    if k >= 0:
        return den << k >= num
    return den >= num << -k


def _ceil_log_base(base: Fraction, target: Fraction) -> int:
    """Smallest s >= 0 with base**s >= target, for base > 1."""
    if target <= 1:
        return 0
    guess = math.ceil(_log(target) / _log(base))
    s = max(guess - 2, 0)
    power = base ** s
    while power < target:
        power *= base
        s += 1
    while s > 0 and power / base >= target:
        power /= base
        s -= 1
    return s


def _log(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def _validate_epsilon(epsilon) -> Fraction:
    eps = Fraction(epsilon)
    if not 0 < eps <= 1:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    return eps


class PowerTable:
    """Exact powers ``Q**k``, computed on demand and cached.

    Indices may be negative. ``Q**k`` for ``k`` in ``[0, 2s+2]`` covers
    every power the scaled feasibility test uses.
    """

    def __init__(self, q: Fraction):
        self.q = q
        self._cache: dict[int, Fraction] = {0: Fraction(1), 1: q}

    def __getitem__(self, k: int) -> Fraction:
        hit = self._cache.get(k)
        if hit is None:
            hit = self.q ** k
            self._cache[k] = hit
        return hit


@dataclass
class FptasParams:
    epsilon: Fraction
    n: int
    Q: Union[Fraction, float]
    s: int
    exact: bool = True
    fast_filter: bool = True
    q_powers: Optional[PowerTable] = None
    log_q: float = field(init=False)

    def __post_init__(self) -> None:
        if self.exact:
            if self.q_powers is None:
                self.q_powers = PowerTable(self.Q)
            self.log_q = math.log1p(float(self.Q - 1))
        else:
            self.log_q = math.log(self.Q)

    @classmethod
    def exact_mode(cls, n: int, epsilon, delta: Fraction, **kw) -> "FptasParams":
        eps = _validate_epsilon(epsilon)
        q = 1 + eps / n
        s = _ceil_log_base(q, 1 / Fraction(delta))
        return cls(eps, n, q, s, **kw)

    @classmethod
    def float_mode(cls, n: int, epsilon, delta: Fraction) -> "FptasParams":
        eps = _validate_epsilon(epsilon)
        q = 1.0 + float(eps) / n
        s = max(0, math.ceil(-_log(Fraction(delta)) / math.log(q) - 1e-12))
        return cls(eps, n, q, s, exact=False, fast_filter=False)

    def power(self, k: int):
        if self.exact:
            return self.q_powers[k]
        return self.Q ** k


@dataclass
class BitModeParams:
    ell_q: int
    L: int
    ell_ans: int
    eta: Fraction = Fraction(0)
    log_delta_bound: int = 0

    @classmethod
    def admissible_floor(cls, n: int, epsilon, log_delta_bound: int) -> tuple["BitModeParams", Fraction, int]:
        """Minimal admissible precisions. Returns ``(params, Q, s)``."""
        eps = _validate_epsilon(epsilon)
        ell_q = ceil_log2(Fraction(n) / eps) + 2
        q = 1 + Fraction(1, 1 << ell_q)
        s = _ceil_log_base(q, Fraction(1 << log_delta_bound))
        L = ceil_log2(32 * n * n * q / (eps * eps)) + s + 1
        ell_ans = s + ceil_log2(q / eps)
        params = cls(ell_q, L, ell_ans, bit_eta(q, s, L), log_delta_bound)
        return params, q, s


def bit_eta(q: Fraction, s: int, L: int) -> Fraction:
    return (q ** (s + 1) - 1 / q) / (q - 1) / Fraction(1 << (L - 1))


class Row:
    """One computed row ``T(i, 0..s)`` plus its change points.

    ``break_m`` lists every ``m`` in ``[0, s+1]`` with
    ``T(i, m-1) > T(i, m)`` under the extended lookup; only those segments
    can be nonempty.
    """

    __slots__ = ("values", "break_m", "break_v", "_neg")

    def __init__(self, values: Sequence[int]):
        self.values = list(values)
        s = len(self.values) - 1
        bm = [0]
        bv = [self.values[0]]
        for m in range(1, s + 1):
            v = self.values[m]
            if v < bv[-1]:
                bm.append(m)
                bv.append(v)
        if bv[-1] > 0:
            bm.append(s + 1)
            bv.append(0)
        self.break_m = bm
        self.break_v = bv
        self._neg = [-v for v in bv]

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class DpTable:
    n: int
    s: int
    rows: list[list[int]] = field(default_factory=list)
    cell_calls: list[list[int]] = field(default_factory=list)

    def lookup(self, i: int, j: Extended) -> Extended:
        return extended_lookup(self, i, j)


def extended_lookup(table: DpTable, i: int, j: Extended) -> Extended:
    if not 1 <= i <= len(table.rows):
        raise IndexError(f"row {i} outside 1..{len(table.rows)}")
    if j == INF:
        return NEG_INF
    if j < 0:
        return INF
    if j > table.s:
        return 0
    return table.rows[i - 1][int(j)]


@dataclass
class SegmentWeights:
    """Segment masses for one guess, stored sparsely.

    ``nonzero`` maps segment index ``m`` in ``[0, s+1]`` to ``P(m)``.
    ``tail`` is ``P(s+2)``, the mass beyond the guess.
    """

    j: int
    s: int
    nonzero: dict
    calls: int
    params: FptasParams

    @property
    def tail(self):
        zero = Fraction(0) if self.params.exact else 0.0
        return 1 - sum(self.nonzero.values(), zero)

    @property
    def probs(self) -> list:
        zero = Fraction(0) if self.params.exact else 0.0
        out = [zero] * (self.s + 3)
        for m, p in self.nonzero.items():
            out[m] = p
        out[self.s + 2] = self.tail
        return out

    @property
    def z_scaled(self):
        base = self.j + self.s + 1
        power = self.params.power
        zero = Fraction(0) if self.params.exact else 0.0
        return sum((power(base - m) * p for m, p in self.nonzero.items()), zero)


def segment_probabilities(
    oracle: DistributionOracle,
    guess: int,
    prev_row,
    params: FptasParams,
    j: int,
    support_cap: Optional[int] = None,
) -> SegmentWeights:
    """Masses of ``X_i`` on the segments induced by ``guess`` and row ``i-1``.

    Segment ``m`` is ``(guess - T(i-1, m-1), guess - T(i-1, m)]``. Empty
    segments, segments below 0 and (when ``support_cap`` is given)
    segments entirely above it are not queried.
    """
    row = prev_row if isinstance(prev_row, Row) else Row(prev_row)
    s = params.s
    bv = row.break_v
    bm = row.break_m
    k0 = bisect.bisect_left(row._neg, -guess)
    k1 = len(bv) - 1
    if support_cap is not None:
        k1 = min(k1, bisect.bisect_left(row._neg, support_cap - guess))
    nonzero = {}
    for k in range(k0, k1 + 1):
        lo = NEG_INF if k == 0 else guess - bv[k - 1] + 1
        p = oracle.query(lo, guess - bv[k])
        if p:
            nonzero[bm[k]] = p
    return SegmentWeights(j, s, nonzero, max(0, k1 - k0 + 1), params)


def _at_least(terms, params: FptasParams) -> bool:
    """Decide ``sum(p * Q**e for p, e in terms) >= 1`` exactly."""
    if not params.exact:
        return sum(p * params.Q ** e for p, e in terms) >= 1
    if params.fast_filter:
        log_q = params.log_q
        approx = 0.0
        ok = True
        for p, e in terms:
            x = e * log_q
            if abs(x) > FLOAT_EXP_LIMIT:
                ok = False
                break
            approx += float(p) * math.exp(x)
        if ok:
            if approx >= 1 + FILTER_MARGIN:
                return True
            if approx <= 1 - FILTER_MARGIN:
                return False
    # exact: multiply through by Q**shift so every exponent is nonnegative
    shift = -min(0, min((e for _, e in terms), default=0))
    power = params.q_powers
    lhs = sum((p * power[e + shift] for p, e in terms), Fraction(0))
    return lhs >= power[shift]


def criterion(weights: SegmentWeights, params: FptasParams) -> bool:
    """Feasibility test ``Z >= Q**(s+1)`` with ``Z = sum_m Q**(j+s+1-m) P(m)``."""
    j = weights.j
    return _at_least([(p, j - m) for m, p in weights.nonzero.items()], params)


def base_case_tau(oracle: DistributionOracle, j: int, params: FptasParams, threshold: int) -> int:
    """Least ``t`` in ``[0, threshold+1]`` with ``Q**j * Pr[X_1 <= t] >= 1``."""
    return _base_case(oracle, j, params, threshold)[0]


def _base_case(oracle, j, params, threshold):
    lo, hi = 0, threshold + 1
    calls = 0
    while hi > lo:
        t = (lo + hi) // 2
        p = oracle.query(0, t)
        calls += 1
        if p and _at_least([(p, j)], params):
            hi = t
        else:
            lo = t + 1
    return lo, calls


def recursion_cell(i: int, j: int, prev_row, oracle: DistributionOracle, params: FptasParams, threshold: int) -> int:
    """Binary search for ``T(i, j)`` over ``[0, n(threshold+1)]``."""
    row = prev_row if isinstance(prev_row, Row) else Row(prev_row)
    return _solve_cell(i, j, row, oracle, params, threshold)[0]


def _solve_cell(i, j, row, oracle, params, threshold):
    top = params.n * (threshold + 1)
    cap = threshold + 1
    lo, hi = 0, top
    calls = 0
    seen_true = False
    while hi > lo:
        guess = (lo + hi) // 2
        w = segment_probabilities(oracle, guess, row, params, j, cap)
        calls += w.calls
        if criterion(w, params):
            hi = guess
            seen_true = True
        else:
            lo = guess + 1
    if not seen_true and lo == top:
        w = segment_probabilities(oracle, top, row, params, j, cap)
        calls += w.calls
        if not criterion(w, params):
            raise OracleError(f"feasibility test fails at the top of the range for cell ({i}, {j})")
    return lo, calls


def choose_jstar(final_row: Sequence[int], threshold: int, s: int) -> int:
    for j, t in enumerate(final_row):
        if t <= threshold:
            return j
    return s + 1


def cell_call_budget(params: FptasParams, threshold: int) -> int:
    return (params.s + 2) * math.ceil(math.log2(params.n * (threshold + 1) + 1))


@dataclass
class EstimateReport:
    estimate: Union[Fraction, float]
    j_star: Optional[int]
    certified_interval: Optional[tuple]
    oracle_calls: int
    mode: Mode
    epsilon: Fraction
    n: int
    threshold: int
    Q: Optional[Union[Fraction, float]] = None
    s: Optional[int] = None
    wall_time: float = 0.0
    trivial: Optional[str] = None
    shift: int = 0
    bit_params: Optional[BitModeParams] = None
    table: Optional[DpTable] = None


def _fill_table(oracles, params: FptasParams, threshold: int, parallelism: int) -> DpTable:
    n, s = params.n, params.s
    table = DpTable(n, s)
    pool = ThreadPoolExecutor(max_workers=parallelism) if parallelism > 1 else None
    try:
        first = oracles[0]
        cells = _map(pool, lambda j: _base_case(first, j, params, threshold), range(s + 1))
        _store(table, cells)
        for i in range(2, n + 1):
            row = Row(table.rows[-1])
            oracle = oracles[i - 1]
            cells = _map(pool, lambda j: _solve_cell(i, j, row, oracle, params, threshold), range(s + 1))
            _store(table, cells)
    finally:
        if pool is not None:
            pool.shutdown()
    return table


def _map(pool, fn, items):
    if pool is None:
        return [fn(x) for x in items]
    return list(pool.map(fn, items))


def _store(table: DpTable, cells) -> None:
    table.rows.append([v for v, _ in cells])
    table.cell_calls.append([c for _, c in cells])


def _require_nontrivial(instance: NormalizedInstance) -> None:
    if instance.trivial_answer is not None:
        raise ParameterError(f"instance has trivial answer {instance.trivial_answer.value}; nothing to approximate")


def run_fptas(
    instance: NormalizedInstance,
    epsilon,
    *,
    parallelism: int = 1,
    trace: bool = False,
    arithmetic: str = "rational",
    fast_filter: bool = True,
) -> EstimateReport:
    """Approximate ``Pr[sum X_i <= threshold]`` within a factor ``1 +- epsilon``.

    ``arithmetic="float"`` runs the same program in floating point; that
    result carries no certificate.
    """
    _require_nontrivial(instance)
    started = time.perf_counter()
    n, C = instance.n, instance.threshold
    if arithmetic == "rational":
        params = FptasParams.exact_mode(n, epsilon, instance.delta, fast_filter=fast_filter)
        oracles = instance.oracles
        mode = Mode.EXACT_RATIONAL
    elif arithmetic == "float":
        params = FptasParams.float_mode(n, epsilon, instance.delta)
        oracles = [explicit_oracle(d, float) for d in instance.distributions]
        mode = Mode.FLOAT
    else:
        raise ParameterError(f"unknown arithmetic {arithmetic!r}")

    table = _fill_table(oracles, params, C, parallelism)
    j_star = choose_jstar(table.rows[-1], C, params.s)
    if params.exact:
        estimate = min(params.power(1 - j_star), Fraction(1))
        upper = min(params.power(n + 1 - j_star), Fraction(1))
        interval = (params.power(-j_star), upper)
    else:
        estimate = min(params.Q ** (1 - j_star), 1.0)
        interval = None
    return EstimateReport(
        estimate=estimate,
        j_star=j_star,
        certified_interval=interval,
        oracle_calls=sum(map(sum, table.cell_calls)),
        mode=mode,
        epsilon=params.epsilon,
        n=n,
        threshold=C,
        Q=params.Q,
        s=params.s,
        wall_time=time.perf_counter() - started,
        shift=instance.shift_total,
        table=table if trace else None,
    )


def bit_mode_params(instance: NormalizedInstance, epsilon, overrides: Optional[BitModeParams] = None):
    """Resolve ``(BitModeParams, Q, s)`` for an instance, honouring overrides."""
    n = instance.n
    log_delta = estimate_log_delta(instance.oracles)
    floor, q, s = BitModeParams.admissible_floor(n, epsilon, log_delta)
    if overrides is None:
        return floor, q, s
    if overrides.ell_q != floor.ell_q:
        raise ParameterError("ell_q is fixed by n and epsilon and cannot be overridden")
    if overrides.L < floor.L:
        raise ParameterError(f"oracle precision L={overrides.L} is below the admissible floor {floor.L}")
    if overrides.ell_ans < floor.ell_ans:
        raise ParameterError(f"output precision {overrides.ell_ans} is below the admissible floor {floor.ell_ans}")
    params = BitModeParams(floor.ell_q, overrides.L, overrides.ell_ans, bit_eta(q, s, overrides.L), log_delta)
    return params, q, s


def run_fptas_bit_mode(
    instance: NormalizedInstance,
    epsilon,
    overrides: Optional[BitModeParams] = None,
    *,
    parallelism: int = 1,
    trace: bool = False,
    fast_filter: bool = True,
) -> EstimateReport:
    """Finite-precision variant: every oracle answer is truncated to ``L`` bits."""
    _require_nontrivial(instance)
    started = time.perf_counter()
    n, C = instance.n, instance.threshold
    eps = _validate_epsilon(epsilon)
    bits, q, s = bit_mode_params(instance, eps, overrides)
    slack = (1 + bits.eta) ** n
    if slack * q ** (n + 1) > 1 + eps:
        raise ParameterError("bit-mode parameters do not certify a 1 +- epsilon ratio")
    params = FptasParams(eps, n, q, s, fast_filter=fast_filter)
    oracles = [truncated_oracle(o, bits.L) for o in instance.oracles]
    # the delta probes above are part of the run's oracle traffic
    probe_calls = bits.log_delta_bound

    table = _fill_table(oracles, params, C, parallelism)
    j_star = choose_jstar(table.rows[-1], C, s)
    estimate = min(truncate_dyadic(params.power(1 - j_star), bits.ell_ans), Fraction(1))
    upper = min(params.power(n + 1 - j_star) * slack, Fraction(1))
    return EstimateReport(
        estimate=estimate,
        j_star=j_star,
        certified_interval=(params.power(-j_star), upper),
        oracle_calls=sum(map(sum, table.cell_calls)) + probe_calls,
        mode=Mode.BIT,
        epsilon=eps,
        n=n,
        threshold=C,
        Q=q,
        s=s,
        wall_time=time.perf_counter() - started,
        shift=instance.shift_total,
        bit_params=bits,
        table=table if trace else None,
    )


def trivial_report(instance: NormalizedInstance, epsilon, mode: Mode = Mode.EXACT_RATIONAL) -> EstimateReport:
    value = Fraction(0) if instance.trivial_answer.value == "ZERO" else Fraction(1)
    return EstimateReport(
        estimate=value,
        j_star=None,
        certified_interval=(value, value),
        oracle_calls=0,
        mode=mode,
        epsilon=Fraction(epsilon),
        n=instance.n,
        threshold=instance.threshold,
        trivial=instance.trivial_answer.value,
        shift=instance.shift_total,
    )
