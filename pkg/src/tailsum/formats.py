"""Instance files and report documents (JSON text)."""

from __future__ import annotations

import contextlib
import json
import sys
from decimal import Decimal, InvalidOperation, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Union

from .baselines import MonteCarloResult
from .distributions import DiscreteDistribution, InvalidDistribution
from .engine import DpTable, EstimateReport

INSTANCE_SCHEMA = "tailsum-instance/1"
REPORT_SCHEMA = "tailsum-report/1"
TRACE_SCHEMA = "tailsum-trace/1"


class InstanceFormatError(ValueError):
    pass


@contextlib.contextmanager
def _unbounded_int_str():
    getter = getattr(sys, "get_int_max_str_digits", None)
    if getter is None:
        yield
        return
    old = getter()
    sys.set_int_max_str_digits(0)
    try:
        yield
    finally:
        sys.set_int_max_str_digits(old)


def fraction_str(x) -> str:
    x = Fraction(x)
    with _unbounded_int_str():
        if x.denominator == 1:
            return str(x.numerator)
        return f"{x.numerator}/{x.denominator}"


def decimal_str(x, digits: int = 17) -> str:
    """Correctly rounded scientific rendering of a rational or float."""
    if isinstance(x, float):
        return f"{x:.{digits - 1}e}"
    x = Fraction(x)
    if x == 0:
        return f"{0:.{digits - 1}e}"
    with localcontext() as ctx:
        ctx.prec = digits
        value = Decimal(x.numerator) / Decimal(x.denominator)
    mantissa, exponent = f"{value:.{digits - 1}e}".split("e")
    exp = int(exponent)
    return f"{mantissa}e{'-' if exp < 0 else '+'}{abs(exp):02d}"


def parse_probability(token: Any) -> Fraction:
    """Parse ``"num/den"``, a terminating decimal string, or a JSON number."""
    if isinstance(token, bool):
        raise InstanceFormatError(f"not a probability: {token!r}")
    if isinstance(token, (int, Decimal)):
        return Fraction(token)
    if isinstance(token, float):
        raise InstanceFormatError("binary floats are not accepted; quote the probability")
    if not isinstance(token, str):
        raise InstanceFormatError(f"not a probability: {token!r}")
    text = token.strip()
    try:
        if "/" in text:
            num, den = text.split("/")
            value = Fraction(int(num), int(den))
        else:
            dec = Decimal(text)
            if not dec.is_finite():
                raise InstanceFormatError(f"not a finite probability: {token!r}")
            value = Fraction(dec)
    except (ValueError, ZeroDivisionError, InvalidOperation) as exc:
        raise InstanceFormatError(f"cannot parse probability {token!r}") from exc
    return value


def _parse_value(token: Any) -> int:
    if isinstance(token, bool):
        raise InstanceFormatError(f"support value must be an integer, got {token!r}")
    if isinstance(token, int):
        return token
    if isinstance(token, str):
        try:
            return int(token.strip())
        except ValueError as exc:
            raise InstanceFormatError(f"support value must be an integer, got {token!r}") from exc
    if isinstance(token, Decimal) and token == token.to_integral_value():
        return int(token)
    raise InstanceFormatError(f"support value must be an integer, got {token!r}")


def instance_from_dict(doc: dict) -> tuple[list[DiscreteDistribution], Optional[int]]:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    schema = doc.get("schema")
    if schema != INSTANCE_SCHEMA:
        raise InstanceFormatError(f"unsupported schema {schema!r}; expected {INSTANCE_SCHEMA!r}")
    raw = doc.get("distributions")
    if not isinstance(raw, list) or not raw:
        raise InstanceFormatError("'distributions' must be a non-empty list")
    dists = []
    for idx, entry in enumerate(raw):
        if not isinstance(entry, list) or not entry:
            raise InstanceFormatError(f"distribution {idx} must be a non-empty list of [value, probability] pairs")
        pairs = []
        for pair in entry:
            if not isinstance(pair, list) or len(pair) != 2:
                raise InstanceFormatError(f"distribution {idx}: expected [value, probability], got {pair!r}")
            pairs.append((_parse_value(pair[0]), parse_probability(pair[1])))
        try:
            dists.append(DiscreteDistribution(pairs))
        except InvalidDistribution as exc:
            raise InstanceFormatError(f"distribution {idx}: {exc}") from exc
    threshold = doc.get("threshold")
    if threshold is not None:
        threshold = _parse_value(threshold)
    return dists, threshold


def loads_instance(text: str) -> tuple[list[DiscreteDistribution], Optional[int]]:
    try:
        doc = json.loads(text, parse_float=Decimal, parse_int=int)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON: {exc}") from exc
    return instance_from_dict(doc)


def load_instance(path: Union[str, Path]) -> tuple[list[DiscreteDistribution], Optional[int]]:
    return loads_instance(Path(path).read_text())


def instance_to_dict(dists, threshold: Optional[int]) -> dict:
    doc: dict = {"schema": INSTANCE_SCHEMA}
    if threshold is not None:
        doc["threshold"] = int(threshold)
    doc["distributions"] = [[[v, fraction_str(m)] for v, m in d.points] for d in dists]
    return doc


def dumps_instance(dists, threshold: Optional[int]) -> str:
    return json.dumps(instance_to_dict(dists, threshold), indent=2) + "\n"


def _num(x) -> dict:
    if isinstance(x, float):
        return {"decimal": decimal_str(x)}
    return {"fraction": fraction_str(x), "decimal": decimal_str(x)}


def report_to_dict(report: EstimateReport, method: str, input_threshold: Optional[int] = None,
                   include_wall_time: bool = False) -> dict:
    doc: dict = {
        "schema": REPORT_SCHEMA,
        "method": method,
        "mode": report.mode.value,
        "estimate": _num(report.estimate),
        "trivial": report.trivial,
        "epsilon": fraction_str(report.epsilon),
        "n": report.n,
        "threshold": input_threshold if input_threshold is not None else report.threshold + report.shift,
        "normalized_threshold": report.threshold,
        "shift": report.shift,
        "j_star": report.j_star,
        "Q": None if report.Q is None else _num(report.Q),
        "s": report.s,
        "oracle_calls": report.oracle_calls,
        "certified_interval": None,
    }
    if report.certified_interval is not None:
        lo, hi = report.certified_interval
        doc["certified_interval"] = {"lower": _num(lo), "upper": _num(hi)}
    if report.bit_params is not None:
        b = report.bit_params
        doc["bit"] = {
            "ell_q": b.ell_q,
            "L": b.L,
            "ell_ans": b.ell_ans,
            "log_delta_bound": b.log_delta_bound,
            "eta": decimal_str(b.eta),
        }
    if include_wall_time:
        doc["wall_time"] = round(report.wall_time, 6)
    return doc


def exact_report_to_dict(value: Fraction, n: int, threshold: int, shift: int, trivial: Optional[str]) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "method": "exact",
        "mode": "EXACT_RATIONAL",
        "estimate": _num(value),
        "trivial": trivial,
        "n": n,
        "threshold": threshold,
        "normalized_threshold": threshold - shift,
        "shift": shift,
    }


def mc_report_to_dict(result: MonteCarloResult, n: int, threshold: int, shift: int, trivial: Optional[str]) -> dict:
    lo, hi = result.interval
    return {
        "schema": REPORT_SCHEMA,
        "method": "mc",
        "mode": "FLOAT",
        "estimate": {"decimal": decimal_str(result.estimate)},
        "trivial": trivial,
        "n": n,
        "threshold": threshold,
        "normalized_threshold": threshold - shift,
        "shift": shift,
        "samples": result.samples,
        "hits": result.hits,
        "seed": result.seed,
        "delta": result.delta,
        "radius": decimal_str(result.radius),
        "interval": {"lower": decimal_str(lo), "upper": decimal_str(hi)},
    }


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def trace_to_dict(table: DpTable) -> dict:
    return {"schema": TRACE_SCHEMA, "n": table.n, "s": table.s, "rows": table.rows, "cell_calls": table.cell_calls}
