"""Command-line front end.

Exit codes:
    0  success (including trivial answers)
    2  usage error (bad flags)
    3  input error (unreadable or malformed instance file)
    4  size guard exceeded by the exact method
    5  parameter error (epsilon, precision overrides, ...)
    6  oracle failure detected by the engine
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .baselines import DEFAULT_MAX_CELLS, SizeGuardError, exact_probability, monte_carlo
from .distributions import DiscreteDistribution, normalize
from .engine import (
    BitModeParams,
    OracleError,
    ParameterError,
    bit_mode_params,
    run_fptas,
    run_fptas_bit_mode,
    trivial_report,
)
from .formats import (
    InstanceFormatError,
    dumps_report,
    exact_report_to_dict,
    load_instance,
    mc_report_to_dict,
    parse_probability,
    report_to_dict,
    trace_to_dict,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_GUARD = 4
EXIT_PARAM = 5
EXIT_ORACLE = 6

METHODS = ("fptas", "fptas-bit", "exact", "mc")


@dataclass
class RunConfig:
    method: str = "fptas"
    epsilon: Fraction = Fraction(1, 10)
    threshold: Optional[int] = None
    arithmetic: str = "rational"
    mc_samples: int = 100_000
    seed: int = 0
    bit_L_override: Optional[int] = None
    trace: Optional[Path] = None
    parallelism: int = 1
    max_exact_cells: int = DEFAULT_MAX_CELLS
    mc_delta: float = 1e-3
    wall_time: bool = False

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if not 0 < self.epsilon <= 1:
            raise ParameterError("epsilon must lie in (0, 1]")
        if self.mc_samples < 1:
            raise ParameterError("--samples must be >= 1")
        if self.parallelism < 1:
            raise ParameterError("--parallelism must be >= 1")
        if self.arithmetic not in ("rational", "float"):
            raise ParameterError("--arithmetic must be 'rational' or 'float'")


def execute(config: RunConfig, dists: Sequence[DiscreteDistribution], threshold: int) -> dict:
    """Run one method on a raw instance and return the report document."""
    config.validate()
    inst = normalize(dists, threshold)
    trivial = inst.trivial_answer.value if inst.trivial_answer else None
    n = inst.n

    if config.method == "exact":
        if inst.trivial_answer is not None:
            value = Fraction(0) if trivial == "ZERO" else Fraction(1)
        else:
            value = exact_probability(inst, inst.threshold, config.max_exact_cells)
        return exact_report_to_dict(value, n, threshold, inst.shift_total, trivial)

    if config.method == "mc":
        result = monte_carlo(inst, inst.threshold, config.mc_samples, config.seed, config.mc_delta,
                             config.parallelism)
        return mc_report_to_dict(result, n, threshold, inst.shift_total, trivial)

    if inst.trivial_answer is not None:
        report = trivial_report(inst, config.epsilon)
    elif config.method == "fptas":
        report = run_fptas(inst, config.epsilon, parallelism=config.parallelism,
                           trace=config.trace is not None, arithmetic=config.arithmetic)
    else:
        overrides = None
        if config.bit_L_override is not None:
            floor, _, _ = bit_mode_params(inst, config.epsilon)
            overrides = BitModeParams(floor.ell_q, config.bit_L_override, floor.ell_ans)
        report = run_fptas_bit_mode(inst, config.epsilon, overrides, parallelism=config.parallelism,
                                    trace=config.trace is not None)
    if config.trace is not None and report.table is not None:
        config.trace.write_text(json.dumps(trace_to_dict(report.table)) + "\n")
    return report_to_dict(report, config.method, threshold, config.wall_time)


def _rational(text: str) -> Fraction:
    try:
        return parse_probability(text)
    except InstanceFormatError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailsum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="estimate Pr[sum X_i <= C] for one instance file")
    run.add_argument("instance", type=Path)
    run.add_argument("--method", choices=METHODS, default="fptas")
    run.add_argument("--epsilon", type=_rational, default=Fraction(1, 10))
    run.add_argument("--threshold", type=int, default=None, help="overrides the file's threshold")
    run.add_argument("--arithmetic", choices=("rational", "float"), default="rational")
    run.add_argument("--samples", type=int, default=100_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--mc-delta", type=float, default=1e-3)
    run.add_argument("--bit-L", type=int, default=None, dest="bit_L")
    run.add_argument("--trace", type=Path, default=None, help="write the DP table to this file")
    run.add_argument("--parallelism", type=int, default=1)
    run.add_argument("--max-exact-cells", type=int, default=DEFAULT_MAX_CELLS)
    run.add_argument("--wall-time", action="store_true", help="include wall time in the report")

    bench = sub.add_parser("bench", help="sweep generated instances and print a CSV table")
    bench.add_argument("--family", choices=("bernoulli", "uniform", "random-support"), default="bernoulli")
    bench.add_argument("--n", type=_positive_int, nargs="+", default=[4, 8, 16])
    bench.add_argument("--epsilon", type=_rational, nargs="+", default=[Fraction(1, 2)])
    bench.add_argument("--methods", choices=METHODS, nargs="+", default=["fptas"])
    bench.add_argument("--threshold", type=int, default=None, help="absolute threshold C")
    bench.add_argument("--threshold-per-var", type=_rational, default=Fraction(1, 2),
                       help="C = floor(n * value) when --threshold is absent")
    bench.add_argument("--support-size", type=_positive_int, default=4)
    bench.add_argument("--max-value", type=_positive_int, default=10)
    bench.add_argument("--samples", type=int, default=100_000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--parallelism", type=int, default=1)
    bench.add_argument("--wall-time", action="store_true", help="fill the wall_time column")
    return parser


def generate_instance(family: str, n: int, seed: int, support_size: int = 4,
                      max_value: int = 10) -> list[DiscreteDistribution]:
    if family == "bernoulli":
        return [DiscreteDistribution([(0, Fraction(1, 2)), (1, Fraction(1, 2))]) for _ in range(n)]
    if family == "uniform":
        k = support_size
        return [DiscreteDistribution([(v, Fraction(1, k)) for v in range(k)]) for _ in range(n)]
    if family == "random-support":
        rng = random.Random(f"{seed}:{family}:{n}")
        out = []
        for _ in range(n):
            k = rng.randint(1, min(support_size, max_value + 1))
            values = sorted(rng.sample(range(max_value + 1), k))
            weights = [rng.randint(1, 9) for _ in values]
            total = sum(weights)
            out.append(DiscreteDistribution([(v, Fraction(w, total)) for v, w in zip(values, weights)]))
        return out
    raise ValueError(f"unknown family {family!r}")


BENCH_COLUMNS = ("family", "n", "C", "epsilon", "method", "estimate", "calls", "wall_time")


def bench_rows(args) -> list[dict]:
    rows = []
    for n in args.n:
        dists = generate_instance(args.family, n, args.seed, args.support_size, args.max_value)
        C = args.threshold if args.threshold is not None else int(n * args.threshold_per_var)
        for eps in args.epsilon:
            for method in args.methods:
                config = RunConfig(method=method, epsilon=eps, mc_samples=args.samples, seed=args.seed,
                                   parallelism=args.parallelism)
                started = time.perf_counter()
                doc = execute(config, dists, C)
                elapsed = time.perf_counter() - started
                if method == "mc":
                    calls = doc["samples"] * n
                else:
                    calls = doc.get("oracle_calls", 0)
                rows.append({
                    "family": args.family,
                    "n": n,
                    "C": C,
                    "epsilon": str(eps),
                    "method": method,
                    "estimate": doc["estimate"]["decimal"],
                    "calls": calls,
                    "wall_time": f"{elapsed:.6f}" if args.wall_time else "",
                })
    return rows


def _run(args) -> int:
    config = RunConfig(
        method=args.method,
        epsilon=args.epsilon,
        threshold=args.threshold,
        arithmetic=args.arithmetic,
        mc_samples=args.samples,
        seed=args.seed,
        bit_L_override=args.bit_L,
        trace=args.trace,
        parallelism=args.parallelism,
        max_exact_cells=args.max_exact_cells,
        mc_delta=args.mc_delta,
        wall_time=args.wall_time,
    )
    try:
        dists, file_threshold = load_instance(args.instance)
    except OSError as exc:
        print(f"error: cannot read {args.instance}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InstanceFormatError as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    threshold = config.threshold if config.threshold is not None else file_threshold
    if threshold is None:
        print("error: no threshold in the instance file and no --threshold given", file=sys.stderr)
        return EXIT_INPUT
    doc = execute(config, dists, threshold)
    sys.stdout.write(dumps_report(doc))
    return EXIT_OK


def _bench(args) -> int:
    rows = bench_rows(args)
    writer = csv.DictWriter(sys.stdout, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _bench(args)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
