"""Deterministic (1 +- eps) approximation of Pr[X_1 + ... + X_n <= C]."""

from .baselines import ExactPmf, MonteCarloResult, SizeGuardError, exact_probability, exact_tau, monte_carlo
from .distributions import (
    DiscreteDistribution,
    DistributionOracle,
    InvalidDistribution,
    NormalizedInstance,
    TrivialAnswer,
    estimate_log_delta,
    explicit_oracle,
    normalize,
    sample,
    truncated_oracle,
)
from .engine import (
    BitModeParams,
    DpTable,
    EstimateReport,
    FptasParams,
    Mode,
    ParameterError,
    run_fptas,
    run_fptas_bit_mode,
)

__version__ = "0.1.0"
