"""Data-driven threshold tuning for jump-robust integrated variance estimation."""

from .errors import DataError, InternalError, InvalidArgument
from .estimators import (
    InitializerSpec,
    SpotConfig,
    ThresholdSpec,
    bv,
    feasible_ci,
    multipower,
    rv,
    spot_bv,
    spot_kernel,
    truncated_quarticity,
    trv,
)
from .fixedpoint import (
    FixedPointTrace,
    LocalTrace,
    RateRule,
    iterate_local,
    iterate_uniform,
    kn_default,
    rate,
)
from .grid import IncrementSeries, JumpComponent, JumpRecord, PathBundle, SamplingGrid, build_grid

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "FixedPointTrace",
    "IncrementSeries",
    "InitializerSpec",
    "InternalError",
    "InvalidArgument",
    "JumpComponent",
    "JumpRecord",
    "LocalTrace",
    "PathBundle",
    "RateRule",
    "SamplingGrid",
    "SpotConfig",
    "ThresholdSpec",
    "build_grid",
    "bv",
    "feasible_ci",
    "iterate_local",
    "iterate_uniform",
    "kn_default",
    "multipower",
    "rate",
    "rv",
    "spot_bv",
    "spot_kernel",
    "truncated_quarticity",
    "trv",
]
