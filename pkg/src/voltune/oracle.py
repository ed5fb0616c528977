"""Oracle quantities that need simulation ground truth.

They drop exactly the intervals holding a "large" jump (an infinite-activity
jump bigger than ``y`` in absolute value, or any finite-activity jump), and
are used to check the fixed-point estimators path by path through

    oracle_iterate <= estimate <= oracle_trv + remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .estimators import SpotConfig
from .fixedpoint import FixedPointTrace, iterate_local, iterate_uniform
from .grid import JumpComponent, PathBundle, SamplingGrid

REL_TOL = 1e-12


@dataclass(frozen=True)
class OracleConfig:
    y: float
    d: int = 1

    def __post_init__(self):
        if not self.y > 0:
            raise InvalidArgument(f"cutoff y must be > 0, got {self.y}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgument(f"block length d must be >= 1, got {self.d}")


def default_cutoff(h: float, const: float = 0.1) -> float:
    """y = const * sqrt(h log(1/h))."""
    return const * math.sqrt(h * math.log(1.0 / h))


@dataclass(frozen=True)
class SandwichReport:
    oracle_value: float
    iterate_value: float
    estimator_value: float
    remainder: float
    lower_ok: bool
    upper_ok: bool
    equality_ok: bool

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok


def _check_bundle(bundle: PathBundle, cfg: OracleConfig, sim_trunc: float | None) -> None:
    if not bundle.jumps:
        raise InvalidArgument("oracle quantities need jump records")
    if sim_trunc is not None and cfg.y <= sim_trunc:
        raise InvalidArgument(f"cutoff y={cfg.y} must exceed the simulation truncation {sim_trunc}")


def dirty_intervals(bundle: PathBundle, cfg: OracleConfig, sim_trunc: float | None = None) -> np.ndarray:
    """Boolean vector flagging intervals with a large jump."""
    _check_bundle(bundle, cfg, sim_trunc)
    grid = bundle.grid
    dirty = np.zeros(grid.n, dtype=bool)
    for rec in bundle.jumps:
        if not len(rec):
            continue
        idx = rec.interval_index(grid)
        if rec.component is JumpComponent.INFINITE_ACTIVITY:
            idx = idx[np.abs(rec.sizes) > cfg.y]
        dirty[idx - 1] = True
    return dirty


def clean_mask(bundle: PathBundle, cfg: OracleConfig, sim_trunc: float | None = None) -> np.ndarray:
    """Membership vector of I_n(y) for d = 1."""
    return ~dirty_intervals(bundle, cfg, sim_trunc)


def large_jump_index_set(bundle: PathBundle, cfg: OracleConfig, sim_trunc: float | None = None) -> set:
    """1-based indices i whose d intervals i, ..., i+d-1 are all jump-free."""
    clean = clean_mask(bundle, cfg, sim_trunc)
    n, d = clean.size, cfg.d
    if d == 1:
        return set((np.flatnonzero(clean) + 1).tolist())
    return {i + 1 for i in range(n - d + 1) if clean[i : i + d].all()}


def oracle_trv(bundle: PathBundle, cfg: OracleConfig, sim_trunc: float | None = None) -> float:
    x = bundle.increments.values
    return float(np.sum(np.where(clean_mask(bundle, cfg, sim_trunc), x**2, 0.0)))


def oracle_iterates_uniform(bundle: PathBundle, cfg: OracleConfig, r: float, init: float) -> FixedPointTrace:
    return iterate_uniform(bundle.increments, r, init, subset=clean_mask(bundle, cfg))


def oracle_local_value(bundle: PathBundle, cfg: OracleConfig, r_star: float, spot: SpotConfig, init) -> float:
    """Final value of the oracle version of the local scheme."""
    return iterate_local(bundle.increments, r_star, spot, init, subset=clean_mask(bundle, cfg)).value


def oracle_spot(bundle: PathBundle, i: int, cfg: OracleConfig, spot: SpotConfig, B: float = np.inf) -> float:
    """Spot kernel estimate over the jump-free intervals of the window around i."""
    incs = bundle.increments
    if not 1 <= i <= incs.n:
        raise InvalidArgument(f"index {i} outside 1..{incs.n}")
    spot.check(incs.n)
    clean = clean_mask(bundle, cfg)
    half = spot.k // 2
    total = 0.0
    for l in range(max(1, i - half + 1), min(incs.n, i + half) + 1):
        x = incs.values[l - 1]
        if clean[l - 1] and abs(x) <= B:
            total += x * x
    return total / spot.denominators(incs.n, incs.h)[i - 1]


def sandwich_check(
    bundle: PathBundle, cfg: OracleConfig, r: float, init: float, main_trace: FixedPointTrace
) -> SandwichReport:
    """Evaluate the path-wise bounds and the oracle equality event."""
    if main_trace.iterates[0] != init:
        raise InvalidArgument("main trace was started from a different initial value")
    if main_trace.active_set.size != bundle.grid.n:
        raise InvalidArgument("main trace does not match the bundle's increments")
    x = bundle.increments.values
    sq = x**2
    dirty = dirty_intervals(bundle, cfg)
    oracle_value = float(np.sum(np.where(~dirty, sq, 0.0)))
    iterate_value = iterate_uniform(bundle.increments, r, init, subset=~dirty).value
    B = main_trace.threshold
    remainder = float(np.sum(np.where(dirty & (np.abs(x) <= B), sq, 0.0)))
    est = main_trace.value
    tol = REL_TOL * max(float(np.sum(sq)), np.finfo(float).tiny)
    return SandwichReport(
        oracle_value=oracle_value,
        iterate_value=iterate_value,
        estimator_value=est,
        remainder=remainder,
        lower_ok=iterate_value <= est + tol,
        upper_ok=est <= oracle_value + remainder + tol,
        equality_ok=iterate_value == oracle_value,
    )


def spot_cutoff_grid(grid: SamplingGrid, const: float = 0.1) -> OracleConfig:
    return OracleConfig(default_cutoff(grid.h, const))
