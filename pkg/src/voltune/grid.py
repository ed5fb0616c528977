"""Sampling grids, increment series and simulation ground truth.

Increments are the canonical representation of an observed path; levels are
only ever derived from them. Everything here is immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidArgument

# 6.5 trading hours, 5-minute bars
OBS_PER_DAY = 78
DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class SamplingGrid:
    """Regular grid of ``n`` increments over ``[0, T]``."""

    n: int
    T: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise InvalidArgument(f"n must be an integer >= 2, got {self.n!r}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidArgument(f"T must be positive and finite, got {self.T!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h(self) -> float:
        return self.T / self.n

    def times(self) -> np.ndarray:
        """Observation times t_0, ..., t_n."""
        return np.arange(self.n + 1) * self.h


def build_grid(n: int, T: float) -> SamplingGrid:
    return SamplingGrid(n, T)


def grid_for_days(days: int) -> SamplingGrid:
    """5-minute grid covering ``days`` trading days."""
    return SamplingGrid(OBS_PER_DAY * days, days / DAYS_PER_YEAR)


@dataclass(frozen=True, eq=False)
class IncrementSeries:
    grid: SamplingGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size != self.grid.n:
            raise InvalidArgument(
                f"expected {self.grid.n} increments, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("increments must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def T(self) -> float:
        return self.grid.T

    def __len__(self):
        return self.grid.n

    def at(self, i: int) -> float:
        """The i-th increment (1-based), zero outside ``1..n``."""
        if 1 <= i <= self.grid.n:
            return float(self.values[i - 1])
        return 0.0

    def padded(self, left: int, right: int) -> np.ndarray:
        """Values with ``left``/``right`` zeros appended on each side."""
        return np.concatenate([np.zeros(left), self.values, np.zeros(right)])

    def levels(self, x0: float = 0.0) -> np.ndarray:
        return x0 + np.concatenate([[0.0], np.cumsum(self.values)])


def increments_from_levels(levels, grid: SamplingGrid) -> IncrementSeries:
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size != grid.n + 1:
        raise InvalidArgument(
            f"expected {grid.n + 1} levels for n={grid.n}, got {levels.size}"
        )
    if not np.all(np.isfinite(levels)):
        raise InvalidArgument("levels must be finite")
    return IncrementSeries(grid, np.diff(levels))


class JumpComponent(str, Enum):
    INFINITE_ACTIVITY = "infinite_activity"
    FINITE_ACTIVITY = "finite_activity"


@dataclass(frozen=True, eq=False)
class JumpRecord:
    """Jump times in ``(0, T]`` and the matching jump sizes."""

    component: JumpComponent
    times: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        sizes = np.array(self.sizes, dtype=float).reshape(-1)
        if times.size != sizes.size:
            raise InvalidArgument("jump times and sizes differ in length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InvalidArgument("jump times must be strictly increasing")
        if np.any(sizes == 0):
            raise InvalidArgument("jump sizes must be nonzero")
        times.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "component", JumpComponent(self.component))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sizes", sizes)

    def __len__(self):
        return self.times.size

    def interval_index(self, grid: SamplingGrid) -> np.ndarray:
        """1-based index i of the interval ((i-1)h, ih] holding each jump."""
        idx = np.ceil(self.times / grid.h - 1e-12).astype(int)
        return np.clip(idx, 1, grid.n)

    def binned(self, grid: SamplingGrid) -> np.ndarray:
        """Sum of jump sizes per observation interval."""
        out = np.zeros(grid.n)
        if len(self):
            np.add.at(out, self.interval_index(grid) - 1, self.sizes)
        return out

    @classmethod
    def empty(cls, component) -> "JumpRecord":
        return cls(component, np.empty(0), np.empty(0))


def trapezoid_integral(values: np.ndarray, dt: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(dt * (values.sum() - 0.5 * (values[0] + values[-1])))


@dataclass(frozen=True, eq=False)
class PathBundle:
    """An observed (or simulated) path plus whatever ground truth is known.

    ``components`` holds the per-interval pieces the simulator added together
    (``diffusion``, ``levy_small`` ...); ingested data leaves it empty.
    """

    increments: IncrementSeries
    x0: float = 0.0
    sigma2_fine: np.ndarray | None = None
    c_true: float | None = None
    jumps: tuple = ()
    seed: int = 0
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma2_fine is not None:
            s2 = np.array(self.sigma2_fine, dtype=float)
            if np.any(s2 < 0):
                raise InvalidArgument("sigma2_fine must be nonnegative")
            s2.setflags(write=False)
            object.__setattr__(self, "sigma2_fine", s2)
            if self.c_true is None:
                object.__setattr__(self, "c_true", self.integrated_variance())
        object.__setattr__(self, "jumps", tuple(self.jumps))

    @property
    def grid(self) -> SamplingGrid:
        return self.increments.grid

    @property
    def fine_dt(self) -> float:
        return self.grid.T / (self.sigma2_fine.size - 1)

    def integrated_variance(self) -> float:
        return trapezoid_integral(self.sigma2_fine, self.fine_dt)

    def levels(self) -> np.ndarray:
        return self.increments.levels(self.x0)

    def jump_record(self, component) -> JumpRecord | None:
        component = JumpComponent(component)
        for rec in self.jumps:
            if rec.component is component:
                return rec
        return None
