"""Non-iterative volatility estimators.

Realized variance, bipower and multipower variation, truncated realized
variation (uniform or per-increment thresholds), the uniform-kernel spot
variance estimators, truncated quarticity and feasible confidence intervals.

Truncation indicators are inclusive everywhere: an increment ``x`` survives a
threshold ``B`` iff ``|x| <= B``. Increments outside ``1..n`` are taken as
zero. Spot windows near the sample edges hold fewer than ``k`` in-range
terms; ``SpotConfig.boundary`` chooses between dividing by ``k`` regardless
(``zero_pad``) and dividing by the number of in-range terms (``renormalize``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgument
from .grid import IncrementSeries

POWER_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ThresholdSpec:
    """Either one threshold for every increment or one per increment."""

    eps: float | np.ndarray

    def __post_init__(self):
        eps = self.eps
        if np.ndim(eps) == 0:
            eps = float(eps)
            if math.isnan(eps) or eps < 0:
                raise InvalidArgument(f"threshold must be >= 0, got {eps}")
        else:
            eps = np.array(eps, dtype=float)
            if eps.ndim != 1 or np.any(np.isnan(eps)) or np.any(eps < 0):
                raise InvalidArgument("local thresholds must be a vector of values >= 0")
            eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def uniform(cls, eps: float) -> "ThresholdSpec":
        return cls(float(eps))

    @classmethod
    def local(cls, eps_i) -> "ThresholdSpec":
        return cls(np.asarray(eps_i, dtype=float))

    @property
    def is_local(self) -> bool:
        return isinstance(self.eps, np.ndarray)

    def mask(self, incs: IncrementSeries) -> np.ndarray:
        """Boolean vector of increments kept by this threshold."""
        if self.is_local and self.eps.size != incs.n:
            raise InvalidArgument(
                f"local threshold has length {self.eps.size}, expected {incs.n}"
            )
        return np.abs(incs.values) <= self.eps


BOUNDARY_RULES = ("zero_pad", "renormalize")


@dataclass(frozen=True)
class SpotConfig:
    """Window of ``k`` increments centred on i: ``l = i-k/2+1, ..., i+k/2``."""

    k: int
    boundary: str = "zero_pad"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2 or self.k % 2:
            raise InvalidArgument(f"window k must be an even integer >= 2, got {self.k}")
        if self.boundary not in BOUNDARY_RULES:
            raise InvalidArgument(f"unknown boundary rule {self.boundary!r}")
        object.__setattr__(self, "k", int(self.k))

    def check(self, n: int) -> None:
        if self.k > n:
            raise InvalidArgument(f"window k={self.k} exceeds n={n}")

    def term_counts(self, n: int, first: int = 1) -> np.ndarray:
        """Number of window positions l with ``first <= l <= n``, for every i."""
        i = np.arange(1, n + 1)
        half = self.k // 2
        lo = np.maximum(i - half + 1, first)
        hi = np.minimum(i + half, n)
        return np.maximum(hi - lo + 1, 0).astype(float)

    def denominators(self, n: int, h: float, first: int = 1) -> np.ndarray:
        """Per-i normalization ``h * (terms)`` of the window sums."""
        if self.boundary == "zero_pad":
            return np.full(n, h * self.k)
        # every window holds at least one in-range term once k >= 2, n >= 2
        return h * self.term_counts(n, first)


INIT_KINDS = ("rv", "bv", "multipower", "spot_rv", "spot_bv")


@dataclass(frozen=True)
class InitializerSpec:
    kind: str
    powers: tuple = ()

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise InvalidArgument(f"unknown initializer {self.kind!r}")
        if self.kind == "multipower":
            _check_powers(self.powers)
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))

    @property
    def is_spot(self) -> bool:
        return self.kind.startswith("spot_")


def _check_powers(powers) -> None:
    powers = list(powers)
    if not powers or any(p < 0 for p in powers):
        raise InvalidArgument("multipower powers must be a nonempty list of values >= 0")
    if abs(sum(powers) - 2.0) > POWER_SUM_TOL:
        raise InvalidArgument(f"multipower powers must sum to 2, got {sum(powers)}")


# ---------------------------------------------------------------------------
# integrated variance estimators


def rv(incs: IncrementSeries) -> float:
    return float(np.sum(incs.values**2))


def bv(incs: IncrementSeries) -> float:
    a = np.abs(incs.values)
    if a.size < 2:
        raise InvalidArgument("bipower variation needs n >= 2")
    return float(0.5 * np.pi * np.sum(a[:-1] * a[1:]))


def abs_normal_moment(r: float) -> float:
    """E|Z|^r for standard normal Z."""
    return math.exp(0.5 * r * math.log(2.0) + math.lgamma(0.5 * (r + 1)) - 0.5 * math.log(math.pi))


def multipower(incs: IncrementSeries, powers) -> float:
    _check_powers(powers)
    d = len(powers)
    a = np.abs(incs.values)
    if d > a.size:
        raise InvalidArgument(f"{d} powers need at least {d} increments")
    m = a.size - d + 1
    prod = np.ones(m)
    norm = 1.0
    for j, r in enumerate(powers):
        prod *= a[j : j + m] ** r
        norm /= abs_normal_moment(r)
    return float(norm * np.sum(prod))


def trv(incs: IncrementSeries, thr: ThresholdSpec) -> float:
    sq = incs.values**2
    return float(np.sum(np.where(thr.mask(incs), sq, 0.0)))


def truncated_quarticity(incs: IncrementSeries, thr: ThresholdSpec) -> float:
    q = incs.values**4
    return float(np.sum(np.where(thr.mask(incs), q, 0.0)))


def initial_value(incs: IncrementSeries, init: InitializerSpec) -> float:
    """Scalar starting value for the uniform fixed-point scheme."""
    if init.kind == "rv":
        return rv(incs)
    if init.kind == "bv":
        return bv(incs)
    if init.kind == "multipower":
        return multipower(incs, init.powers)
    raise InvalidArgument(f"{init.kind} is a spot initializer")


# ---------------------------------------------------------------------------
# spot variance


def window_matrix(values: np.ndarray, k: int) -> np.ndarray:
    """Row i-1 holds values[l-1] for l = i-k/2+1 .. i+k/2, zero-padded."""
    half = k // 2
    padded = np.concatenate([np.zeros(half - 1), values, np.zeros(half)])
    return sliding_window_view(padded, k)


def _check_index(incs: IncrementSeries, i: int) -> None:
    if not 1 <= i <= incs.n:
        raise InvalidArgument(f"index {i} outside 1..{incs.n}")


def spot_kernel_all(incs: IncrementSeries, cfg: SpotConfig, B=np.inf) -> np.ndarray:
    """Truncated spot variance at every i; ``B`` is a scalar or a length-n vector."""
    cfg.check(incs.n)
    x = incs.values
    W = window_matrix(x**2, cfg.k)
    A = window_matrix(np.abs(x), cfg.k)
    B = np.broadcast_to(np.asarray(B, dtype=float), (incs.n,))
    sums = np.where(A <= B[:, None], W, 0.0).sum(axis=1)
    return sums / cfg.denominators(incs.n, incs.h)


def spot_kernel(incs: IncrementSeries, i: int, cfg: SpotConfig, B: float = np.inf) -> float:
    _check_index(incs, i)
    cfg.check(incs.n)
    half = cfg.k // 2
    total = 0.0
    for l in range(i - half + 1, i + half + 1):
        x = incs.at(l)
        if abs(x) <= B:
            total += x * x
    return total / cfg.denominators(incs.n, incs.h)[i - 1]


def spot_rv_all(incs: IncrementSeries, cfg: SpotConfig) -> np.ndarray:
    return spot_kernel_all(incs, cfg, np.inf)


def spot_bv_all(incs: IncrementSeries, cfg: SpotConfig) -> np.ndarray:
    """Local bipower variation; the product at m pairs increments m-1 and m."""
    cfg.check(incs.n)
    a = np.abs(incs.values)
    prods = a * np.concatenate([[0.0], a[:-1]])
    sums = window_matrix(prods, cfg.k).sum(axis=1)
    return 0.5 * np.pi * sums / cfg.denominators(incs.n, incs.h, first=2)


def spot_bv(incs: IncrementSeries, i: int, cfg: SpotConfig) -> float:
    _check_index(incs, i)
    cfg.check(incs.n)
    half = cfg.k // 2
    total = sum(
        abs(incs.at(m - 1)) * abs(incs.at(m)) for m in range(i - half + 1, i + half + 1)
    )
    return 0.5 * math.pi * total / cfg.denominators(incs.n, incs.h, first=2)[i - 1]


def spot_initial(incs: IncrementSeries, init: InitializerSpec, cfg: SpotConfig) -> np.ndarray:
    if init.kind == "spot_rv":
        return spot_rv_all(incs, cfg)
    if init.kind == "spot_bv":
        return spot_bv_all(incs, cfg)
    raise InvalidArgument(f"{init.kind} is not a spot initializer")


# ---------------------------------------------------------------------------
# inference


def normal_quantile(p: float) -> float:
    return NormalDist().inv_cdf(p)


def feasible_ci(estimate: float, quarticity: float, level: float = 0.95) -> tuple[float, float]:
    """Studentized CI for integrated variance from truncated quarticity.

    The sum of fourth powers estimates ``3 h * int sigma^4``, so the
    estimation error has variance ``(2/3) * quarticity``.
    """
    if not 0.0 < level < 1.0:
        raise InvalidArgument(f"level must lie in (0, 1), got {level}")
    if quarticity < 0:
        raise InvalidArgument("quarticity must be >= 0")
    z = normal_quantile(0.5 * (1.0 + level))
    half = z * math.sqrt(2.0 * quarticity / 3.0)
    return estimate - half, estimate + half
