"""Fixed-point threshold tuning for truncated realized variation.

Uniform scheme: starting from an initial estimate C_0 (e.g. RV or BV),
repeat

    B_{j-1} = sqrt(r * C_{j-1} / T),   C_j = sum x_i^2 1{|x_i| <= B_{j-1}}

until the set of kept increments repeats. The iterates are monotone in j and
the kept set can take at most n+1 values, so this terminates after at most
n+1 map evaluations.

Local scheme: the same iteration run separately for every i on the spot
variance estimator, B_{j-1}(i) = sqrt(r* c_{j-1}(i)). There is no 1/T factor
here since spot variances are already per unit time.

Stopping is decided by comparing kept-increment masks, never floats. Two
masks that differ must differ on a nonzero increment (zero increments pass
every threshold), so equal masks are equivalent to equal iterates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InternalError, InvalidArgument
from .estimators import SpotConfig, window_matrix
from .grid import IncrementSeries

logger = logging.getLogger(__name__)

_LOG_DOMAIN = math.exp(-math.e)


@dataclass(frozen=True)
class RateRule:
    """Threshold rate r(h).

    kinds:
        ``power``          r = c^2 h^(2 beta), i.e. sqrt(r) = c h^beta
        ``log_optimal``    r = 2 (1 + eta) h log(1/h)
        ``log_corrected``  r = 2 h (log(1/h) - log log(1/h))
    """

    kind: str
    c: float = 4.0
    beta: float = 0.49
    eta: float = 0.0

    def __post_init__(self):
        if self.kind == "power":
            if not self.c > 0 or not 0 < self.beta < 1:
                raise InvalidArgument("power rate needs c > 0 and beta in (0, 1)")
        elif self.kind == "log_optimal":
            if self.eta < 0:
                raise InvalidArgument("log_optimal rate needs eta >= 0")
        elif self.kind != "log_corrected":
            raise InvalidArgument(f"unknown rate kind {self.kind!r}")

    @classmethod
    def power(cls, c: float, beta: float) -> "RateRule":
        return cls("power", c=c, beta=beta)

    @classmethod
    def log_optimal(cls, eta: float = 0.0) -> "RateRule":
        return cls("log_optimal", eta=eta)

    @classmethod
    def log_corrected(cls) -> "RateRule":
        return cls("log_corrected")

    def params(self) -> dict:
        if self.kind == "power":
            return {"c": self.c, "beta": self.beta}
        if self.kind == "log_optimal":
            return {"eta": self.eta}
        return {}


def rate(rule: RateRule, h: float) -> float:
    if not h > 0:
        raise InvalidArgument(f"h must be positive, got {h}")
    if rule.kind == "power":
        return rule.c**2 * h ** (2 * rule.beta)
    if h >= _LOG_DOMAIN:
        raise InvalidArgument(f"log rates need h < exp(-e), got {h}")
    L = math.log(1.0 / h)
    if rule.kind == "log_optimal":
        return 2.0 * (1.0 + rule.eta) * h * L
    return 2.0 * h * (L - math.log(L))


def kn_default(h: float, exponent: float, n: int | None = None) -> int:
    """Spot window h^(-exponent) rounded to the nearest even integer, >= 2.

    When ``n`` is given the window is clamped to the largest even value <= n.
    """
    if not h > 0 or not 0 < exponent < 1:
        raise InvalidArgument("kn_default needs h > 0 and exponent in (0, 1)")
    k = max(2, 2 * int(round(h ** (-exponent) / 2.0)))
    if n is not None and k > n:
        clamped = n - n % 2
        if clamped < 2:
            raise InvalidArgument(f"no even window fits n={n}")
        logger.warning("spot window %d exceeds n=%d; clamped to %d", k, n, clamped)
        k = clamped
    return k


@dataclass(frozen=True, eq=False)
class FixedPointTrace:
    """Result of the uniform iteration.

    ``iterates`` runs C_0, C_1, ..., C_{j_n+1}; ``thresholds[j]`` is B_j.
    """

    iterates: list
    thresholds: list
    j_n: int
    active_set: np.ndarray
    value: float

    @property
    def threshold(self) -> float:
        """B_n, the threshold at stabilization."""
        return self.thresholds[self.j_n]

    @property
    def iterations(self) -> int:
        """Map evaluations needed to detect stabilization (j_n + 1)."""
        return self.j_n + 1


@dataclass(frozen=True, eq=False)
class LocalTrace:
    c_iterates: list
    thresholds_final: np.ndarray
    j_n_star: int
    value: float
    active_set: np.ndarray

    @property
    def iterations(self) -> int:
        return self.j_n_star + 1


def uniform_threshold(r: float, T: float, c: float) -> float:
    return math.sqrt(r * c / T)


def iterate_uniform(incs: IncrementSeries, r: float, init: float, *, subset=None) -> FixedPointTrace:
    """Run the uniform fixed-point scheme from ``init``.

    ``subset`` (boolean mask) restricts every sum to the flagged increments;
    the oracle iterates use it; estimators leave it ``None``.
    """
    if not r > 0:
        raise InvalidArgument(f"rate must be positive, got {r}")
    if not init >= 0:
        raise InvalidArgument(f"initial value must be >= 0, got {init}")
    x = incs.values
    absx = np.abs(x)
    sq = x**2
    eligible = np.ones(incs.n, dtype=bool) if subset is None else np.asarray(subset, bool)
    T = incs.T

    c = float(init)
    iterates = [c]
    thresholds = []
    prev_mask = None
    for j in range(1, incs.n + 3):
        B = uniform_threshold(r, T, c)
        thresholds.append(B)
        mask = eligible & (absx <= B)
        c_next = float(np.sum(np.where(mask, sq, 0.0)))
        iterates.append(c_next)
        if prev_mask is None:
            if c_next == c:
                return FixedPointTrace(iterates, thresholds, 0, mask, c)
        elif np.array_equal(mask, prev_mask):
            return FixedPointTrace(iterates, thresholds, j - 1, mask, c_next)
        prev_mask = mask
        c = c_next
    raise InternalError(f"uniform iteration did not stabilize within {incs.n + 1} steps")


def _local_step(sqW: np.ndarray, absW: np.ndarray, B: np.ndarray, denom: np.ndarray):
    mask = absW <= B[:, None]
    return np.where(mask, sqW, 0.0).sum(axis=1) / denom, mask


def iterate_local(incs: IncrementSeries, r_star: float, cfg: SpotConfig, init, *, subset=None) -> LocalTrace:
    """Run the local fixed-point scheme from spot estimates ``init`` (length n)."""
    if not r_star > 0:
        raise InvalidArgument(f"rate must be positive, got {r_star}")
    init = np.asarray(init, dtype=float)
    if init.shape != (incs.n,):
        raise InvalidArgument(f"init must have length {incs.n}, got shape {init.shape}")
    if np.any(init < 0) or np.any(np.isnan(init)):
        raise InvalidArgument("initial spot values must be >= 0")
    cfg.check(incs.n)

    x = incs.values
    absx = np.abs(x)
    if subset is not None:
        # excluded increments never pass any threshold
        absx = np.where(np.asarray(subset, bool), absx, np.inf)
    sqW = window_matrix(x**2, cfg.k)
    absW = window_matrix(absx, cfg.k)
    denom = cfg.denominators(incs.n, incs.h)

    c = init
    iterates = [c]
    prev_mask = None
    j_star = None
    for j in range(1, incs.n + 3):
        B = np.sqrt(r_star * c)
        c_next, mask = _local_step(sqW, absW, B, denom)
        iterates.append(c_next)
        if prev_mask is None:
            if np.array_equal(c_next, c):
                j_star = 0
        elif np.array_equal(mask, prev_mask):
            j_star = j - 1
        if j_star is not None:
            break
        prev_mask = mask
        c = c_next
    else:
        raise InternalError(f"local iteration did not stabilize within {incs.n + 1} steps")

    c_final = iterates[j_star]
    B_final = np.sqrt(r_star * c_final)
    active = absx <= B_final
    value = float(np.sum(np.where(active, x**2, 0.0)))
    return LocalTrace(iterates, B_final, j_star, value, active)
