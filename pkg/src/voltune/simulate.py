"""Ground-truth path simulation.

The log-price follows

    X_t = 1 + int sigma dW + L_t + J_t,
    sigma^2_t = theta + int kappa (theta - sigma^2) ds + xi int sigma dB,

with d<W, B> = rho dt, L a CGMY Levy process and J a (possibly
volatility-driven) compound Poisson process. Models 1-5 are presets of this.

Schemes:
  * variance: full-truncation Euler on ``substeps`` fine steps per observation;
  * CGMY: jumps above ``cgmy_trunc`` as compound Poisson with sizes drawn from
    a tabulated inverse tail, jumps below it replaced by a Brownian motion with
    the same variance, plus the drift that gives characteristic triplet
    (0, 0, nu) w.r.t. the truncation function 1{|x| <= 1};
  * compound Poisson: thinning of a rate-``lambda_max`` candidate stream.

Every random draw comes from a stream keyed on (seed, path index, component),
so a path is bit-identical no matter which worker simulates it.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import special

from .errors import InvalidArgument
from .grid import (
    IncrementSeries,
    JumpComponent,
    JumpRecord,
    PathBundle,
    SamplingGrid,
)

HESTON_STREAM, CGMY_STREAM, CPP_STREAM, TWO_REGIME_STREAM = range(4)

TABLE_POINTS = 4096


def stream(seed: int, path_index: int, component: int, *extra: int) -> np.random.Generator:
    """Counter-based generator for one (path, component) pair.

    ``extra`` keys separate experiments that reuse path indices (e.g. one
    per sample size).
    """
    key = (int(path_index), int(component)) + tuple(int(e) for e in extra)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class HestonParams:
    kappa: float = 5.0
    theta: float = 0.04
    xi: float = 0.3
    rho: float = -0.5
    v0: float | None = None

    def __post_init__(self):
        if self.kappa < 0 or self.theta <= 0 or self.xi < 0:
            raise InvalidArgument("Heston needs kappa >= 0, theta > 0, xi >= 0")
        if abs(self.rho) > 1:
            raise InvalidArgument(f"rho must lie in [-1, 1], got {self.rho}")
        if self.v0 is not None and self.v0 < 0:
            raise InvalidArgument("v0 must be >= 0")

    @property
    def initial_variance(self) -> float:
        return self.theta if self.v0 is None else self.v0


@dataclass(frozen=True)
class CgmyParams:
    """Levy density C- e^{-G|x|} |x|^{-1-Y} (x < 0) + C+ e^{-Mx} x^{-1-Y} (x > 0)."""

    c_minus: float = 0.148
    c_plus: float = 0.033
    g: float = 3.295
    m: float = 4.685
    y: float = 0.917

    def __post_init__(self):
        if not 0 < self.y < 2:
            raise InvalidArgument(f"CGMY index Y must lie in (0, 2), got {self.y}")
        if self.c_minus < 0 or self.c_plus < 0:
            raise InvalidArgument("CGMY amplitudes must be >= 0")
        if self.g <= 0 or self.m <= 0:
            raise InvalidArgument("CGMY tempering rates must be > 0")

    def sides(self):
        """(sign, amplitude, tempering rate) for each half-line."""
        return ((1.0, self.c_plus, self.m), (-1.0, self.c_minus, self.g))


@dataclass(frozen=True)
class CppParams:
    """Compound Poisson jumps with N(jump_mean, jump_sd^2) sizes.

    ``intensity`` is ``"constant"`` (rate ``lam`` per year) or
    ``"vol_switching"`` (rate ``lam`` while sigma^2 >= ``threshold``, else 0).
    """

    intensity: str = "constant"
    lam: float = 252.0
    threshold: float | None = None
    jump_mean: float = -0.005
    jump_sd: float = 0.01

    def __post_init__(self):
        if self.intensity not in ("constant", "vol_switching"):
            raise InvalidArgument(f"unknown intensity {self.intensity!r}")
        if self.lam < 0:
            raise InvalidArgument("jump rate must be >= 0")
        if self.jump_sd <= 0:
            raise InvalidArgument("jump_sd must be > 0")
        if self.intensity == "vol_switching" and self.threshold is None:
            raise InvalidArgument("vol_switching needs a variance threshold")


@dataclass(frozen=True)
class SimConfig:
    grid: SamplingGrid
    seed: int = 0
    substeps: int = 10
    cgmy_trunc: float = 1e-5
    gaussian_correction: bool = True

    def __post_init__(self):
        if self.substeps < 1:
            raise InvalidArgument("substeps must be >= 1")
        if not 0 < self.cgmy_trunc < 1:
            raise InvalidArgument("cgmy_trunc must lie in (0, 1)")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    heston: HestonParams = field(default_factory=HestonParams)
    cgmy: CgmyParams | None = None
    cpp: CppParams | None = None


@dataclass(frozen=True)
class TwoRegimeParams:
    """Volatility ``a`` before ``theta_break * T`` and ``b`` after."""

    a: float = 0.25
    b: float = 1.0
    theta_break: float = 0.8
    c0: float = 2.0

    def __post_init__(self):
        if not 0 < self.a <= self.b:
            raise InvalidArgument("need 0 < a <= b (a = b gives constant volatility)")
        if not 0 < self.theta_break < 1:
            raise InvalidArgument("theta_break must lie in (0, 1)")
        if self.c0 <= 0:
            raise InvalidArgument("c0 must be > 0")
        if not 0 < self.delta < 0.5:
            raise InvalidArgument(f"delta = {self.delta} must lie in (0, 1/2)")

    @property
    def delta(self) -> float:
        return 0.5 * self.c0 * (self.a**2 * self.theta_break / self.b**2 + 1 - self.theta_break)

    def integrated_variance(self, T: float = 1.0) -> float:
        return T * (self.a**2 * self.theta_break + self.b**2 * (1 - self.theta_break))


def model_preset(model_id: int) -> ModelSpec:
    base = HestonParams()
    cgmy = CgmyParams()
    if model_id == 1:
        return ModelSpec("homogeneous jumps", base, cgmy, CppParams(lam=252.0))
    if model_id == 2:
        cpp = CppParams("vol_switching", lam=2 * 252.0, threshold=base.theta)
        return ModelSpec("switching jump intensity", base, cgmy, cpp)
    if model_id == 3:
        return ModelSpec("higher jump intensity", base, cgmy, CppParams(lam=1.5 * 252.0))
    if model_id == 4:
        return ModelSpec("finite jump activity", base, None, CppParams(lam=1.15 * 252.0))
    if model_id == 5:
        return ModelSpec("no jumps", replace(base, theta=0.275**2))
    raise InvalidArgument(f"model id must be 1..5, got {model_id!r}")


def apply_overrides(spec: ModelSpec, overrides: dict) -> ModelSpec:
    """Override preset fields, e.g. ``{"heston": {"theta": 0.09}, "cgmy": null}``."""
    kinds = {"heston": HestonParams, "cgmy": CgmyParams, "cpp": CppParams}
    changes = {}
    for key, value in overrides.items():
        if key == "name":
            changes[key] = value
        elif key not in kinds:
            raise InvalidArgument(f"unknown model component {key!r}")
        elif value is None:
            if key == "heston":
                raise InvalidArgument("the volatility component cannot be removed")
            changes[key] = None
        else:
            current = getattr(spec, key)
            changes[key] = replace(current, **value) if current is not None else kinds[key](**value)
    return replace(spec, **changes)


# ---------------------------------------------------------------------------
# stochastic volatility


@njit(cache=True)
def _heston_euler(v0, kappa, theta, xi, rho, dt, zb, zp):
    N = zb.size
    v = np.empty(N + 1)
    dx = np.empty(N)
    v[0] = v0
    sdt = math.sqrt(dt)
    rc = math.sqrt(max(1.0 - rho * rho, 0.0))
    cur = v0
    for k in range(N):
        vp = cur if cur > 0.0 else 0.0
        sv = math.sqrt(vp) * sdt
        dx[k] = sv * (rho * zb[k] + rc * zp[k])
        cur = cur + kappa * (theta - vp) * dt + xi * sv * zb[k]
        v[k + 1] = cur
    return v, dx


def simulate_heston(params: HestonParams, grid: SamplingGrid, substeps: int, rng: np.random.Generator):
    """Return (sigma2_fine, diffusion increments on the observation grid)."""
    N = grid.n * substeps
    zb = rng.standard_normal(N)
    zp = rng.standard_normal(N)
    dt = grid.h / substeps
    v, dx = _heston_euler(
        params.initial_variance, params.kappa, params.theta, params.xi, params.rho, dt, zb, zp
    )
    sigma2 = np.maximum(v, 0.0)
    return sigma2, dx.reshape(grid.n, substeps).sum(axis=1)


# ---------------------------------------------------------------------------
# CGMY


def upper_gamma(s: float, z):
    """Upper incomplete gamma Gamma(s, z) for s > -2 (recurrence below 0)."""
    z = np.asarray(z, dtype=float)
    if s > 0:
        return special.gamma(s) * special.gammaincc(s, z)
    if s == 0:
        return special.exp1(z)
    return (upper_gamma(s + 1, z) - z**s * np.exp(-z)) / s


def cgmy_tail(amp: float, rate: float, y: float, x):
    """nu((x, inf)) on one side: amp * int_x^inf u^{-1-Y} e^{-rate u} du."""
    return amp * rate**y * upper_gamma(-y, rate * np.asarray(x, dtype=float))


def cgmy_small_variance(params: CgmyParams, eps: float) -> float:
    """int_{|x| <= eps} x^2 nu(dx)."""
    s = 2.0 - params.y
    return float(
        sum(amp * rate ** (-s) * special.gamma(s) * special.gammainc(s, rate * eps) for _, amp, rate in params.sides())
    )


def cgmy_compensator_drift(params: CgmyParams, eps: float) -> float:
    """-int_{eps < |x| <= 1} x nu(dx), the drift of the truncated process."""
    s = 1.0 - params.y
    total = 0.0
    for sign, amp, rate in params.sides():
        if amp == 0:
            continue
        first_moment = amp * rate ** (-s) * (upper_gamma(s, rate * eps) - upper_gamma(s, rate))
        total += sign * float(first_moment)
    return -total


@dataclass(frozen=True, eq=False)
class _SideTable:
    sign: float
    intensity: float
    log_tail: np.ndarray  # increasing
    log_x: np.ndarray

    def sample(self, u: np.ndarray) -> np.ndarray:
        target = np.log(u * self.intensity)
        return self.sign * np.exp(np.interp(target, self.log_tail, self.log_x))


@functools.lru_cache(maxsize=32)
def _jump_tables(params: CgmyParams, eps: float) -> tuple:
    tables = []
    for sign, amp, rate in params.sides():
        if amp == 0:
            continue
        x_max = max(1.0, 50.0 / rate)
        x = np.geomspace(eps, x_max, TABLE_POINTS)
        tail = cgmy_tail(amp, rate, params.y, x)
        tail[0] = float(cgmy_tail(amp, rate, params.y, eps))
        keep = tail > 0
        # decreasing in x; np.interp needs increasing abscissae
        tables.append(_SideTable(sign, float(tail[0]), np.log(tail[keep])[::-1], np.log(x[keep])[::-1]))
    return tuple(tables)


def cgmy_big_jump_intensity(params: CgmyParams, eps: float) -> float:
    """nu(|x| > eps) per unit time."""
    return float(sum(t.intensity for t in _jump_tables(params, eps)))


def _cgmy_parts(params: CgmyParams, grid: SamplingGrid, cfg: SimConfig, rng: np.random.Generator):
    eps = cfg.cgmy_trunc
    small = np.full(grid.n, cgmy_compensator_drift(params, eps) * grid.h)
    if cfg.gaussian_correction:
        small += math.sqrt(cgmy_small_variance(params, eps) * grid.h) * rng.standard_normal(grid.n)
    times, sizes = [], []
    for table in _jump_tables(params, eps):
        count = rng.poisson(table.intensity * grid.T)
        times.append(grid.T * (1.0 - rng.random(count)))  # in (0, T]
        sizes.append(table.sample(1.0 - rng.random(count)))
    times = np.concatenate(times) if times else np.empty(0)
    sizes = np.concatenate(sizes) if sizes else np.empty(0)
    order = np.argsort(times, kind="stable")
    record = JumpRecord(JumpComponent.INFINITE_ACTIVITY, times[order], sizes[order])
    return small, record


def simulate_cgmy(params: CgmyParams, grid: SamplingGrid, cfg: SimConfig, rng: np.random.Generator):
    """Return (CGMY increments, record of the jumps above ``cfg.cgmy_trunc``)."""
    small, record = _cgmy_parts(params, grid, cfg, rng)
    return small + record.binned(grid), record


# ---------------------------------------------------------------------------
# compound Poisson


def simulate_cpp(params: CppParams, sigma2_fine, grid: SamplingGrid, rng: np.random.Generator) -> JumpRecord:
    if params.intensity == "vol_switching" and sigma2_fine is None:
        raise InvalidArgument("vol_switching intensity needs the variance path")
    count = rng.poisson(params.lam * grid.T)
    times = np.sort(grid.T * (1.0 - rng.random(count)))
    sizes = rng.normal(params.jump_mean, params.jump_sd, count)
    if params.intensity == "vol_switching":
        sigma2_fine = np.asarray(sigma2_fine)
        dt = grid.T / (sigma2_fine.size - 1)
        idx = np.minimum((times / dt).astype(int), sigma2_fine.size - 1)
        accept = sigma2_fine[idx] >= params.threshold
        times, sizes = times[accept], sizes[accept]
    return JumpRecord(JumpComponent.FINITE_ACTIVITY, times, sizes)


# ---------------------------------------------------------------------------
# full models


def simulate_path(spec: ModelSpec, cfg: SimConfig, path_index: int = 0, x0: float = 1.0) -> PathBundle:
    grid = cfg.grid
    sigma2, diffusion = simulate_heston(
        spec.heston, grid, cfg.substeps, stream(cfg.seed, path_index, HESTON_STREAM)
    )
    components = {"diffusion": diffusion}
    total = diffusion.copy()
    jumps = []
    if spec.cgmy is not None:
        small, rec = _cgmy_parts(spec.cgmy, grid, cfg, stream(cfg.seed, path_index, CGMY_STREAM))
        components["levy_small"] = small
        total += small + rec.binned(grid)
        jumps.append(rec)
    else:
        jumps.append(JumpRecord.empty(JumpComponent.INFINITE_ACTIVITY))
    if spec.cpp is not None:
        rec = simulate_cpp(spec.cpp, sigma2, grid, stream(cfg.seed, path_index, CPP_STREAM))
        total += rec.binned(grid)
        jumps.append(rec)
    else:
        jumps.append(JumpRecord.empty(JumpComponent.FINITE_ACTIVITY))
    return PathBundle(
        IncrementSeries(grid, total),
        x0=x0,
        sigma2_fine=sigma2,
        jumps=jumps,
        seed=cfg.seed,
        components=components,
    )


def simulate_model(model_id: int, grid: SamplingGrid, cfg: SimConfig, path_index: int = 0) -> PathBundle:
    if cfg.grid != grid:
        cfg = replace(cfg, grid=grid)
    return simulate_path(model_preset(model_id), cfg, path_index)


def simulate_two_regime(params: TwoRegimeParams, grid: SamplingGrid, rng: np.random.Generator) -> PathBundle:
    """Exact Gaussian increments of int sigma dW with a single volatility break."""
    t = grid.times()
    brk = params.theta_break * grid.T
    before = np.clip(np.minimum(t[1:], brk) - t[:-1], 0.0, None)
    after = grid.h - before
    var = params.a**2 * before + params.b**2 * after
    incs = np.sqrt(var) * rng.standard_normal(grid.n)
    return PathBundle(
        IncrementSeries(grid, incs),
        c_true=params.integrated_variance(grid.T),
        jumps=(
            JumpRecord.empty(JumpComponent.INFINITE_ACTIVITY),
            JumpRecord.empty(JumpComponent.FINITE_ACTIVITY),
        ),
    )


def two_regime_threshold(params: TwoRegimeParams, grid: SamplingGrid) -> float:
    """sqrt(c0 C_T h log(1/h)) with the true integrated variance."""
    h = grid.h
    return math.sqrt(params.c0 * params.integrated_variance(grid.T) * h * math.log(1.0 / h))
