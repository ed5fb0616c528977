"""Monte Carlo benchmark: simulate paths, run an estimator menu, tabulate.

Every estimator sees the same increments on a given path, and every path is
simulated from its own keyed RNG streams, so results do not depend on how
paths are split across workers. Per-path records are sorted by path index
before anything is aggregated or written.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .estimators import (
    BOUNDARY_RULES,
    InitializerSpec,
    SpotConfig,
    ThresholdSpec,
    feasible_ci,
    initial_value,
    rv,
    spot_initial,
    trv,
)
from .fixedpoint import RateRule, iterate_local, iterate_uniform, kn_default, rate
from .grid import DAYS_PER_YEAR, OBS_PER_DAY, IncrementSeries, SamplingGrid
from .simulate import SimConfig, apply_overrides, model_preset, simulate_path

logger = logging.getLogger(__name__)

ESTIMATOR_KINDS = ("trv_deterministic", "trv_bv_tuned", "fp_uniform", "fp_local")
DEFAULT_HORIZONS = (1 / 252, 5 / 252, 1 / 12)
WORKERS_ENV = "VOLTUNE_WORKERS"
CI_LEVEL = 0.95


@dataclass(frozen=True)
class EstimatorSpec:
    """One row of the estimator menu.

    ``trv_deterministic`` truncates at ``sqrt(rate(h))``; ``trv_bv_tuned`` at
    ``sqrt(rate(h) * init / T)``; the ``fp_*`` kinds run the fixed-point
    schemes with ``rate`` and ``init``. ``fp_local`` windows hold
    ``h^(-spot_exponent)`` increments and use the ``spot_boundary`` rule.
    """

    id: str
    kind: str
    rate: RateRule
    init: InitializerSpec | None = None
    spot_exponent: float | None = None
    spot_boundary: str = "renormalize"

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise InvalidArgument(f"unknown estimator kind {self.kind!r}")
        if self.spot_boundary not in BOUNDARY_RULES:
            raise InvalidArgument(f"unknown boundary rule {self.spot_boundary!r}")
        if self.kind == "fp_local":
            if self.spot_exponent is None:
                raise InvalidArgument(f"estimator {self.id}: fp_local needs spot_exponent")
            if self.init is None or not self.init.is_spot:
                raise InvalidArgument(f"estimator {self.id}: fp_local needs a spot initializer")
        elif self.kind != "trv_deterministic":
            if self.init is None or self.init.is_spot:
                raise InvalidArgument(f"estimator {self.id}: {self.kind} needs a scalar initializer")

    @property
    def iterative(self) -> bool:
        return self.kind.startswith("fp_")

    def to_json(self) -> dict:
        out = {"id": self.id, "kind": self.kind, "rate": {"kind": self.rate.kind, "params": self.rate.params()}}
        if self.init is not None:
            out["init"] = self.init.kind if not self.init.powers else {"kind": self.init.kind, "powers": list(self.init.powers)}
        if self.spot_exponent is not None:
            out["spot_exponent"] = self.spot_exponent
            out["spot_boundary"] = self.spot_boundary
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "EstimatorSpec":
        try:
            rate_obj = obj["rate"]
            rule = RateRule(rate_obj["kind"], **rate_obj.get("params", {}))
            init = obj.get("init")
            if isinstance(init, str):
                init = InitializerSpec(init)
            elif isinstance(init, dict):
                init = InitializerSpec(init["kind"], tuple(init.get("powers", ())))
            return cls(
                str(obj["id"]),
                obj["kind"],
                rule,
                init,
                obj.get("spot_exponent"),
                obj.get("spot_boundary", "renormalize"),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed estimator entry {obj!r}: {exc}") from exc


def default_estimators() -> list:
    power = RateRule.power(4.0, 0.49)
    logc = RateRule.log_corrected()
    out = [
        EstimatorSpec("1", "trv_deterministic", RateRule.power(1.0, 0.49)),
        EstimatorSpec("2", "trv_bv_tuned", power, InitializerSpec("bv")),
        EstimatorSpec("3", "fp_uniform", power, InitializerSpec("rv")),
        EstimatorSpec("4", "fp_uniform", power, InitializerSpec("bv")),
    ]
    for num, init in (("5", "spot_rv"), ("6", "spot_bv")):
        for tag, expo in (("a", 0.5), ("b", 0.6)):
            out.append(EstimatorSpec(num + tag, "fp_local", logc, InitializerSpec(init), expo))
    return out


def estimator_by_id(ident: str) -> EstimatorSpec:
    for spec in default_estimators():
        if spec.id == str(ident):
            return spec
    raise InvalidArgument(f"unknown estimator id {ident!r}; choose from 1, 2, 3, 4, 5a, 5b, 6a, 6b")


@dataclass(frozen=True, eq=False)
class EstimateResult:
    value: float
    active: np.ndarray
    j_n: int | None = None
    threshold: float | np.ndarray | None = None

    @property
    def iterations(self) -> int | None:
        return None if self.j_n is None else self.j_n + 1

    def quarticity(self, incs: IncrementSeries) -> float:
        return float(np.sum(np.where(self.active, incs.values**4, 0.0)))

    def ci(self, incs: IncrementSeries, level: float = CI_LEVEL) -> tuple:
        return feasible_ci(self.value, self.quarticity(incs), level)


@functools.lru_cache(maxsize=64)
def _window(h: float, exponent: float, n: int) -> int:
    # cached so the clamping warning is logged once per grid, not per path
    return kn_default(h, exponent, n)


def run_estimator(spec: EstimatorSpec, incs: IncrementSeries) -> EstimateResult:
    h, T = incs.h, incs.T
    r = rate(spec.rate, h)
    if spec.kind == "trv_deterministic":
        eps = math.sqrt(r)
    elif spec.kind == "trv_bv_tuned":
        eps = math.sqrt(r * initial_value(incs, spec.init) / T)
    elif spec.kind == "fp_uniform":
        trace = iterate_uniform(incs, r, initial_value(incs, spec.init))
        return EstimateResult(trace.value, trace.active_set, trace.j_n, trace.threshold)
    else:
        cfg = SpotConfig(_window(h, spec.spot_exponent, incs.n), spec.spot_boundary)
        trace = iterate_local(incs, r, cfg, spot_initial(incs, spec.init, cfg))
        return EstimateResult(trace.value, trace.active_set, trace.j_n_star, trace.thresholds_final)
    thr = ThresholdSpec.uniform(eps)
    return EstimateResult(trv(incs, thr), thr.mask(incs), None, eps)


# ---------------------------------------------------------------------------
# configuration


def horizon_grid(T: float) -> SamplingGrid:
    """5-minute grid over horizon T (in years)."""
    n = int(round(T * DAYS_PER_YEAR * OBS_PER_DAY))
    return SamplingGrid(n, T)


def horizon_label(T: float) -> str:
    days = T * DAYS_PER_YEAR
    if abs(days - round(days)) < 1e-9:
        return f"{int(round(days))}d"
    return f"T{T:.6g}"


def resolve_workers(flag: int | None = None, default: int = 1) -> int:
    """CLI flag beats the environment variable, which beats ``default``."""
    if flag is not None:
        workers = flag
    elif os.environ.get(WORKERS_ENV):
        try:
            workers = int(os.environ[WORKERS_ENV])
        except ValueError as exc:
            raise InvalidArgument(f"{WORKERS_ENV} must be an integer") from exc
    else:
        workers = default
    if workers < 1:
        raise InvalidArgument(f"workers must be >= 1, got {workers}")
    return workers


@dataclass(frozen=True)
class BenchmarkConfig:
    models: tuple = (1, 2, 3, 4, 5)
    horizons: tuple = DEFAULT_HORIZONS
    estimators: tuple = field(default_factory=lambda: tuple(default_estimators()))
    paths: int = 1000
    master_seed: int = 0
    workers: int = 1
    output_dir: str | None = None
    ci_coverage: bool = False
    substeps: int = 10
    cgmy_trunc: float = 1e-5
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(int(m) for m in self.models))
        object.__setattr__(self, "horizons", tuple(float(t) for t in self.horizons))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.paths < 1:
            raise InvalidArgument(f"paths must be >= 1, got {self.paths}")
        if self.workers < 1:
            raise InvalidArgument(f"workers must be >= 1, got {self.workers}")
        if not self.horizons or any(not t > 0 for t in self.horizons):
            raise InvalidArgument("horizons must be positive")
        if not self.estimators:
            raise InvalidArgument("at least one estimator is required")
        ids = [e.id for e in self.estimators]
        if len(set(ids)) != len(ids):
            raise InvalidArgument(f"duplicate estimator ids in {ids}")
        for m in self.models:
            model_preset(m)

    @classmethod
    def from_json(cls, obj: dict) -> "BenchmarkConfig":
        known = {
            "models", "horizons", "estimators", "paths", "seed", "workers", "output_dir",
            "ci_coverage", "substeps", "cgmy_trunc", "model_overrides",
        }
        unknown = set(obj) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys {sorted(unknown)}")
        kwargs = {k: obj[k] for k in known - {"seed", "estimators"} if k in obj}
        if "seed" in obj:
            kwargs["master_seed"] = int(obj["seed"])
        if "estimators" in obj:
            kwargs["estimators"] = tuple(EstimatorSpec.from_json(e) for e in obj["estimators"])
        if "model_overrides" in kwargs:
            kwargs["model_overrides"] = {str(k): v for k, v in kwargs["model_overrides"].items()}
        return cls(**kwargs)


def load_config(path) -> BenchmarkConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"config {path} is not valid JSON: {exc}") from exc
    return BenchmarkConfig.from_json(obj)


# ---------------------------------------------------------------------------
# metrics


def metrics(estimates, truths) -> tuple:
    """(100 * mean rel. error, 100 * population sd of rel. error, root MSE)."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape or est.ndim != 1 or est.size == 0:
        raise InvalidArgument("estimates and truths must be equal-length nonempty sequences")
    if np.any(~(tru > 0)):
        raise InvalidArgument("truths must be positive")
    rel = (est - tru) / tru
    mean = rel.mean()
    sd = math.sqrt(float(np.mean((rel - mean) ** 2)))
    return 100.0 * float(mean), 100.0 * sd, math.sqrt(float(np.mean((est - tru) ** 2)))


@dataclass(frozen=True)
class McSummary:
    estimator_id: str
    model: int
    horizon: float
    paths: int
    mean_rel_err_pct: float
    sd_rel_err_pct: float
    sqrt_mse: float
    iter_histogram: dict = field(default_factory=dict)  # j_n -> fraction of paths
    ci_coverage: float | None = None
    sd_degenerate: bool = False

    def __post_init__(self):
        if self.sd_rel_err_pct < 0:
            raise InvalidArgument("sd must be >= 0")
        if self.iter_histogram and abs(sum(self.iter_histogram.values()) - 1.0) > 1e-9:
            raise InvalidArgument("histogram fractions must sum to 1")


@dataclass(frozen=True, eq=False)
class PathRecord:
    path_index: int
    c_true: float
    values: tuple
    j_n: tuple  # stabilization index per estimator (None for non-iterative ones)
    covered: tuple


def _simulate_and_estimate(cfg: BenchmarkConfig, model: int, grid: SamplingGrid, start: int, stop: int) -> list:
    spec = model_preset(model)
    if str(model) in cfg.model_overrides:
        spec = apply_overrides(spec, cfg.model_overrides[str(model)])
    sim = SimConfig(grid, seed=cfg.master_seed, substeps=cfg.substeps, cgmy_trunc=cfg.cgmy_trunc)
    out = []
    for p in range(start, stop):
        bundle = simulate_path(spec, sim, p)
        incs = bundle.increments
        vals, iters, cov = [], [], []
        for est in cfg.estimators:
            res = run_estimator(est, incs)
            vals.append(res.value)
            iters.append(res.j_n)
            if cfg.ci_coverage:
                lo, hi = res.ci(incs)
                cov.append(lo <= bundle.c_true <= hi)
        out.append(PathRecord(p, bundle.c_true, tuple(vals), tuple(iters), tuple(cov)))
    return out


def _chunks(m: int, workers: int) -> list:
    size = max(1, math.ceil(m / (4 * workers)))
    return [(s, min(m, s + size)) for s in range(0, m, size)]


def simulate_records(cfg: BenchmarkConfig, model: int, T: float, workers: int | None = None, pool=None) -> list:
    """Per-path records for one model and horizon, sorted by path index."""
    grid = horizon_grid(T)
    workers = cfg.workers if workers is None else workers
    chunks = _chunks(cfg.paths, workers)
    if workers == 1 or len(chunks) == 1:
        records = [r for a, b in chunks for r in _simulate_and_estimate(cfg, model, grid, a, b)]
    elif pool is None:
        with ProcessPoolExecutor(max_workers=workers) as own:
            return simulate_records(cfg, model, T, workers, own)
    else:
        futures = [pool.submit(_simulate_and_estimate, cfg, model, grid, a, b) for a, b in chunks]
        records = [r for f in futures for r in f.result()]
    return sorted(records, key=lambda r: r.path_index)


def summarize(cfg: BenchmarkConfig, model: int, T: float, records: list) -> list:
    truths = [r.c_true for r in records]
    out = []
    for k, est in enumerate(cfg.estimators):
        mean, sd, rmse = metrics([r.values[k] for r in records], truths)
        hist = {}
        if est.iterative:
            counts = Counter(r.j_n[k] for r in records)
            hist = {it: counts[it] / len(records) for it in sorted(counts)}
        cov = None
        if cfg.ci_coverage:
            cov = sum(r.covered[k] for r in records) / len(records)
        out.append(McSummary(est.id, model, T, len(records), mean, sd, rmse, hist, cov, len(records) == 1))
    return out


def run_benchmark(cfg: BenchmarkConfig) -> list:
    """Summaries for every model x horizon x estimator; writes files if ``output_dir`` is set."""
    summaries = []
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for model in cfg.models:
            for T in cfg.horizons:
                records = simulate_records(cfg, model, T, pool=pool)
                block = summarize(cfg, model, T, records)
                summaries.extend(block)
                if cfg.output_dir is not None:
                    write_block(cfg, model, T, records, block)
    finally:
        if pool is not None:
            pool.shutdown()
    return summaries


# ---------------------------------------------------------------------------
# output


TABLE_COLUMNS = ("estimator", "rel_err_pct", "sd_rel_err_pct", "sqrt_mse_x1e4")


def _table_rows(summaries) -> list:
    rows = []
    for s in summaries:
        row = [s.estimator_id, f"{s.mean_rel_err_pct:.4f}", f"{s.sd_rel_err_pct:.4f}", f"{1e4 * s.sqrt_mse:.4f}"]
        if s.ci_coverage is not None:
            row.append(f"{s.ci_coverage:.4f}")
        rows.append(row)
    return rows


def render_table(summaries, fmt: str = "csv") -> str:
    summaries = list(summaries)
    header = list(TABLE_COLUMNS)
    if any(s.ci_coverage is not None for s in summaries):
        header.append("ci_coverage")
    rows = _table_rows(summaries)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    raise InvalidArgument(f"unknown table format {fmt!r}")


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def emit_tables(summaries, fmt: str, out) -> Path:
    """Write one table (all given summaries) to ``out``."""
    out = Path(out)
    _write(out, render_table(summaries, fmt))
    return out


def block_name(model: int, T: float) -> str:
    return f"{model}_{horizon_label(T)}"


def write_block(cfg: BenchmarkConfig, model: int, T: float, records: list, summaries: list) -> None:
    root = Path(cfg.output_dir)
    name = block_name(model, T)
    emit_tables(summaries, "csv", root / "tables" / f"{name}.csv")
    emit_tables(summaries, "markdown", root / "tables" / f"{name}.md")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path", "c_true"] + [e.id for e in cfg.estimators])
    for r in records:
        writer.writerow([r.path_index, repr(r.c_true)] + [repr(v) for v in r.values])
    _write(root / "raw" / f"{name}.csv", buf.getvalue())

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["estimator", "j_n", "fraction"])
    for s in summaries:
        for it, frac in s.iter_histogram.items():
            writer.writerow([s.estimator_id, it, f"{frac:.6f}"])
    _write(root / "iters" / f"{name}.csv", buf.getvalue())


def with_workers(cfg: BenchmarkConfig, workers: int) -> BenchmarkConfig:
    return replace(cfg, workers=workers)
