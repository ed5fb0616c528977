"""CSV tick-data ingestion and path export.

Input files have a header row and two columns: ``time`` (seconds, or ISO-8601
timestamps) and ``price`` or ``logprice``. Times are converted to years with
a trading-year clock of 252 days x 6.5 hours, so a 5-minute grid has
h = 1/19656 exactly as in the simulator.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidArgument
from .grid import DAYS_PER_YEAR, IncrementSeries, PathBundle, SamplingGrid

SECONDS_PER_YEAR = DAYS_PER_YEAR * 6.5 * 3600.0
PRICE_KINDS = ("price", "logprice")


@dataclass(frozen=True)
class CsvSpec:
    time_column: str = "time"
    value_column: str | None = None  # inferred from the header when None
    price_kind: str | None = None  # inferred from the value column name when None
    tolerance: float = 0.01  # allowed |step - h| / h
    seconds_per_year: float = SECONDS_PER_YEAR

    def __post_init__(self):
        if self.price_kind is not None and self.price_kind not in PRICE_KINDS:
            raise InvalidArgument(f"price_kind must be one of {PRICE_KINDS}, got {self.price_kind!r}")
        if not self.tolerance >= 0:
            raise InvalidArgument("tolerance must be >= 0")
        if not self.seconds_per_year > 0:
            raise InvalidArgument("seconds_per_year must be > 0")


def _parse_time(text: str, row: int) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise DataError(f"row {row}: cannot parse time {text!r}", rows=[row]) from exc
    return stamp.timestamp()


def _parse_value(text: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise DataError(f"row {row}: cannot parse value {text!r}", rows=[row]) from exc
    if not math.isfinite(value):
        raise DataError(f"row {row}: value {text!r} is not finite", rows=[row])
    return value


def ingest_csv(path, spec: CsvSpec | None = None) -> IncrementSeries:
    """Read a price file into an increment series on its inferred regular grid.

    Row numbers in errors count data rows from 0 (the header is not counted).
    """
    spec = spec or CsvSpec()
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if spec.time_column not in fields:
        raise DataError(f"{path}: missing column {spec.time_column!r} (found {fields})")
    value_col = spec.value_column
    if value_col is None:
        value_col = next((c for c in PRICE_KINDS if c in fields), None)
        if value_col is None:
            raise DataError(f"{path}: need a 'price' or 'logprice' column (found {fields})")
    elif value_col not in fields:
        raise DataError(f"{path}: missing column {value_col!r} (found {fields})")
    kind = spec.price_kind or (value_col if value_col in PRICE_KINDS else "price")

    if len(rows) < 3:
        raise DataError(f"{path}: need at least 3 observations, got {len(rows)}")
    times = np.array([_parse_time(r[spec.time_column] or "", k) for k, r in enumerate(rows)])
    values = np.array([_parse_value(r[value_col] or "", k) for k, r in enumerate(rows)])

    steps = np.diff(times)
    bad = np.flatnonzero(steps <= 0) + 1
    if bad.size:
        raise DataError(f"{path}: times not strictly increasing at rows {bad.tolist()}", rows=bad.tolist())
    n = steps.size
    h_sec = (times[-1] - times[0]) / n
    irregular = np.flatnonzero(np.abs(steps - h_sec) > spec.tolerance * h_sec) + 1
    if irregular.size:
        raise DataError(
            f"{path}: spacing deviates from the mean step by more than {spec.tolerance:g}*h "
            f"at rows {irregular.tolist()[:20]}",
            rows=irregular.tolist(),
        )

    if kind == "price":
        bad = np.flatnonzero(values <= 0)
        if bad.size:
            raise DataError(f"{path}: nonpositive prices at rows {bad.tolist()}", rows=bad.tolist())
        values = np.log(values)
    grid = SamplingGrid(n, (times[-1] - times[0]) / spec.seconds_per_year)
    return IncrementSeries(grid, np.diff(values))


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_path_csv(bundle: PathBundle, path, seconds_per_year: float = SECONDS_PER_YEAR) -> Path:
    """Write ``time,logprice`` rows (time in seconds) with 17 significant digits."""
    path = Path(path)
    times = bundle.grid.times() * seconds_per_year
    levels = bundle.levels()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "logprice"])
            for t, x in zip(times, levels):
                writer.writerow([_g17(t), _g17(x)])
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc
    return path


def ground_truth(bundle: PathBundle, **extra) -> dict:
    out = {
        "n": bundle.grid.n,
        "T": bundle.grid.T,
        "x0": bundle.x0,
        "seed": bundle.seed,
        "c_true": bundle.c_true,
        "jumps": {
            rec.component.value: {"times": rec.times.tolist(), "sizes": rec.sizes.tolist()}
            for rec in bundle.jumps
        },
    }
    out.update(extra)
    return out


def write_sidecar(bundle: PathBundle, path, **extra) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(ground_truth(bundle, **extra), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc
    return path
