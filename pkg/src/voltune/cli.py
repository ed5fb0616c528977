"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .errors import DataError, InternalError, InvalidArgument
from .estimators import rv
from .fixedpoint import RateRule, iterate_uniform, rate
from .grid import SamplingGrid
from .io import CsvSpec, ingest_csv, write_path_csv, write_sidecar
from .oracle import OracleConfig, default_cutoff, oracle_trv, sandwich_check
from .simulate import (
    TWO_REGIME_STREAM,
    SimConfig,
    TwoRegimeParams,
    simulate_model,
    simulate_two_regime,
    stream,
    two_regime_threshold,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _days_grid(days: int) -> SamplingGrid:
    return harness.horizon_grid(days / 252)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    grid = _days_grid(args.days)
    cfg = SimConfig(grid, seed=args.seed)
    bundle = simulate_model(args.model, grid, cfg, args.path)
    out = Path(args.output)
    write_path_csv(bundle, out)
    sidecar = out.with_suffix(".json")
    write_sidecar(bundle, sidecar, model=args.model, path_index=args.path)
    print(f"wrote {out} and {sidecar} (n={grid.n}, T={grid.T:.6g}, c_true={bundle.c_true:.6e})")
    return EXIT_OK


def cmd_estimate(args) -> int:
    incs = ingest_csv(args.input, CsvSpec(tolerance=args.tolerance))
    spec = harness.estimator_by_id(args.method)
    res = harness.run_estimator(spec, incs)
    lo, hi = res.ci(incs, args.level)
    print(f"estimator   {spec.id} ({spec.kind})")
    print(f"n           {incs.n}")
    print(f"T           {incs.T:.10g}")
    print(f"estimate    {res.value:.10e}")
    print(f"annualized  {math.sqrt(max(res.value, 0.0) / incs.T):.6f}")
    print(f"{100 * args.level:g}% CI      [{lo:.10e}, {hi:.10e}]")
    if res.j_n is not None:
        print(f"j_n         {res.j_n}")
        print(f"iterations  {res.iterations}")
    kept = int(np.count_nonzero(res.active))
    print(f"kept        {kept}/{incs.n}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = harness.load_config(args.config)
    changes = {"workers": harness.resolve_workers(args.workers, cfg.workers)}
    if args.paths is not None:
        changes["paths"] = args.paths
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    cfg = replace(cfg, **changes)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir="bench_out")
    summaries = harness.run_benchmark(cfg)
    for model in cfg.models:
        for T in cfg.horizons:
            block = [s for s in summaries if s.model == model and s.horizon == T]
            print(f"Model {model}, {harness.horizon_label(T)} (n={harness.horizon_grid(T).n}, m={cfg.paths})")
            print(harness.render_table(block, "markdown"))
    print(f"outputs in {cfg.output_dir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    grid = _days_grid(args.days)
    sim = SimConfig(grid, seed=args.seed)
    r = rate(RateRule.power(4.0, 0.49), grid.h)
    y = default_cutoff(grid.h, args.y_const)
    ocfg = OracleConfig(y)
    if y <= sim.cgmy_trunc:
        raise InvalidArgument(f"cutoff {y:g} must exceed the CGMY truncation {sim.cgmy_trunc:g}")
    sandwich = equality = degenerate = 0
    for p in range(args.paths):
        bundle = simulate_model(args.model, grid, sim, p)
        init = rv(bundle.increments)
        trace = iterate_uniform(bundle.increments, r, init)
        rep = sandwich_check(bundle, ocfg, r, init, trace)
        sandwich += rep.ok
        equality += rep.equality_ok
        if args.model == 5:
            same = oracle_trv(bundle, ocfg) == init and rep.iterate_value == trace.value
            degenerate += same
    m = args.paths
    print(f"Model {args.model}, n={grid.n}, y={y:.6g}, paths={m}")
    print(f"sandwich holds   {sandwich}/{m}")
    print(f"equality event   {equality}/{m} ({equality / m:.3f})")
    if args.model == 5:
        print(f"oracle = main    {degenerate}/{m}")
    if sandwich != m or (args.model == 5 and degenerate != m):
        print("path-wise invariant violated", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def divergence_medians(ns, paths: int, seed: int, params: TwoRegimeParams | None = None, T: float = 1.0) -> list:
    """Median of sqrt(n) (TRV(threshold) - C_T) for each n."""
    params = params or TwoRegimeParams()
    out = []
    for n in ns:
        grid = SamplingGrid(n, T)
        eps = two_regime_threshold(params, grid)
        stats = np.empty(paths)
        for p in range(paths):
            bundle = simulate_two_regime(params, grid, stream(seed, p, TWO_REGIME_STREAM, n))
            x = bundle.increments.values
            trv_value = float(np.sum(np.where(np.abs(x) <= eps, x**2, 0.0)))
            stats[p] = math.sqrt(n) * (trv_value - bundle.c_true)
        out.append(float(np.median(stats)))
    return out


def cmd_divergence(args) -> int:
    params = TwoRegimeParams(a=args.a, b=args.b, theta_break=args.theta, c0=args.c0)
    medians = divergence_medians(args.n, args.paths, args.seed, params)
    print(f"two-regime path: a={params.a:g} b={params.b:g} break={params.theta_break:g} c0={params.c0:g} delta={params.delta:g}")
    print("n,median_scaled_error")
    for n, med in zip(args.n, medians):
        print(f"{n},{med:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voltune", description="Fixed-point threshold tuning for realized volatility.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one path to CSV plus a JSON ground-truth sidecar")
    p.add_argument("--model", type=int, default=1, choices=range(1, 6))
    p.add_argument("--days", type=int, default=5, help="trading days (78 observations each)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path", type=int, default=0, help="path index within the seed")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate integrated variance from a price CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="6b", help="estimator id: 1, 2, 3, 4, 5a, 5b, 6a, 6b")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--tolerance", type=float, default=0.01, help="allowed relative deviation of time steps")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", help="run a Monte Carlo benchmark from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help=f"overrides ${harness.WORKERS_ENV} and the config")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("validate", help="check the oracle sandwich on simulated paths")
    p.add_argument("--model", type=int, default=1, choices=range(1, 6))
    p.add_argument("--days", type=int, default=5)
    p.add_argument("--paths", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--y-const", type=float, default=0.1, help="cutoff y = const * sqrt(h log(1/h))")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("divergence-demo", help="scaled TRV error for a volatility-break path across n")
    p.add_argument("--n", type=_int_list, default=[512, 2048, 8192])
    p.add_argument("--paths", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a", type=float, default=0.25)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.8)
    p.add_argument("--c0", type=float, default=2.0)
    p.set_defaults(func=cmd_divergence)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidArgument as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
