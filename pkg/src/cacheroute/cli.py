"""Command-line front end.

Subcommands: ``run`` (one scenario or preset to CSV), ``sweep`` (cache size,
alpha, or id-cache size), ``validate`` (oracle self-checks) and ``presets``.
CSV schemas are fixed; reruns with the same seed are byte-identical.  The
``CACHEROUTE_OUT_DIR`` environment variable sets the default output
directory.  Exit codes: 0 success, 1 failed validation, 2 configuration
error, 3 runtime abort (for example an unstable uncached path).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analytic_models import (
    alpha_two_lru_model,
    alpha_two_lru_delay,
    optimal_delay_sensitive,
)
from .path_models import UnstableQueueError
from .routing_policies import optimal_policy
from .scenarios import (
    PRESETS,
    ConfigError,
    apply_overrides,
    build_preset,
    parse_scenario_file,
)
from .sim_engine import Scenario, compare, run
from .validation import format_report, run_validation

RUN_COLUMNS = ("window_end_arrivals", "mean_delay", "hit_rate", "miss_rate",
               "deflect_rate", "uncached_rate")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("CACHEROUTE_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _scenarios_from_args(args) -> list[Scenario]:
    if bool(args.scenario) == bool(args.preset):
        raise ConfigError("exactly one of --scenario or --preset is required")
    if args.scenario:
        scenarios = [parse_scenario_file(args.scenario)]
    else:
        kw = {}
        if args.cache_size is not None:
            kw["cache_size"] = args.cache_size
        if args.path is not None:
            kw["path"] = args.path
        scenarios = build_preset(args.preset, **kw)
    overrides = dict(kv.split("=", 1) for kv in args.override)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.arrivals is not None:
        overrides["arrivals"] = str(args.arrivals)
    if overrides:
        scenarios = [apply_overrides(s, overrides) for s in scenarios]
    return scenarios


def _run_rows(result):
    rows = []
    for w in result.windows:
        r = w.rates()
        rows.append((w.end_arrivals, w.mean_delay, r["hit_rate"], r["miss_rate"],
                     r["deflect_rate"], r["uncached_rate"]))
    return rows


def cmd_run(args) -> int:
    scenarios = _scenarios_from_args(args)
    outdir = _out_dir(args)
    for scenario in scenarios:
        result = run(scenario)
        path = outdir / f"{scenario.name}.csv"
        _write_csv(path, RUN_COLUMNS, _run_rows(result))
        print(f"{scenario.name}: mean delay {result.mean_delay:.4f} -> {path}")
        if args.plot:
            from .plotting import plot_run_csv

            print(f"  figure -> {plot_run_csv(path, path.with_suffix('.png'))}")
    return 0


def _parse_values(expr: str, integer: bool) -> list:
    expr = expr.strip()
    if ":" in expr:
        start, stop, step = (float(v) for v in expr.split(":"))
        values = list(np.arange(start, stop + step * 1e-9, step))
    else:
        values = [float(v) for v in expr.split(",") if v.strip()]
    return [int(round(v)) for v in values] if integer else values


def cmd_sweep(args) -> int:
    scenarios = _scenarios_from_args(args)
    outdir = _out_dir(args)
    integer = args.dimension in ("cache_size", "id_cache_size")
    values = _parse_values(args.values, integer)
    if not values:
        raise ConfigError("empty sweep range")
    name = f"sweep-{args.dimension}-{scenarios[0].name}"
    path = outdir / f"{name}.csv"

    if args.dimension == "alpha":
        rows = _sweep_alpha(scenarios, values)
        header = ("alpha", "sim_hit", "sim_miss", "sim_deflect",
                  "model_hit", "model_miss", "model_deflect")
    elif args.dimension == "id_cache_size":
        rows = _sweep_id_cache(scenarios, values)
        header = ("id_cache_size", "model_delay", "static_optimal_delay")
    else:
        rows, header = _sweep_cache_size(scenarios, values, args.replications)
    _write_csv(path, header, rows)
    print(f"{len(rows)} sweep points -> {path}")
    if args.plot:
        from .plotting import plot_sweep_csv

        print(f"  figure -> {plot_sweep_csv(path, path.with_suffix('.png'), args.dimension)}")
    return 0


def _sweep_alpha(scenarios, values):
    if len(scenarios) != 1:
        raise ConfigError("the alpha sweep needs a single-scenario preset")
    base = scenarios[0]
    if base.policy not in ("alpha-two-lru", "two-lru"):
        raise ConfigError("the alpha sweep needs a two-stage-cache scenario")
    rates = base.user_rate * base.n_users * np.asarray(
        base.build_profiles()[0].popularity)
    rows = []
    for alpha in values:
        scenario = replace(base, policy="alpha-two-lru", alpha=float(alpha))
        summary = run(scenario).summary
        model = alpha_two_lru_model(
            rates, scenario.cache_size, scenario.id_cache_size, float(alpha))
        rows.append((alpha, summary["hit_rate"], summary["miss_rate"],
                     summary["deflect_rate"], model.agg_hit, model.agg_miss,
                     model.agg_deflect))
    return rows


def _sweep_id_cache(scenarios, values):
    base = scenarios[0]
    rates = base.user_rate * base.n_users * np.asarray(
        base.build_profiles()[0].popularity)
    profiles = base.build_profiles()
    delays = base.delay_profile()
    plan = optimal_policy(profiles, base.cache_size, delays, "mm1", base.mu)
    static_ref = optimal_delay_sensitive(
        profiles, plan.cached, base.hit_delay, base.miss_delay, base.mu,
        plan.split_p)
    rows = []
    for c_id in values:
        try:
            d = alpha_two_lru_delay(rates, base.cache_size, int(c_id), 0.0,
                                    base.hit_delay, base.miss_delay, base.mu)
        except UnstableQueueError:
            d = float("inf")
        rows.append((int(c_id), d, static_ref))
    return rows


def _sweep_cache_size(scenarios, values, replications):
    policies = [s.policy for s in scenarios]
    header = ["cache_size"]
    for p in policies:
        header += [f"{p}_delay", f"{p}_se"]
    rows = []
    for c in values:
        sized = [replace(s, cache_size=int(c)) for s in scenarios]
        result = compare(sized, replications=replications)
        row = [int(c)]
        for r in result.rows:
            row += [r.mean_delay, r.stderr]
        rows.append(tuple(row))
    return rows, tuple(header)


def cmd_validate(args) -> int:
    checks = run_validation(full=args.full)
    print(format_report(checks))
    return 0 if all(c.passed for c in checks) else 1


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        _, description = PRESETS[name]
        print(f"{name:22s} {description}")
    return 0


def _add_common(parser) -> None:
    parser.add_argument("--scenario", help="scenario file (INI format)")
    parser.add_argument("--preset", help="named preset experiment")
    parser.add_argument("--cache-size", type=int, help="preset cache size")
    parser.add_argument("--path", choices=("constant", "mm1"),
                        help="preset uncached-path model")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--arrivals", type=int, help="arrival budget override")
    parser.add_argument("--out", help="output directory "
                        "(default: $CACHEROUTE_OUT_DIR or .)")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="scenario field override")
    parser.add_argument("--plot", action="store_true",
                        help="also render a PNG next to each CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cacheroute",
        description="Joint caching-and-routing simulator and analytic toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario or preset to CSV")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one dimension to CSV")
    p_sweep.add_argument("--dimension", required=True,
                         choices=("cache_size", "alpha", "id_cache_size"))
    p_sweep.add_argument("--values", required=True,
                         help="comma list or start:stop:step")
    p_sweep.add_argument("--replications", type=int, default=10)
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the oracle self-check suite")
    p_val.add_argument("--full", action="store_true",
                       help="acceptance-scale budgets (slow)")
    p_val.set_defaults(func=cmd_validate)

    p_presets = sub.add_parser("presets", help="list preset experiments")
    p_presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except UnstableQueueError as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
