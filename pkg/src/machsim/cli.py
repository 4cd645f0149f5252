"""Command line: ``machsim run|sweep|generate|validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import config as scen
from .engine import run
from .metrics import export, export_events, result_stem
from .mobility import SyntheticScenarioSpec, generate_synthetic, load_schedule, write_trace
from .model import ConfigError
from .sweep import results_csv, run_sweep

log = logging.getLogger("machsim")


class CliError(Exception):
    pass


def _scenario(args) -> "scen.SimConfig":
    cfg = scen.load_scenario(args.scenario, capacity_scale=args.capacity_scale)
    return scen.apply_overrides(cfg, strategy=args.strategy, interval=args.interval, seed=args.seed)


def _write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def cmd_run(args) -> int:
    cfg = _scenario(args)
    state, series = run(cfg)
    out = Path(args.out)
    stem = result_stem(cfg.name, cfg.strategy, cfg.params.load_share_interval)
    _write(out / f"{stem}.csv", export(series, "csv"))
    _write(out / f"{stem}.json", export(series, "json"))
    _write(out / f"{stem}_events.csv", export_events(state.event_log))
    s = series.summary()
    print(
        f"{stem}: handovers={s['handovers']} failed={s['failed']} "
        f"gini={s['gini']:.4f} qos_avg={s['qos_avg']:.4f} qos_min={s['qos_min']:.4f}"
    )
    print(f"results written to {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _scenario(args)
    grid = scen.load_grid(args.grid)
    results = run_sweep(cfg, grid, n_jobs=args.jobs, gini_aggregate=args.gini_aggregate)
    out = Path(args.out)
    path = out / f"{cfg.name}_sweep.csv"
    _write(path, results_csv(results))
    failed = sum(r.failed for r in results)
    best = next((r for r in results if not r.failed), None)
    if best is not None:
        p = best.params
        print(
            f"best: overload={p.overload_threshold} hysteresis={p.hysteresis} "
            f"suitability={p.min_suitability} eval_sum={best.eval_sum:.4f}"
        )
    if failed:
        print(f"{failed} of {len(results)} cells failed", file=sys.stderr)
    print(f"results written to {path}")
    return 0


def _synthetic_spec(path: Path, seed: Optional[int]) -> SyntheticScenarioSpec:
    doc = scen.read_toml(path)
    table = doc.get("trace", {}).get("synthetic", doc.get("synthetic"))
    if table is None:
        raise ConfigError(str(path), "no [synthetic] or [trace.synthetic] table")
    base_seed = int(doc.get("simulation", {}).get("seed", 0))
    spec = scen.synthetic_from_table(table, base_seed, "synthetic")
    step = float(doc.get("simulation", {}).get("step_duration", table.get("step_duration", spec.step_duration)))
    spec = replace(spec, step_duration=step)
    if seed is not None:
        spec = replace(spec, rng_seed=seed)
    return spec


def cmd_generate(args) -> int:
    spec = _synthetic_spec(scen.resolve_scenario(args.spec), args.seed)
    schedule = generate_synthetic(spec)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        write_trace(schedule, fh, spec.step_duration)
    print(f"{len(schedule)} steps, {len({v.vehicle_id for vs in schedule.values() for v in vs})} vehicles -> {out}")
    return 0


def cmd_validate(args) -> int:
    cfg = _scenario(args)
    schedule = load_schedule(cfg.trace_source, cfg.step_duration, cfg.vehicle_capacity)
    vehicles = len({v.vehicle_id for vs in schedule.values() for v in vs})
    print(
        f"{cfg.name}: ok ({len(cfg.rsus)} RSUs, {vehicles} vehicles, {cfg.duration} steps, "
        f"strategy {cfg.strategy}, interval {cfg.params.load_share_interval})"
    )
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", help="scenario TOML file or bundled scenario name")
    p.add_argument("--strategy", choices=("mach", "nearest", "earliest", "latest"))
    p.add_argument("--interval", help="load-sharing interval in steps, or 'oracle'")
    p.add_argument("--seed", type=int)
    p.add_argument("--capacity-scale", type=float, dest="capacity_scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="machsim", description="RSU handover coordination simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario and export metrics")
    _common(p)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid search over MACH parameters")
    _common(p)
    p.add_argument("grid", help="TOML file with a [grid] table of value lists")
    p.add_argument("--out", default="results")
    p.add_argument("--jobs", type=int, default=1, help="parallel cells (-1 = all cores)")
    p.add_argument("--gini-aggregate", choices=("mean", "median", "max"), default="mean")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("generate", help="write a synthetic trace CSV")
    p.add_argument("spec", help="TOML file with a [synthetic] or [trace.synthetic] table")
    p.add_argument("output", nargs="?", default=None)
    p.add_argument("--out", dest="out", default=None, help="output CSV path")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="check a scenario file")
    _common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "generate":
        args.output = args.out or args.output
        if args.output is None:
            parser.error("generate: an output path is required")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
