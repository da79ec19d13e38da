"""``mfbo`` command line.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 I/O error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, runner
from .config import ConfigError, load_config
from .data import (
    ColumnMapping,
    DataError,
    DemandEstimateConfig,
    GridSpec,
    estimate_demand,
    parse_trips,
    save_distribution,
    station_index,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("mfbo")


def cmd_run(args):
    cfg = load_config(args.config)
    changes = {}
    if args.algorithms:
        changes["algorithms"] = tuple(args.algorithms)
    if args.seeds is not None:
        changes["seeds"] = tuple(range(args.seeds))
    if args.budget is not None:
        changes["budget_t"] = args.budget
    if changes:
        cfg = cfg.replace(**changes)
    out = Path(args.out) if args.out else cfg.output_dir
    results = runner.run_experiment(cfg, out)
    for algo, runs in results.items():
        finals = np.array([r.best_rewards[-1] for r in runs])
        se = finals.std(ddof=1) / np.sqrt(len(finals)) if len(finals) > 1 else 0.0
        print(f"{algo:>20s}: final best {finals.mean():.6g} +- {se:.3g} (n={len(finals)})")
    print(f"results written to {out}")


def cmd_aggregate(args):
    summary = runner.aggregate_dir(args.dir)
    for algo, (mean, se) in summary.items():
        print(f"{algo:>20s}: final best {mean[-1]:.6g} +- {se[-1]:.3g}")


def cmd_plot(args):
    runner.plot_dir(args.dir, title=args.title or Path(args.dir).name)
    print(f"plots written to {args.dir}")


def _load_yaml(path):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return raw


def cmd_demand(args):
    raw = _load_yaml(args.config)
    try:
        mapping = ColumnMapping(**raw.get("columns", {}))
        est_cfg = DemandEstimateConfig(**raw.get("filter", {}))
        grid = GridSpec(**raw["grid"]) if "grid" in raw else None
    except (TypeError, DataError) as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    output = args.out or raw.get("output")
    if not output:
        raise ConfigError("no output path: pass --out or set output in the config")
    output = Path(output)
    if not output.is_absolute() and not args.out:
        output = Path(args.config).parent / output
    with open(args.trips, newline="", encoding="utf-8") as fh:
        trips, skipped = parse_trips(fh, mapping)
    discretiser = grid if grid is not None else station_index(trips)
    est = estimate_demand(trips, est_cfg, discretiser)
    save_distribution(output, est.demand, est.labels)
    print(
        f"{len(trips)} trips parsed ({skipped} skipped), {len(est.dates)} dates, "
        f"{len(est.kept_actions)} actions kept -> {output}"
    )


def cmd_oracle(args):
    cfg = load_config(args.config)
    try:
        xi, g = runner.brute_force_optimum(cfg.env, args.resolution)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(json.dumps({"g_star": g, "xi_star": xi.tolist(), "resolution": args.resolution}))


def build_parser():
    p = argparse.ArgumentParser(prog="mfbo", description="Mean-field Bayesian optimisation experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every configured algorithm over every seed")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: output_dir from the config)")
    r.add_argument("--algorithms", nargs="+", help="override the configured algorithm list")
    r.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    r.add_argument("--budget", type=int, help="override budget_t")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("aggregate", help="recompute agg_<algo>.csv from run CSVs")
    a.add_argument("dir")
    a.set_defaults(func=cmd_aggregate)

    d = sub.add_parser("demand", help="estimate a demand distribution from trip records")
    d.add_argument("trips")
    d.add_argument("config")
    d.add_argument("--out")
    d.set_defaults(func=cmd_demand)

    o = sub.add_parser("oracle", help="brute-force the optimal distribution of a tiny instance")
    o.add_argument("config")
    o.add_argument("--resolution", type=int, default=100)
    o.set_defaults(func=cmd_oracle)

    pl = sub.add_parser("plot", help="redraw convergence.svg and histogram.svg")
    pl.add_argument("dir")
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"mfbo: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"mfbo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"mfbo: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
