"""Command-line entry point: ``drlcov {train,experiment,apc,snapshot,config}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .coverage import read_ledger, recompute_ledger, write_ledger
from .harness.charts import scatter_chart
from .harness.config import ConfigError, apply_overrides, parse_config, parse_override, to_toml
from .harness.experiment import comparison, run_experiment
from .harness.runner import list_snapshots, read_snapshot, run_training, snapshot_paths

log = logging.getLogger("drlcov")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML experiment config")
    p.add_argument("--env", choices=("cartpole", "highway"), help="run.env")
    p.add_argument("--episodes", type=int, help="run.episodes")
    p.add_argument("--grid-cells", type=int, help="coverage.grid_cells")
    p.add_argument("--batch-episodes", type=int, help="coverage.batch_episodes")
    p.add_argument("--rrt-dist", type=float, help="maximizer.rrt_dist")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--out", type=Path, help="output directory (run.out_dir)")


def _load_config(args):
    cfg = parse_config(args.config)
    overrides = {}
    flag_keys = {
        "env": "run.env", "episodes": "run.episodes", "grid_cells": "coverage.grid_cells",
        "batch_episodes": "coverage.batch_episodes", "rrt_dist": "maximizer.rrt_dist",
    }
    for attr, path in flag_keys.items():
        if getattr(args, attr, None) is not None:
            overrides[path] = getattr(args, attr)
    if getattr(args, "seeds", None):
        overrides["run.seeds"] = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "workers", None) is not None:
        overrides["run.workers"] = args.workers
    if args.out is not None:
        overrides["run.out_dir"] = str(args.out)
    for item in args.set:
        path, value = parse_override(item)
        overrides[path] = value
    return apply_overrides(cfg, overrides) if overrides else cfg


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.run.out_dir)
    res = run_training(cfg, args.seed, args.maximize, out, progress=log.info)
    (out / "config.toml").write_text(to_toml(cfg))
    print(f"{res.env} seed={res.seed} arm={res.arm} episodes={len(res.rewards)} "
          f"final_apc={res.final_apc:.4f} mean_reward_last100={np.mean(res.rewards[-100:]):.2f} "
          f"wall={res.wall_time:.1f}s -> {out}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    stats, results = run_experiment(cfg, cfg.run.out_dir)
    for row in comparison(results):
        print(f"{row['metric']}: baseline={row['baseline']:.4f} maximized={row['maximized']:.4f} "
              f"delta={row['delta_pct']:+.1f}%")
    print(f"artifacts in {cfg.run.out_dir}")
    return 0


def cmd_apc(args) -> int:
    """Recompute the coverage ledger of a run from its snapshot CSVs."""
    run = Path(args.run_dir)
    snaps = list_snapshots(run)
    if not snaps:
        raise FileNotFoundError(f"no snapshots under {run / 'snapshots'}")
    stored = read_ledger(run / "ledger.csv") if (run / "ledger.csv").exists() else None
    cells = args.grid_cells
    if cells is None:
        cfg_path = run / "config.toml"
        cells = parse_config(cfg_path).coverage.grid_cells if cfg_path.exists() else 50
    starts = [0] + [ep for ep, _ in snaps[:-1]]
    ranges = list(zip(starts, [ep for ep, _ in snaps]))
    if stored is not None and len(stored) == len(snaps):
        ranges = [(r.episode_start, r.episode_end) for r in stored]
    rows = recompute_ledger([read_snapshot(p)["points"] for _, p in snaps], cells, ranges)
    out = args.out or run / "ledger_recomputed.csv"
    write_ledger(rows, out)
    for r in rows:
        print(f"batch {r.batch}: episodes [{r.episode_start}, {r.episode_end}) "
              f"new={r.new_cells} occupied={r.cum_occupied} apc={r.apc:.4f}")
    if stored is not None and args.grid_cells is None:
        if [vars(r) for r in rows] != [vars(r) for r in stored]:
            print("recomputed ledger differs from stored ledger.csv", file=sys.stderr)
            return 3
        print("matches stored ledger.csv")
    return 0


def cmd_snapshot(args) -> int:
    run = Path(args.run_dir)
    snaps = list_snapshots(run)
    if not snaps:
        raise FileNotFoundError(f"no snapshots under {run / 'snapshots'}")
    for ep, path in snaps:
        data = read_snapshot(path)
        svg = snapshot_paths(run, ep)["svg"]
        scatter_chart(svg, data["points"], data["q_first"], f"embedded states, episode {ep}")
        print(svg)
    return 0


def cmd_config(args) -> int:
    sys.stdout.write(to_toml(_load_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drlcov", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="single training run")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maximize", action="store_true", help="enable the coverage-maximizing scheduler")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="multi-seed baseline vs. maximized comparison")
    _add_config_flags(p)
    p.add_argument("--seeds", help="comma-separated seed list (run.seeds)")
    p.add_argument("--workers", type=int, help="parallel worker processes (run.workers)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("apc", help="recompute APC from a run's stored snapshot CSVs")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--grid-cells", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_apc)

    p = sub.add_parser("snapshot", help="re-emit embedding charts from snapshot CSVs")
    p.add_argument("run_dir", type=Path)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("config", help="print the canonical resolved config")
    _add_config_flags(p)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"drlcov: config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - top-level diagnostic
        print(f"drlcov: error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
