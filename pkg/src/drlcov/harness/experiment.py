"""Multi-seed baseline vs. coverage-maximized comparison."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .charts import line_chart
from .config import ExperimentConfig, to_toml
from .runner import RunError, RunResult, run_training

log = logging.getLogger(__name__)

ARMS = ("baseline", "maximized")
AGG_REWARDS_VERSION = "# drlcov aggregate-rewards v1"
AGG_APC_VERSION = "# drlcov aggregate-apc v1"
SUMMARY_VERSION = "# drlcov run-summary v1"
COMPARISON_VERSION = "# drlcov comparison v1"
STAT_FIELDS = ("mean", "std", "min", "max")


@dataclass
class Band:
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    n: int


@dataclass
class AggregateStats:
    rewards: dict  # arm -> Band over episodes
    apc: dict  # arm -> Band over batches
    batch_ends: list
    seeds: dict  # arm -> list of seeds that succeeded


def band(series: list) -> Band:
    """Mean, sample std (ddof=1), min and max across runs, position-wise."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2 or len(arr) < 2:
        raise ValueError("bands need at least two runs")
    return Band(arr.mean(axis=0), arr.std(axis=0, ddof=1), arr.min(axis=0), arr.max(axis=0), len(arr))


def run_dir(out, arm: str, seed: int) -> Path:
    return Path(out) / "runs" / arm / f"seed{seed}"


def _run_one(args):
    cfg, seed, maximize, out = args
    arm = ARMS[int(maximize)]
    try:
        return run_training(cfg, seed, maximize, run_dir(out, arm, seed), progress=log.info)
    except RunError as err:
        log.warning("%s", err)
        return err


def aggregate(results: list[RunResult]) -> AggregateStats:
    rewards, apc, seeds = {}, {}, {}
    batch_ends = []
    for arm in ARMS:
        runs = [r for r in results if r.arm == arm]
        if len(runs) < 2:
            raise RunError(f"{arm}: only {len(runs)} successful seeds; need at least 2")
        rewards[arm] = band([r.rewards for r in runs])
        apc[arm] = band([[row.apc for row in r.ledger] for r in runs])
        seeds[arm] = [r.seed for r in runs]
        batch_ends = [row.episode_end for row in runs[0].ledger]
    return AggregateStats(rewards, apc, batch_ends, seeds)


def last_mean(values, window: int = 100) -> float:
    values = list(values)
    return float(np.mean(values[-window:]))


def run_experiment(cfg: ExperimentConfig, out=None, workers: int | None = None):
    """Run both arms for every seed, write per-run and aggregate artifacts.

    Failed runs are recorded in ``failures.csv``; aggregation needs at least
    two successful seeds per arm.
    """
    out = Path(out if out is not None else cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(to_toml(cfg))
    jobs = [(cfg, seed, maximize, out) for seed in cfg.run.seeds for maximize in (False, True)]
    workers = workers or cfg.run.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(job) for job in jobs]
    results = [o for o in outcomes if isinstance(o, RunResult)]
    failures = [(job, o) for job, o in zip(jobs, outcomes) if not isinstance(o, RunResult)]
    if failures:
        with open(out / "failures.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "arm", "error"])
            for (_, seed, maximize, _), err in failures:
                w.writerow([seed, ARMS[int(maximize)], str(err)])
    stats = aggregate(results)
    write_aggregates(stats, out)
    write_summary(results, out)
    write_charts(stats, out, cfg.run.env)
    return stats, results


def write_aggregates(stats: AggregateStats, out) -> None:
    out = Path(out)
    header = [f"{arm}_{s}" for arm in ARMS for s in STAT_FIELDS]
    with open(out / "aggregate_rewards.csv", "w", newline="") as fh:
        fh.write(AGG_REWARDS_VERSION + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", *header])
        n = len(stats.rewards[ARMS[0]].mean)
        for ep in range(n):
            w.writerow([ep, *[repr(float(getattr(stats.rewards[arm], s)[ep])) for arm in ARMS for s in STAT_FIELDS]])
    with open(out / "aggregate_apc.csv", "w", newline="") as fh:
        fh.write(AGG_APC_VERSION + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["batch", "episode_end", *header])
        for b, end in enumerate(stats.batch_ends):
            w.writerow([b, end, *[repr(float(getattr(stats.apc[arm], s)[b])) for arm in ARMS for s in STAT_FIELDS]])


def read_aggregate(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines[0].startswith("# drlcov aggregate-"):
        raise ValueError(f"{path}: not an aggregate CSV")
    rows = list(csv.DictReader(lines[1:]))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def summarize(results: list[RunResult]) -> list[dict]:
    rows = []
    for r in sorted(results, key=lambda r: (r.seed, r.arm)):
        rows.append({
            "seed": r.seed,
            "arm": r.arm,
            "final_apc": r.final_apc,
            "mean_reward_first100": float(np.mean(r.rewards[:100])),
            "mean_reward_last100": last_mean(r.rewards),
        })
    return rows


def comparison(results: list[RunResult]) -> list[dict]:
    """Arm means of final APC and last-100 reward, with the percentage change."""
    out = []
    for metric in ("final_apc", "mean_reward_last100"):
        vals = {arm: [row[metric] for row in summarize(results) if row["arm"] == arm] for arm in ARMS}
        base, maxi = float(np.mean(vals["baseline"])), float(np.mean(vals["maximized"]))
        delta = 100.0 * (maxi - base) / base if base != 0 else float("nan")
        out.append({"metric": metric, "baseline": base, "maximized": maxi, "delta_pct": delta})
    return out


def write_summary(results: list[RunResult], out) -> None:
    out = Path(out)
    rows = summarize(results)
    with open(out / "summary.csv", "w", newline="") as fh:
        fh.write(SUMMARY_VERSION + "\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    with open(out / "comparison.csv", "w", newline="") as fh:
        fh.write(COMPARISON_VERSION + "\n")
        comp = comparison(results)
        w = csv.DictWriter(fh, fieldnames=list(comp[0]), lineterminator="\n")
        w.writeheader()
        for row in comp:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def write_charts(stats: AggregateStats, out, env: str) -> None:
    out = Path(out)
    labels = {"baseline": "original", "maximized": "coverage max."}
    series = []
    for arm in ARMS:
        b = stats.rewards[arm]
        x = np.arange(1, len(b.mean) + 1)
        series.append(dict(label=labels[arm], x=x, y=b.mean, lo=b.mean - b.std, hi=b.mean + b.std))
    line_chart(out / "rewards.svg", series, f"{env}: reward per episode (mean ± 1 std)", "episode", "reward")
    series = []
    for arm in ARMS:
        b = stats.apc[arm]
        series.append(dict(label=labels[arm], x=stats.batch_ends, y=b.mean, lo=b.mean - b.std, hi=b.mean + b.std))
    line_chart(out / "apc.svg", series, f"{env}: approximate pseudo-coverage (mean ± 1 std)", "episode", "APC")


def with_seeds(cfg: ExperimentConfig, seeds) -> ExperimentConfig:
    return replace(cfg, run=replace(cfg.run, seeds=list(seeds)))
