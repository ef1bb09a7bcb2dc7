"""Single training run: DQN interaction, coverage batches, optional maximizer."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..agent import DQNAgent, QNetwork, load_checkpoint, q_of_first_action, save_checkpoint
from ..coverage import LedgerRow, OccupancySet, StateBuffer, assess_batch, write_ledger
from ..envs import CartpoleEnv, HighwayEnv
from ..maximizer import CartpoleAbstraction, CoverageScheduler, HighwayAbstraction, write_trace
from .charts import scatter_chart
from .config import ExperimentConfig

log = logging.getLogger(__name__)

REWARDS_VERSION = "# drlcov rewards v1"
SNAPSHOT_VERSION = "# drlcov snapshot v1"
STATES_VERSION = "# drlcov snapshot-states v1"

# SeedSequence children, in this order
STREAMS = ("net_init", "action", "replay", "env", "scheduler", "tsne")


class RunError(RuntimeError):
    pass


@dataclass
class Snapshot:
    episode: int
    points: np.ndarray
    q_first: np.ndarray
    states: np.ndarray


@dataclass
class RunResult:
    env: str
    seed: int
    maximize: bool
    rewards: list
    ledger: list
    trace: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final_apc(self) -> float:
        return self.ledger[-1].apc if self.ledger else 0.0

    @property
    def arm(self) -> str:
        return "maximized" if self.maximize else "baseline"


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


def make_env(cfg: ExperimentConfig, rng: np.random.Generator):
    if cfg.run.env == "cartpole":
        env = CartpoleEnv(cfg.cartpole_config())
        abstraction = CartpoleAbstraction(env.config, sigma_fraction=cfg.maximizer.sigma_fraction)
    else:
        env = HighwayEnv(cfg.highway_config())
        abstraction = HighwayAbstraction(env.config, sigma_fraction=cfg.maximizer.sigma_fraction)
    env.rng = rng
    return env, abstraction


def run_training(cfg: ExperimentConfig, seed: int, maximize: bool, out_dir=None, progress=None) -> RunResult:
    """Train one agent for ``cfg.run.episodes`` episodes.

    The baseline (``maximize=False``) starts every episode from the
    environment's default reset; the maximized arm asks the coverage
    scheduler for the start state. Both arms draw the network
    initialization, action exploration and replay sampling from identical
    seeded streams.
    """
    t0 = time.perf_counter()
    streams = seed_streams(seed)
    env, abstraction = make_env(cfg, streams["env"])
    dqn = cfg.dqn_config()
    cov = cfg.coverage_config()
    agent = DQNAgent(env.observation_size, env.action_count, dqn,
                     streams["net_init"], streams["action"], streams["replay"])
    sched = None
    if maximize:
        sched = CoverageScheduler(abstraction, streams["scheduler"], cfg.scheduler_config(),
                                  validate=env.validate_init)

    buffer = StateBuffer(env.observation_size)
    occ = OccupancySet(cov.grid_cells)
    rewards, ledger, snapshots = [], [], []
    k = cov.batch_episodes
    batch_start = 0
    try:
        for ep in range(cfg.run.episodes):
            epsilon = dqn.action_epsilon(ep)
            record = sched.next_init_state(ep) if sched is not None else None
            obs = env.reset(None if record is None else record.state)
            buffer.append(obs)
            total = 0.0
            while True:
                action = agent.act(obs, epsilon)
                out = env.step(action)
                agent.observe(obs, action, out.reward, out.next_state, out.terminal)
                buffer.append(out.next_state)
                total += out.reward
                obs = out.next_state
                if out.done:
                    break
            rewards.append(total)
            if record is not None:
                sched.record_score(record, total)
            if (ep + 1) % k == 0:
                result = assess_batch(buffer, occ, cov, streams["tsne"], batch=len(ledger),
                                      episode_start=batch_start, episode_end=ep + 1)
                occ = result.occupancy
                ledger.append(result.row)
                q = np.asarray(q_of_first_action(agent.net, result.states))
                snap = Snapshot(ep + 1, result.embedding.points, q, result.states)
                snapshots.append(snap)
                if out_dir is not None:
                    emit_embedding_snapshot(out_dir, snap, agent.net if cfg.run.save_states else None)
                batch_start = ep + 1
                if progress is not None:
                    progress(f"{cfg.run.env} seed={seed} {'max' if maximize else 'base'} "
                             f"ep={ep + 1} apc={result.row.apc:.4f} "
                             f"reward(last {k})={np.mean(rewards[-k:]):.2f}")
    except Exception as err:
        raise RunError(f"{cfg.run.env} seed={seed} maximize={maximize} failed at episode "
                       f"{len(rewards)}: {err}") from err

    res = RunResult(cfg.run.env, seed, maximize, rewards, ledger,
                    sched.records if sched is not None else [], snapshots,
                    time.perf_counter() - t0)
    if out_dir is not None:
        write_run(res, out_dir)
    return res


def snapshot_paths(out_dir, episode: int) -> dict[str, Path]:
    base = Path(out_dir) / "snapshots"
    stem = f"ep{episode:06d}"
    return {
        "csv": base / f"{stem}.csv",
        "states": base / f"{stem}_states.csv",
        "qnet": base / f"{stem}_qnet.txt",
        "svg": base / f"{stem}.svg",
    }


def emit_embedding_snapshot(out_dir, snap: Snapshot, net: QNetwork | None = None) -> dict[str, Path]:
    """Write ``x,y,q_first`` per embedded state plus a scatter chart.

    With ``net`` given, the embedded states and the network parameters are
    stored too so that ``q_first`` can be recomputed later.
    """
    paths = snapshot_paths(out_dir, snap.episode)
    paths["csv"].parent.mkdir(parents=True, exist_ok=True)
    with open(paths["csv"], "w", newline="") as fh:
        fh.write(SNAPSHOT_VERSION + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "q_first"])
        for (x, y), q in zip(snap.points, snap.q_first):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(q))])
    if net is not None:
        with open(paths["states"], "w", newline="") as fh:
            fh.write(STATES_VERSION + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"s{c}" for c in range(snap.states.shape[1])])
            for row in snap.states:
                w.writerow([repr(float(v)) for v in row])
        save_checkpoint(net, paths["qnet"])
    scatter_chart(paths["svg"], snap.points, snap.q_first, f"embedded states, episode {snap.episode}")
    return paths


def read_snapshot(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        if fh.readline().rstrip("\n") != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: missing snapshot version line")
        rows = list(csv.DictReader(fh))
    return {
        "points": np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2),
        "q_first": np.array([float(r["q_first"]) for r in rows]),
    }


def read_snapshot_states(path) -> np.ndarray:
    with open(path, newline="") as fh:
        if fh.readline().rstrip("\n") != STATES_VERSION:
            raise ValueError(f"{path}: missing snapshot-states version line")
        reader = csv.reader(fh)
        next(reader)
        return np.array([[float(v) for v in row] for row in reader])


def list_snapshots(run_dir) -> list[tuple[int, Path]]:
    snap_dir = Path(run_dir) / "snapshots"
    out = []
    for p in sorted(snap_dir.glob("ep*.csv")):
        if p.stem.endswith("_states"):
            continue
        out.append((int(p.stem[2:]), p))
    return out


def write_rewards(rewards, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(REWARDS_VERSION + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "reward"])
        for ep, r in enumerate(rewards):
            w.writerow([ep, repr(float(r))])


def read_rewards(path) -> list[float]:
    with open(path, newline="") as fh:
        if fh.readline().rstrip("\n") != REWARDS_VERSION:
            raise ValueError(f"{path}: missing rewards version line")
        return [float(r["reward"]) for r in csv.DictReader(fh)]


def write_run(res: RunResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rewards(res.rewards, out / "rewards.csv")
    write_ledger(res.ledger, out / "ledger.csv")
    if res.maximize:
        write_trace(res.trace, out / "scheduler.csv")
    summary = {
        "env": res.env,
        "seed": res.seed,
        "arm": res.arm,
        "episodes": len(res.rewards),
        "final_apc": res.final_apc,
        "wall_time_s": round(res.wall_time, 3),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def recompute_q(run_dir, episode: int) -> np.ndarray:
    paths = snapshot_paths(run_dir, episode)
    net = load_checkpoint(paths["qnet"])
    return np.asarray(q_of_first_action(net, read_snapshot_states(paths["states"])))


def ledger_rows_equal(a: list[LedgerRow], b: list[LedgerRow]) -> bool:
    return [vars(r) for r in a] == [vars(r) for r in b]
