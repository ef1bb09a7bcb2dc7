"""Acceptance criteria, one test per criterion.

Each test appends a ``criterion N: PASS|FAIL ...`` line that is printed in
the terminal summary. Criteria 1, 4 and 8 train full desk-scale experiments
(roughly half an hour on one core for cartpole, a few minutes for highway).
Set ``DRLCOV_ACCEPTANCE_DIR`` to keep their artifacts; otherwise they go to
a pytest temporary directory.
"""
import math
import os
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from drlcov.agent import QNetwork
from drlcov.cli import main
from drlcov.coverage import histogram_vote
from drlcov.embed import TSNEConfig, conditional_probabilities, row_entropies_bits, tsne_embed
from drlcov.envs import CartpoleState, HighwayConfig, HighwayEnv, cartpole_step, highway_step, idm_acceleration
from drlcov.harness.config import parse_config, parse_config_text
from drlcov.harness.experiment import comparison, last_mean, run_experiment
from drlcov.maximizer import RrtTree, extend

import test_agent
import test_cartpole
import test_coverage
import test_embed
import test_highway
import test_maximizer

pytestmark = pytest.mark.slow


def report(number, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def _artifact_dir(tmp_path_factory, name):
    root = os.environ.get("DRLCOV_ACCEPTANCE_DIR")
    if root:
        path = Path(root) / name
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp(name)


@pytest.fixture(scope="session")
def cartpole_experiment(tmp_path_factory):
    cfg = parse_config(None)  # cartpole, 10 seeds x 600 episodes
    out = _artifact_dir(tmp_path_factory, "cartpole")
    stats, results = run_experiment(cfg, out)
    return cfg, out, results


@pytest.fixture(scope="session")
def highway_experiment(tmp_path_factory):
    cfg = parse_config_text('[run]\nenv = "highway"\n')  # 3 seeds x 300 episodes
    out = _artifact_dir(tmp_path_factory, "highway")
    stats, results = run_experiment(cfg, out)
    return cfg, out, results


def test_criterion_1_coverage_and_reward_direction(cartpole_experiment):
    cfg, _, results = cartpole_experiment
    comp = {row["metric"]: row for row in comparison(results)}
    apc, rew = comp["final_apc"], comp["mean_reward_last100"]
    apc_ok = apc["maximized"] > apc["baseline"]
    rew_ok = rew["maximized"] >= rew["baseline"]
    n_seeds = len({r.seed for r in results})
    ok = report(1, apc_ok and rew_ok,
                f"seeds={n_seeds} episodes={cfg.run.episodes}; "
                f"APC {apc['baseline']:.4f} -> {apc['maximized']:.4f} ({apc['delta_pct']:+.1f}%); "
                f"last-100 reward {rew['baseline']:.1f} -> {rew['maximized']:.1f} ({rew['delta_pct']:+.1f}%)")
    assert n_seeds == 10
    assert ok


def test_criterion_2_apc_properties(cartpole_experiment, highway_experiment):
    runs = cartpole_experiment[2] + highway_experiment[2]
    bounded = all(0.0 <= row.apc <= 1.0 for r in runs for row in r.ledger)
    monotone = all(all(a.apc <= b.apc for a, b in zip(r.ledger, r.ledger[1:])) for r in runs)
    mismatches = 0
    for k in range(100):
        rng = np.random.default_rng(50_000 + k)
        G = int(rng.integers(2, 60))
        pts = rng.random((int(rng.integers(1, 500)), 2))
        snap = rng.random(len(pts)) < 0.25
        pts[snap] = np.round(pts[snap] * G) / G
        if test_coverage.as_dict(*histogram_vote(pts, G)) != test_coverage.brute_force_vote(pts, G):
            mismatches += 1
    ok = report(2, bounded and monotone and mismatches == 0,
                f"{len(runs)} runs bounded={bounded} monotone={monotone}; "
                f"vote oracle mismatches {mismatches}/100")
    assert ok


def test_criterion_3_tsne_quality():
    purities, entropy_err, kl_ok = [], 0.0, True
    for seed in range(3):
        rng = np.random.default_rng(300 + seed)
        X, labels = test_embed.clusters(rng)
        P_cond, _ = conditional_probabilities(X, 30.0)
        entropy_err = max(entropy_err, float(np.max(np.abs(row_entropies_bits(P_cond) - math.log2(30.0)))))
        emb = tsne_embed(X, TSNEConfig(), rng)
        kl_ok &= emb.final_kl <= emb.kl_after_exaggeration
        Y = emb.points
        d = ((Y[:, None] - Y[None]) ** 2).sum(-1)
        np.fill_diagonal(d, np.inf)
        nn = np.argsort(d, axis=1)[:, :10]
        purities.append(float(((labels[nn] == labels[:, None]).sum(1) > 5).mean()))
    ok = report(3, min(purities) >= 0.95 and entropy_err <= 1e-5 and kl_ok,
                f"10-NN purity min {min(purities):.3f}; max entropy error {entropy_err:.1e} bits; "
                f"final KL <= post-exaggeration KL on all runs: {kl_ok}")
    assert ok


def test_criterion_4_dqn_correctness(cartpole_experiment):
    worst = 0.0
    for sizes in [(4, 8, 2), (4, 64, 64, 2), (25, 32, 32, 5)]:
        rng = np.random.default_rng(len(sizes))
        net = QNetwork(sizes, rng)
        batch = test_agent.random_batch(rng, 8, sizes[0], sizes[-1])
        worst = max(worst, test_agent.finite_difference_check(net, QNetwork(sizes, rng), batch, 0.99))
    base = [r for r in cartpole_experiment[2] if r.arm == "baseline"]
    learned = sum(last_mean(r.rewards) > np.mean(r.rewards[:100]) for r in base)
    ok = report(4, worst < 1e-4 and learned >= 8 and len(base) == 10,
                f"max FD relative error {worst:.1e}; learning signal in {learned}/{len(base)} baseline seeds")
    assert ok


def test_criterion_5_rrt_geometry():
    rng = np.random.default_rng(5)
    tree = RrtTree([0.0, 0.0], 0.05, [-1.0, -0.131], [1.0, 0.131])
    max_step, nn_mismatch = 0.0, 0
    for _ in range(10_000):
        c = rng.uniform(tree.low, tree.high)
        if tree.nearest(c) != test_maximizer.brute_nearest(tree.nodes, c):
            nn_mismatch += 1
        k = extend(tree, rng)
        max_step = max(max_step, float(np.linalg.norm(tree.nodes[k] - tree.nodes[tree.parents[k]])))
    inside = bool(np.all(tree.nodes >= tree.low) and np.all(tree.nodes <= tree.high))
    ok = report(5, max_step <= tree.step + 1e-9 and inside and nn_mismatch == 0,
                f"10^4 extensions: max parent distance {max_step:.6f} (step 0.05); in bounds {inside}; "
                f"nearest-neighbour mismatches {nn_mismatch}")
    assert ok


def test_criterion_6_physics():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(200):
        s = [rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-0.25, 0.25), rng.uniform(-2, 2)]
        a = int(rng.integers(2))
        nxt, _, _ = cartpole_step(CartpoleState(*s), a)
        worst = max(worst, float(np.max(np.abs(nxt.as_array() - test_cartpole.oracle_step(s, a)))))
    idm_zero = abs(idm_acceleration(30.0, 30.0))

    cfg = HighwayConfig()
    env = HighwayEnv(cfg, seed=66)
    violations, changes = [], 0

    def audit(veh, direction, state):
        nonlocal changes
        if direction == 0:
            return
        changes += 1
        follower = test_highway._brute_new_follower(veh, state.vehicles, veh.lane + direction)
        if follower is not None:
            acc = idm_acceleration(follower.v, follower.v0, veh.x - follower.x - veh.length,
                                   follower.v - veh.v, cfg.idm)
            if acc < -cfg.mobil.b_safe:
                violations.append(acc)

    env.reset()
    actions = np.random.default_rng(67)
    for _ in range(1000):
        _, terminal, truncated = highway_step(env.state, int(actions.integers(5)), cfg, decision_hook=audit)
        if terminal or truncated:
            env.reset()
    ok = report(6, worst <= 1e-6 and idm_zero <= 1e-12 and not violations and changes > 0,
                f"cartpole vs ODE oracle max error {worst:.1e}; IDM free-road accel {idm_zero:.1e}; "
                f"MOBIL b_safe violations {len(violations)} over 1000 steps ({changes} lane changes)")
    assert ok


def _csvs(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*.csv"))}


def test_criterion_7_determinism(tmp_path):
    cfg = tmp_path / "small.toml"
    cfg.write_text(_small_cartpole_config())
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["experiment", "--config", str(cfg), "--out", str(out / "exp")]) == 0
        assert main(["train", "--config", str(cfg), "--seed", "4", "--maximize", "--out", str(out / "train")]) == 0
        assert main(["apc", str(out / "train")]) == 0
        outs.append(_csvs(out))
    hw = tmp_path / "hw.toml"
    hw.write_text(_small_highway_config())
    for name in ("c", "d"):
        assert main(["train", "--config", str(hw), "--seed", "1", "--maximize", "--out", str(tmp_path / name)]) == 0
    hw_same = _csvs(tmp_path / "c") == _csvs(tmp_path / "d")
    same = outs[0] == outs[1]
    ok = report(7, same and hw_same and len(outs[0]) > 10,
                f"experiment/train/apc commands repeated: {len(outs[0])} cartpole CSVs byte-identical={same}; "
                f"highway train byte-identical={hw_same}")
    assert ok


def test_criterion_8_highway_smoke(highway_experiment):
    cfg, _, results = highway_experiment
    by_seed = {}
    for r in results:
        by_seed.setdefault(r.seed, {})[r.arm] = r.final_apc
    wins = sum(v["maximized"] >= v["baseline"] for v in by_seed.values())
    wall = sum(r.wall_time for r in results)
    detail = ", ".join(f"seed {s}: {v['baseline']:.4f} vs {v['maximized']:.4f}" for s, v in sorted(by_seed.items()))
    ok = report(8, len(by_seed) == 3 and wins >= 2 and wall < 3600,
                f"{cfg.run.episodes} episodes; final APC baseline vs maximized ({detail}); "
                f"maximized >= baseline in {wins}/3 seeds; training wall time {wall / 60:.1f} min")
    assert ok


def _small_cartpole_config():
    return """
[run]
episodes = 30
seeds = [0, 1]
[agent]
hidden = [16]
batch_size = 16
[embed]
perplexity = 10.0
iterations = 80
max_samples = 200
[coverage]
grid_cells = 25
batch_episodes = 10
"""


def _small_highway_config():
    return """
[run]
env = "highway"
episodes = 6
seeds = [0, 1]
[highway]
horizon = 10
[agent]
hidden = [16]
batch_size = 8
[embed]
perplexity = 5.0
iterations = 60
[coverage]
grid_cells = 10
batch_episodes = 3
"""
