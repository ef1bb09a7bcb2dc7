"""Initial-state scheduler for coverage maximization.

With probability ``epsilon`` a new start state is grown from an RRT in a
low-dimensional abstraction of the state (exploration); otherwise the
best-scoring start state seen so far is re-used with small Gaussian noise
(exploitation). ``epsilon`` decays geometrically once per episode.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .envs.base import InvalidInitialState
from .envs.cartpole import CartpoleConfig
from .envs.highway import HighwayConfig, default_placement

SCHEDULER_VERSION = "# drlcov scheduler-trace v1"


class CoincidentCandidate(Exception):
    """The sampled candidate equals its nearest node; draw another."""


class RrtTree:
    def __init__(self, root, step: float, low, high):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        root = np.asarray(root, dtype=np.float64)
        if root.shape != self.low.shape:
            raise ValueError("root dimension does not match bounds")
        if np.any(root < self.low) or np.any(root > self.high):
            raise ValueError(f"root {root} outside bounds")
        if step <= 0:
            raise ValueError("rrt step must be positive")
        self.step = float(step)
        self._nodes = np.zeros((64, len(root)))
        self._nodes[0] = root
        self.parents = [-1]
        self.size = 1

    @property
    def dim(self) -> int:
        return self._nodes.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes[: self.size]

    def __len__(self) -> int:
        return self.size

    def nearest(self, candidate) -> int:
        """Index of the node closest to ``candidate`` (earliest on ties)."""
        diff = self.nodes - np.asarray(candidate, dtype=np.float64)
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def append(self, node, parent: int) -> int:
        if self.size == len(self._nodes):
            grown = np.zeros((2 * len(self._nodes), self.dim))
            grown[: self.size] = self._nodes[: self.size]
            self._nodes = grown
        self._nodes[self.size] = node
        self.parents.append(int(parent))
        self.size += 1
        return self.size - 1

    def sample_candidate(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high)


def get_neighbor_node(tree: RrtTree, candidate) -> int:
    return tree.nearest(candidate)


def create_node(neighbor, candidate, step: float, low, high) -> np.ndarray:
    """Move from ``neighbor`` towards ``candidate`` by at most ``step``, then clamp."""
    neighbor = np.asarray(neighbor, dtype=np.float64)
    direction = np.asarray(candidate, dtype=np.float64) - neighbor
    dist = float(np.sqrt(np.dot(direction, direction)))
    if dist == 0.0:
        raise CoincidentCandidate()
    if dist <= step:
        node = np.asarray(candidate, dtype=np.float64).copy()
    else:
        node = neighbor + direction * (step / dist)
    return np.clip(node, low, high)


def extend(tree: RrtTree, rng: np.random.Generator, max_tries: int = 100) -> int:
    """Sample a candidate, step from its nearest node, append; returns the new index."""
    for _ in range(max_tries):
        candidate = tree.sample_candidate(rng)
        parent = get_neighbor_node(tree, candidate)
        try:
            node = create_node(tree.nodes[parent], candidate, tree.step, tree.low, tree.high)
        except CoincidentCandidate:
            continue
        return tree.append(node, parent)
    raise RuntimeError("could not draw a candidate distinct from the tree")


class AbstractionMap:
    """Projection of a full initial state onto RRT coordinates and back.

    ``lift`` fills the components the abstraction drops by the environment's
    default sampling rule.
    """

    root: np.ndarray
    low: np.ndarray
    high: np.ndarray
    full_low: np.ndarray
    full_high: np.ndarray

    def project(self, full_state) -> np.ndarray:
        raise NotImplementedError

    def lift(self, abstract, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def sigma(self) -> np.ndarray:
        return self.sigma_fraction * (self.full_high - self.full_low)

    sigma_fraction = 0.02


class CartpoleAbstraction(AbstractionMap):
    """(x, theta) of the cart-pole; velocities are re-sampled on lift."""

    def __init__(self, cfg: CartpoleConfig = CartpoleConfig(), x_bound: float = 1.0,
                 theta_scale: float = 0.5, sigma_fraction: float = 0.02):
        tb = cfg.theta_limit * theta_scale
        self.velocity_range = cfg.init_range
        self.root = np.zeros(2)
        self.low = np.array([-x_bound, -tb])
        self.high = np.array([x_bound, tb])
        v = self.velocity_range
        self.full_low = np.array([-x_bound, -v, -tb, -v])
        self.full_high = np.array([x_bound, v, tb, v])
        self.sigma_fraction = sigma_fraction

    def project(self, full_state) -> np.ndarray:
        s = np.asarray(full_state, dtype=np.float64)
        return np.array([s[0], s[2]])

    def lift(self, abstract, rng) -> np.ndarray:
        v = self.velocity_range
        x_dot, theta_dot = rng.uniform(-v, v, size=2)
        return np.array([abstract[0], x_dot, abstract[1], theta_dot])


class HighwayAbstraction(AbstractionMap):
    """(x, y) of every vehicle; speeds are re-sampled on lift.

    The full state is ``[x0, y0, ..., x_{V-1}, y_{V-1}, v0, ..., v_{V-1}]``.
    Lateral positions snap to lane centres at reset, so ``project(lift(a))``
    equals ``a`` up to that snap.
    """

    def __init__(self, cfg: HighwayConfig = HighwayConfig(), sigma_fraction: float = 0.02):
        self.cfg = cfg
        V = cfg.vehicles
        y_lo, y_hi = cfg.y_extent
        self.root = default_placement(cfg).reshape(-1)
        self.low = np.tile([cfg.spawn_x[0], y_lo], V)
        self.high = np.tile([cfg.spawn_x[1], y_hi], V)
        self.full_low = np.concatenate([self.low, [cfg.ego_speed_range[0]] + [cfg.other_speed_range[0]] * (V - 1)])
        self.full_high = np.concatenate([self.high, [cfg.ego_speed_range[1]] + [cfg.other_speed_range[1]] * (V - 1)])
        self.sigma_fraction = sigma_fraction

    def snap(self, abstract) -> np.ndarray:
        a = np.array(abstract, dtype=np.float64).reshape(-1, 2)
        a[:, 1] = [self.cfg.lane_center(self.cfg.nearest_lane(y)) for y in a[:, 1]]
        return a.reshape(-1)

    def project(self, full_state) -> np.ndarray:
        return np.asarray(full_state, dtype=np.float64)[: 2 * self.cfg.vehicles].copy()

    def lift(self, abstract, rng) -> np.ndarray:
        cfg = self.cfg
        speeds = [rng.uniform(*cfg.ego_speed_range)]
        speeds += [rng.uniform(*cfg.other_speed_range) for _ in range(cfg.vehicles - 1)]
        return np.concatenate([np.asarray(abstract, dtype=np.float64), speeds])


@dataclass
class InitStateRecord:
    record_id: int
    episode: int
    branch: str
    state: np.ndarray
    abstraction: np.ndarray
    score: float | None = None


@dataclass
class SchedulerConfig:
    epsilon: float = 1.0
    epsilon_decay: float = 0.998
    rrt_step: float = 0.05
    lift_retries: int = 50
    perturb_retries: int = 50


class CoverageScheduler:
    """Issues one initial state per episode and learns from episode scores."""

    def __init__(self, abstraction: AbstractionMap, rng: np.random.Generator,
                 config: SchedulerConfig = SchedulerConfig(), validate=None):
        if not 0.0 <= config.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.abstraction = abstraction
        self.rng = rng
        self.config = config
        self.epsilon = float(config.epsilon)
        self.epsilon_decay = float(config.epsilon_decay)
        self.tree = RrtTree(abstraction.root, config.rrt_step, abstraction.low, abstraction.high)
        self.validate = validate if validate is not None else (lambda s: np.asarray(s, dtype=np.float64))
        self.records: list[InitStateRecord] = []
        self._issued = 0
        self._best: list[int] = []
        self._best_score = -math.inf

    def _lift_valid(self, abstract) -> np.ndarray:
        for _ in range(self.config.lift_retries):
            full = self.abstraction.lift(abstract, self.rng)
            try:
                return self.validate(full)
            except InvalidInitialState:
                continue
        raise InvalidInitialState(f"no valid lift of abstraction {abstract}")

    def _issue(self, episode: int, branch: str, state) -> InitStateRecord:
        state = np.asarray(state, dtype=np.float64)
        rec = InitStateRecord(self._issued, episode, branch, state, self.abstraction.project(state))
        self._issued += 1
        self.records.append(rec)
        return rec

    def explore(self, episode: int = 0) -> InitStateRecord:
        """Grow the RRT by one node and lift it to a full initial state.

        A node whose lift can never satisfy the environment (e.g. overlapping
        vehicles) is discarded and a fresh candidate is drawn.
        """
        last_error = None
        for _ in range(self.config.lift_retries):
            candidate = self.tree.sample_candidate(self.rng)
            parent = get_neighbor_node(self.tree, candidate)
            try:
                node = create_node(self.tree.nodes[parent], candidate, self.tree.step,
                                   self.tree.low, self.tree.high)
                full = self._lift_valid(node)
            except CoincidentCandidate:
                continue
            except InvalidInitialState as err:
                last_error = err
                continue
            self.tree.append(node, parent)
            return self._issue(episode, "explore", full)
        raise InvalidInitialState(f"exploration failed repeatedly: {last_error}")

    def best_records(self) -> list[InitStateRecord]:
        return [self.records[i] for i in self._best]

    def exploit(self, episode: int = 0) -> InitStateRecord:
        """Perturb a (uniformly chosen) top-scoring start state."""
        if not self._best:
            raise LookupError("no scored initial states to exploit")
        parent = self.records[self._best[int(self.rng.integers(len(self._best)))]]
        sigma = self.abstraction.sigma
        lo, hi = self.abstraction.full_low, self.abstraction.full_high
        for _ in range(self.config.perturb_retries):
            state = np.clip(parent.state + self.rng.normal(0.0, 1.0, size=parent.state.shape) * sigma, lo, hi)
            try:
                state = self.validate(state)
            except InvalidInitialState:
                continue
            return self._issue(episode, "exploit", state)
        return self.explore(episode)

    def next_init_state(self, episode: int = 0) -> InitStateRecord:
        u = self.rng.random()
        if u <= self.epsilon or not self._best:
            rec = self.explore(episode)
        else:
            rec = self.exploit(episode)
        self.epsilon *= self.epsilon_decay
        return rec

    def record_score(self, record: InitStateRecord, score: float) -> None:
        rid = record.record_id
        if not (0 <= rid < len(self.records)) or self.records[rid] is not record:
            raise KeyError(f"record {rid} was not issued by this scheduler")
        if record.score is not None:
            raise ValueError(f"record {rid} already scored")
        score = float(score)
        if not math.isfinite(score):
            raise ValueError("episode score must be finite")
        record.score = score
        if score > self._best_score:
            self._best_score = score
            self._best = [rid]
        elif score == self._best_score:
            self._best.append(rid)

    def max_record(self) -> InitStateRecord:
        if not self._best:
            raise LookupError("no scored records")
        return self.records[self._best[0]]


def explore_init_state(sched: CoverageScheduler, episode: int = 0) -> InitStateRecord:
    return sched.explore(episode)


def exploit_init_state(sched: CoverageScheduler, episode: int = 0) -> InitStateRecord:
    return sched.exploit(episode)


def write_trace(records, path) -> None:
    dim = len(records[0].abstraction) if records else 0
    with open(path, "w", newline="") as fh:
        fh.write(SCHEDULER_VERSION + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "branch", *[f"a{k}" for k in range(dim)], "score"])
        for r in records:
            score = "" if r.score is None else repr(r.score)
            writer.writerow([r.episode, r.branch, *[repr(float(v)) for v in r.abstraction], score])


def read_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != SCHEDULER_VERSION:
            raise ValueError(f"{path}: missing scheduler-trace version line")
        rows = []
        for r in csv.DictReader(fh):
            coords = [float(v) for k, v in r.items() if k.startswith("a")]
            rows.append({
                "episode": int(r["episode"]),
                "branch": r["branch"],
                "abstraction": np.array(coords),
                "score": float(r["score"]) if r["score"] else None,
            })
        return rows
