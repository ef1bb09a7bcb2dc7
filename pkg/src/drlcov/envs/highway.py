"""Simplified multi-lane highway with an ego vehicle and IDM/MOBIL traffic.

The ego vehicle follows target-lane / target-speed controllers that feed a
kinematic bicycle model; the other vehicles use IDM longitudinally and
take MOBIL lane-change decisions once per policy step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import InvalidInitialState, StepOutcome, TerminalStateError
from .traffic import (
    EgoPose,
    IDMParams,
    MOBILParams,
    Vehicle,
    bicycle_step,
    follow_acceleration,
    lane_neighbors,
    mobil_decide,
)

ACTIONS = ("left-lane", "idle", "right-lane", "faster", "slower")
LANE_LEFT, IDLE, LANE_RIGHT, FASTER, SLOWER = range(5)
FEATURES = ("presence", "x", "y", "vx", "vy")


class PlacementError(InvalidInitialState):
    def __init__(self, i: int, j: int, gap: float, minimum: float):
        super().__init__(
            f"vehicles {i} and {j} share a lane with gap {gap:.3f} m < minimum spacing {minimum} m"
        )
        self.pair = (i, j)


@dataclass(frozen=True)
class HighwayRewardParams:
    a: float = 0.4
    b: float = 1.0
    v_min: float = 20.0
    v_max: float = 30.0

    def __post_init__(self):
        if not self.v_max > self.v_min:
            raise ValueError("v_max must exceed v_min")
        if self.a < 0 or self.b < 0:
            raise ValueError("reward coefficients must be non-negative")


def highway_reward(speed: float, collision: bool, params: HighwayRewardParams = HighwayRewardParams()) -> float:
    """Velocity term minus collision penalty; always within [-b, a]."""
    v = min(max(speed, params.v_min), params.v_max)
    return params.a * (v - params.v_min) / (params.v_max - params.v_min) - params.b * float(collision)


@dataclass(frozen=True)
class HighwayConfig:
    lanes: int = 4
    lane_width: float = 4.0
    vehicles: int = 5
    reward: HighwayRewardParams = HighwayRewardParams()
    horizon: int = 40
    policy_hz: float = 1.0
    substeps: int = 15
    vehicle_length: float = 5.0
    vehicle_width: float = 2.0
    wheelbase: float = 2.5
    steer_limit: float = math.pi / 4
    min_spacing: float = 10.0
    spawn_x: tuple = (-30.0, 120.0)
    ego_speed_range: tuple = (20.0, 25.0)
    other_speed_range: tuple = (20.0, 25.0)
    other_v0_range: tuple = (21.0, 26.0)
    target_speeds: tuple = (20.0, 25.0, 30.0)
    kp_speed: float = 1.0 / 0.6
    kp_lateral: float = 1.0 / 0.6
    kp_heading: float = 1.0 / 0.2
    max_accel: float = 5.0
    max_brake: float = 6.0
    other_lateral_speed: float = 2.0
    obs_x_range: float = 150.0
    idm: IDMParams = IDMParams()
    mobil: MOBILParams = MOBILParams()

    @property
    def v_min(self) -> float:
        return self.reward.v_min

    @property
    def v_max(self) -> float:
        return self.reward.v_max

    @property
    def dt(self) -> float:
        return 1.0 / (self.policy_hz * self.substeps)

    def lane_center(self, lane: int) -> float:
        return lane * self.lane_width

    def nearest_lane(self, y: float) -> int:
        return int(min(max(round(y / self.lane_width), 0), self.lanes - 1))

    @property
    def y_extent(self) -> tuple:
        return (0.0, (self.lanes - 1) * self.lane_width)


@dataclass
class HighwayState:
    vehicles: list  # index 0 is the ego vehicle
    ego_heading: float = 0.0
    target_lane: int = 0
    target_speed: float = 25.0
    steps: int = 0
    crashed: bool = False
    initial: np.ndarray = field(default=None, repr=False)

    @property
    def ego(self) -> Vehicle:
        return self.vehicles[0]

    @property
    def lanes(self) -> list:
        return [veh.lane for veh in self.vehicles]


def default_placement(cfg: HighwayConfig = HighwayConfig()) -> np.ndarray:
    """Deterministic reference layout ``[(x, y), ...]``; root of the RRT."""
    lane_cycle = [1, 0, 2, 3]
    rows = [(0.0, cfg.lane_center(min(1, cfg.lanes - 1)))]
    for k in range(1, cfg.vehicles):
        lane = lane_cycle[k % len(lane_cycle)] % cfg.lanes
        rows.append((25.0 * k, cfg.lane_center(lane)))
    return np.array(rows, dtype=float)


def check_spacing(xs, lanes, minimum: float) -> None:
    n = len(xs)
    for i in range(n):
        for j in range(i + 1, n):
            if lanes[i] == lanes[j] and abs(xs[i] - xs[j]) < minimum:
                raise PlacementError(i, j, abs(xs[i] - xs[j]), minimum)


def highway_reset(placements, rng: np.random.Generator, cfg: HighwayConfig = HighwayConfig(),
                  speeds=None) -> HighwayState:
    """Place vehicles at ``placements`` (V rows of ``(x, y)``, ego first) or,
    when ``None``, sample a collision-free layout. Lateral positions are
    snapped to the nearest lane centre."""
    V = cfg.vehicles
    if placements is None:
        xs, lanes = _sample_layout(rng, cfg)
    else:
        arr = np.asarray(placements, dtype=float)
        if arr.shape != (V, 2) or not np.all(np.isfinite(arr)):
            raise InvalidInitialState(f"expected {V} finite (x, y) placements, got shape {arr.shape}")
        xs = [float(x) for x in arr[:, 0]]
        lanes = [cfg.nearest_lane(y) for y in arr[:, 1]]
        check_spacing(xs, lanes, cfg.min_spacing)
    if speeds is None:
        speeds = [rng.uniform(*cfg.ego_speed_range)]
        speeds += [rng.uniform(*cfg.other_speed_range) for _ in range(V - 1)]
    speeds = [float(s) for s in speeds]
    if len(speeds) != V:
        raise InvalidInitialState(f"expected {V} speeds, got {len(speeds)}")
    speeds[0] = min(max(speeds[0], cfg.v_min), cfg.v_max)
    vehicles = [Vehicle(xs[0], cfg.lane_center(lanes[0]), speeds[0], lanes[0], cfg.v_max, cfg.vehicle_length)]
    for k in range(1, V):
        v0 = rng.uniform(*cfg.other_v0_range)
        vehicles.append(Vehicle(xs[k], cfg.lane_center(lanes[k]), max(speeds[k], 0.0), lanes[k], v0,
                                cfg.vehicle_length))
    target_speed = min(cfg.target_speeds, key=lambda s: abs(s - speeds[0]))
    initial = np.array([c for veh in vehicles for c in (veh.x, veh.y)] + [veh.v for veh in vehicles])
    return HighwayState(vehicles, 0.0, lanes[0], target_speed, initial=initial)


def _sample_layout(rng, cfg: HighwayConfig, max_tries: int = 200):
    xs = [0.0]
    lanes = [int(rng.integers(cfg.lanes))]
    for k in range(1, cfg.vehicles):
        for _ in range(max_tries):
            lane = int(rng.integers(cfg.lanes))
            x = float(rng.uniform(*cfg.spawn_x))
            if all(lanes[j] != lane or abs(xs[j] - x) >= cfg.min_spacing for j in range(k)):
                xs.append(x)
                lanes.append(lane)
                break
        else:
            raise InvalidInitialState(f"could not place vehicle {k} after {max_tries} tries")
    return xs, lanes


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def ego_controls(state: HighwayState, cfg: HighwayConfig):
    """Steering and acceleration commands from the target speed/lane."""
    ego = state.ego
    v = max(ego.v, 1e-3)
    accel = cfg.kp_speed * (state.target_speed - ego.v)
    accel = min(max(accel, -cfg.max_brake), cfg.max_accel)
    lateral_error = cfg.lane_center(state.target_lane) - ego.y
    lateral_speed = cfg.kp_lateral * lateral_error
    heading_ref = math.asin(min(max(lateral_speed / v, -1.0), 1.0))
    heading_ref = min(max(heading_ref, -math.pi / 4), math.pi / 4)
    heading_rate = cfg.kp_heading * _wrap(heading_ref - state.ego_heading)
    steering = math.atan(heading_rate * cfg.wheelbase / v)
    steering = min(max(steering, -cfg.steer_limit), cfg.steer_limit)
    return steering, accel


def collided(state: HighwayState, cfg: HighwayConfig) -> bool:
    ego = state.ego
    for other in state.vehicles[1:]:
        if abs(other.x - ego.x) < cfg.vehicle_length and abs(other.y - ego.y) < cfg.vehicle_width:
            return True
    return False


def _apply_action(state: HighwayState, action: int, cfg: HighwayConfig) -> None:
    if action == LANE_LEFT:
        state.target_lane = max(state.target_lane - 1, 0)
    elif action == LANE_RIGHT:
        state.target_lane = min(state.target_lane + 1, cfg.lanes - 1)
    elif action in (FASTER, SLOWER):
        speeds = cfg.target_speeds
        idx = min(range(len(speeds)), key=lambda k: abs(speeds[k] - state.target_speed))
        idx = min(idx + 1, len(speeds) - 1) if action == FASTER else max(idx - 1, 0)
        state.target_speed = speeds[idx]
    elif action != IDLE:
        raise ValueError(f"unknown highway action {action!r}")


def _substep(state: HighwayState, cfg: HighwayConfig, dt: float) -> None:
    vehicles = state.vehicles
    ego = state.ego
    accels = []
    for veh in vehicles[1:]:
        leader, _ = lane_neighbors(vehicles, veh.lane, veh.x, exclude=veh)
        a = follow_acceleration(veh, leader, cfg.idm)
        accels.append(min(max(a, -cfg.max_brake), cfg.idm.a_max))

    steering, accel = ego_controls(state, cfg)
    pose = bicycle_step(EgoPose(ego.x, ego.y, state.ego_heading, ego.v), steering, accel, dt,
                        cfg.wheelbase, cfg.steer_limit)
    ego.vy = (pose.y - ego.y) / dt
    ego.x, ego.y, state.ego_heading = pose.x, pose.y, pose.heading
    ego.v = min(max(pose.speed, cfg.v_min), cfg.v_max)
    ego.lane = cfg.nearest_lane(ego.y)

    for veh, a in zip(vehicles[1:], accels):
        veh.v = max(veh.v + a * dt, 0.0)
        veh.x += veh.v * dt
        err = cfg.lane_center(veh.lane) - veh.y
        veh.vy = min(max(cfg.kp_lateral * err, -cfg.other_lateral_speed), cfg.other_lateral_speed)
        veh.y += veh.vy * dt


def highway_step(state: HighwayState, action: int, cfg: HighwayConfig = HighwayConfig(),
                 decision_hook=None):
    """Advance one policy step in place; returns ``(reward, terminal, truncated)``.

    ``decision_hook(vehicle, direction, state)`` is called after every MOBIL
    decision (used by tests to audit safety).
    """
    if state.crashed or state.steps >= cfg.horizon:
        raise TerminalStateError("highway episode already finished")
    _apply_action(state, int(action), cfg)
    for veh in state.vehicles[1:]:
        if abs(veh.y - cfg.lane_center(veh.lane)) > 0.1:
            continue  # still completing a previous lane change
        direction = mobil_decide(veh, state.vehicles, cfg.lanes, cfg.idm, cfg.mobil)
        if decision_hook is not None:
            decision_hook(veh, direction, state)
        veh.lane += direction
    dt = cfg.dt
    crashed = False
    for _ in range(cfg.substeps):
        _substep(state, cfg, dt)
        if collided(state, cfg):
            crashed = True
            break
    state.steps += 1
    state.crashed = crashed
    reward = highway_reward(state.ego.v, crashed, cfg.reward)
    truncated = not crashed and state.steps >= cfg.horizon
    return reward, crashed, truncated


def observe(state: HighwayState, cfg: HighwayConfig = HighwayConfig(), normalize: bool = True) -> np.ndarray:
    """Flattened V x 5 kinematics observation (ego row first, others by distance).

    Other vehicles are relative to the ego; with ``normalize`` each feature is
    scaled into [-1, 1].
    """
    ego = state.ego
    evx = ego.v * math.cos(state.ego_heading)
    evy = ego.v * math.sin(state.ego_heading)
    rows = np.zeros((cfg.vehicles, 5))
    rows[0] = (1.0, 0.0, ego.y, evx, evy)
    others = sorted(state.vehicles[1:], key=lambda veh: abs(veh.x - ego.x))
    k = 1
    for veh in others:
        dx = veh.x - ego.x
        if abs(dx) > cfg.obs_x_range:
            continue
        rows[k] = (1.0, dx, veh.y - ego.y, veh.v - evx, veh.vy - evy)
        k += 1
    if normalize:
        scale = np.array([1.0, cfg.obs_x_range, cfg.lanes * cfg.lane_width, 2 * cfg.v_max, 2 * cfg.v_max])
        rows = np.clip(rows / scale, -1.0, 1.0)
    return rows.reshape(-1)


class HighwayEnv:
    action_count = len(ACTIONS)

    def __init__(self, config: HighwayConfig | None = None, seed=None, normalize: bool = True):
        self.config = config or HighwayConfig()
        self.rng = np.random.default_rng(seed)
        self.normalize = normalize
        self.state: HighwayState | None = None
        self.observation_size = self.config.vehicles * len(FEATURES)

    def _split(self, full_state):
        V = self.config.vehicles
        arr = np.asarray(full_state, dtype=float)
        if arr.shape != (3 * V,):
            raise InvalidInitialState(f"highway initial state must have {3 * V} values, got {arr.shape}")
        return arr[: 2 * V].reshape(V, 2), arr[2 * V :]

    def reset(self, init=None) -> np.ndarray:
        if init is None:
            self.state = highway_reset(None, self.rng, self.config)
        else:
            placements, speeds = self._split(init)
            self.state = highway_reset(placements, self.rng, self.config, speeds=speeds)
        return observe(self.state, self.config, self.normalize)

    def step(self, action: int) -> StepOutcome:
        if self.state is None:
            raise TerminalStateError("call reset() first")
        reward, terminal, truncated = highway_step(self.state, action, self.config)
        return StepOutcome(observe(self.state, self.config, self.normalize), reward, terminal, truncated)

    def validate_init(self, full_state) -> np.ndarray:
        placements, speeds = self._split(full_state)
        lanes = [self.config.nearest_lane(y) for y in placements[:, 1]]
        check_spacing(list(placements[:, 0]), lanes, self.config.min_spacing)
        return np.asarray(full_state, dtype=float)
