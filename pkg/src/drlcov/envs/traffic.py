"""Longitudinal (IDM), lane-change (MOBIL) and kinematic-bicycle models."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence


@dataclass(frozen=True)
class IDMParams:
    a_max: float = 1.5
    b_comf: float = 2.0
    delta: float = 4.0
    s0: float = 2.0
    time_headway: float = 1.5


@dataclass(frozen=True)
class MOBILParams:
    politeness: float = 0.1
    b_safe: float = 4.0
    a_threshold: float = 0.1


def idm_acceleration(v: float, v0: float, gap: float | None = None, dv: float = 0.0,
                     params: IDMParams = IDMParams()) -> float:
    """Intelligent Driver Model acceleration.

    ``gap`` is the bumper-to-bumper distance to the leader (``None`` when
    there is no leader) and ``dv`` the closing speed ``v - v_leader``.
    A non-positive gap yields ``-b_comf``.
    """
    free = params.a_max * (1.0 - (v / v0) ** params.delta)
    if gap is None:
        return free
    if gap <= 0.0:
        return -params.b_comf
    s_star = (params.s0 + v * params.time_headway
              + v * dv / (2.0 * math.sqrt(params.a_max * params.b_comf)))
    return free - params.a_max * (s_star / gap) ** 2


class Vehicle:
    """Mutable traffic participant. ``lane`` is the lane it drives in (or is
    moving into), ``y`` its actual lateral position."""

    __slots__ = ("x", "y", "v", "lane", "v0", "length", "vy")

    def __init__(self, x, y, v, lane, v0, length=5.0):
        self.x = float(x)
        self.y = float(y)
        self.v = float(v)
        self.lane = int(lane)
        self.v0 = float(v0)
        self.length = float(length)
        self.vy = 0.0

    def __repr__(self):
        return f"Vehicle(x={self.x:.2f}, y={self.y:.2f}, v={self.v:.2f}, lane={self.lane})"


def lane_neighbors(vehicles: Sequence[Vehicle], lane: int, x: float, exclude=None):
    """Closest vehicle ahead and behind position ``x`` in ``lane``."""
    leader = follower = None
    for other in vehicles:
        if other is exclude or other.lane != lane:
            continue
        if other.x >= x:
            if leader is None or other.x < leader.x:
                leader = other
        elif follower is None or other.x > follower.x:
            follower = other
    return leader, follower


def gap_between(follower: Vehicle, leader: Vehicle) -> float:
    return leader.x - follower.x - 0.5 * (leader.length + follower.length)


def follow_acceleration(follower: Vehicle, leader: Vehicle | None,
                        params: IDMParams = IDMParams()) -> float:
    if leader is None:
        return idm_acceleration(follower.v, follower.v0, None, 0.0, params)
    return idm_acceleration(follower.v, follower.v0, gap_between(follower, leader),
                            follower.v - leader.v, params)


@dataclass
class LaneChangeEvaluation:
    lane: int
    feasible: bool
    safe: bool
    incentive: float
    new_follower_accel: float | None


def evaluate_lane_change(vehicle: Vehicle, vehicles: Sequence[Vehicle], target: int,
                         lane_count: int, idm: IDMParams = IDMParams(),
                         mobil: MOBILParams = MOBILParams()) -> LaneChangeEvaluation:
    if not 0 <= target < lane_count:
        return LaneChangeEvaluation(target, False, False, -math.inf, None)
    old_leader, old_follower = lane_neighbors(vehicles, vehicle.lane, vehicle.x, exclude=vehicle)
    new_leader, new_follower = lane_neighbors(vehicles, target, vehicle.x, exclude=vehicle)
    if (new_leader is not None and gap_between(vehicle, new_leader) <= 0.0) or (
        new_follower is not None and gap_between(new_follower, vehicle) <= 0.0
    ):
        return LaneChangeEvaluation(target, False, False, -math.inf, None)

    own_before = follow_acceleration(vehicle, old_leader, idm)
    own_after = follow_acceleration(vehicle, new_leader, idm)
    gain = own_after - own_before

    new_follower_accel = None
    safe = True
    if new_follower is not None:
        before = follow_acceleration(new_follower, new_leader, idm)
        new_follower_accel = follow_acceleration(new_follower, vehicle, idm)
        safe = new_follower_accel >= -mobil.b_safe
        gain += mobil.politeness * (new_follower_accel - before)
    if old_follower is not None:
        before = follow_acceleration(old_follower, vehicle, idm)
        after = follow_acceleration(old_follower, old_leader, idm)
        gain += mobil.politeness * (after - before)
    return LaneChangeEvaluation(target, True, safe, gain, new_follower_accel)


def mobil_decide(vehicle: Vehicle, vehicles: Sequence[Vehicle], lane_count: int,
                 idm: IDMParams = IDMParams(), mobil: MOBILParams = MOBILParams()) -> int:
    """Lane-change decision: -1 (towards lane 0), 0 (stay) or +1."""
    best, best_incentive = 0, mobil.a_threshold
    for direction in (-1, 1):
        ev = evaluate_lane_change(vehicle, vehicles, vehicle.lane + direction, lane_count, idm, mobil)
        if ev.feasible and ev.safe and ev.incentive > best_incentive:
            best, best_incentive = direction, ev.incentive
    return best


class EgoPose(NamedTuple):
    x: float
    y: float
    heading: float
    speed: float


def bicycle_step(pose: EgoPose, steering: float, accel: float, dt: float,
                 wheelbase: float = 2.5, steer_limit: float = math.pi / 4) -> EgoPose:
    """Explicit-Euler kinematic bicycle (rear-axle reference point)."""
    if abs(steering) > steer_limit:
        raise ValueError(f"steering {steering} exceeds limit {steer_limit}")
    x, y, heading, v = pose
    return EgoPose(
        x + v * math.cos(heading) * dt,
        y + v * math.sin(heading) * dt,
        heading + v * math.tan(steering) / wheelbase * dt,
        v + accel * dt,
    )
