import math

import pytest

from drlcov.envs import IDMParams, MOBILParams, EgoPose, Vehicle, bicycle_step, idm_acceleration, mobil_decide
from drlcov.envs.traffic import evaluate_lane_change

IDM = IDMParams()


def idm_formula(v, v0, gap, dv, a=1.5, b=2.0, delta=4.0, s0=2.0, T=1.5):
    s_star = s0 + v * T + v * dv / (2.0 * math.sqrt(a * b))
    return a * (1.0 - (v / v0) ** delta - (s_star / gap) ** 2)


class TestIDM:
    def test_free_road_at_desired_speed_is_zero(self):
        assert abs(idm_acceleration(30.0, 30.0)) <= 1e-12

    def test_standstill_free_road_is_a_max(self):
        assert idm_acceleration(0.0, 30.0) == IDM.a_max

    def test_matches_direct_formula(self):
        got = idm_acceleration(20.0, 30.0, gap=30.0, dv=5.0)
        assert got == pytest.approx(idm_formula(20.0, 30.0, 30.0, 5.0), abs=1e-9)

    @pytest.mark.parametrize("gap", [0.0, -1.0])
    def test_non_positive_gap_brakes(self, gap):
        assert idm_acceleration(10.0, 30.0, gap=gap, dv=0.0) == -IDM.b_comf

    def test_follower_reaches_equilibrium_behind_constant_speed_leader(self):
        dt, v_lead = 0.05, 20.0
        x_lead, x, v = 60.0, 0.0, 25.0
        for _ in range(int(400 / dt)):
            a = idm_acceleration(v, 30.0, gap=x_lead - x - 5.0, dv=v - v_lead)
            v += a * dt
            x += v * dt
            x_lead += v_lead * dt
        a = idm_acceleration(v, 30.0, gap=x_lead - x - 5.0, dv=v - v_lead)
        assert abs(a) < 1e-3
        assert v == pytest.approx(v_lead, abs=1e-2)


def _veh(x, lane, v, v0=30.0):
    return Vehicle(x, lane * 4.0, v, lane, v0)


class TestMOBIL:
    def test_unsafe_new_follower_blocks_change(self):
        me = _veh(0.0, 0, 25.0)
        slow_leader = _veh(12.0, 0, 5.0)
        fast_follower = _veh(-6.0, 1, 30.0)
        vehicles = [me, slow_leader, fast_follower]
        ev = evaluate_lane_change(me, vehicles, 1, 2)
        assert ev.new_follower_accel < -MOBILParams().b_safe
        assert mobil_decide(me, vehicles, 2) == 0

    def test_empty_target_lane_and_blocked_lane_changes(self):
        me = _veh(0.0, 0, 20.0)
        blocker = _veh(15.0, 0, 10.0)
        vehicles = [me, blocker]
        # oracle evaluation of both accelerations
        a_stay = idm_formula(20.0, 30.0, 15.0 - 5.0, 10.0)
        a_move = 1.5 * (1 - (20.0 / 30.0) ** 4)
        assert a_move - a_stay > MOBILParams().a_threshold
        assert mobil_decide(me, vehicles, 2, mobil=MOBILParams(politeness=0.0)) == 1

    def test_identical_lanes_stay(self):
        me = _veh(0.0, 1, 20.0)
        assert mobil_decide(me, [me], 3) == 0

    def test_off_road_lane_is_infeasible(self):
        me = _veh(0.0, 0, 20.0)
        blocker = _veh(15.0, 0, 10.0)
        ev = evaluate_lane_change(me, [me, blocker], -1, 1)
        assert not ev.feasible
        assert mobil_decide(me, [me, blocker], 1) == 0


class TestBicycle:
    def test_straight_line(self):
        p = bicycle_step(EgoPose(1.0, 2.0, 0.3, 10.0), 0.0, 0.0, 0.1)
        assert p.x == pytest.approx(1.0 + 10.0 * math.cos(0.3) * 0.1, abs=1e-15)
        assert p.y == pytest.approx(2.0 + 10.0 * math.sin(0.3) * 0.1, abs=1e-15)
        assert p.heading == 0.3 and p.speed == 10.0

    def test_speed_increment_exact(self):
        p = bicycle_step(EgoPose(0, 0, 0, 12.5), 0.1, 2.0, 0.25)
        assert p.speed == 12.5 + 2.0 * 0.25

    def test_full_circle_closed_form(self):
        L, v, steer = 2.5, 10.0, 0.2
        omega = v * math.tan(steer) / L
        radius = L / math.tan(steer)
        n = 20000
        dt = 2 * math.pi / omega / n
        pose = EgoPose(0.0, 0.0, 0.0, v)
        max_err = 0.0
        for k in range(1, n + 1):
            pose = bicycle_step(pose, steer, 0.0, dt, wheelbase=L)
            if k % 1000 == 0:
                t = k * dt
                exact = (radius * math.sin(omega * t), radius * (1 - math.cos(omega * t)))
                max_err = max(max_err, math.hypot(pose.x - exact[0], pose.y - exact[1]))
        wrapped = (pose.heading + math.pi) % (2 * math.pi) - math.pi
        assert abs(wrapped) < 1e-3
        # explicit Euler drifts by O(dt); bound it relative to the radius
        assert max_err < 2e-3 * radius
        assert math.hypot(pose.x, pose.y) < 2e-3 * radius

    def test_steering_limit(self):
        with pytest.raises(ValueError):
            bicycle_step(EgoPose(0, 0, 0, 1.0), 1.0, 0.0, 0.1, steer_limit=0.5)
