import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from drlcov.envs import (
    CartpoleConfig,
    CartpoleEnv,
    CartpoleState,
    InvalidInitialState,
    TerminalStateError,
    cartpole_reset,
    cartpole_step,
    is_terminal,
)

CFG = CartpoleConfig()


def lagrangian_rhs(t, s, force, cfg=CFG):
    """Cart + uniform rod, solved from the 2x2 mass-matrix form of the
    Euler-Lagrange equations (independent of the closed-form used in the env)."""
    x, x_dot, theta, theta_dot = s
    M, m, l, g = cfg.masscart, cfg.masspole, cfg.half_length, cfg.gravity
    mass = np.array([[M + m, m * l * np.cos(theta)], [m * l * np.cos(theta), 4.0 / 3.0 * m * l * l]])
    rhs = np.array([force + m * l * theta_dot**2 * np.sin(theta), m * g * l * np.sin(theta)])
    x_acc, theta_acc = np.linalg.solve(mass, rhs)
    return [x_dot, x_acc, theta_dot, theta_acc]


def oracle_step(state, action, cfg=CFG):
    force = cfg.force_mag if action == 1 else -cfg.force_mag
    sol = solve_ivp(lagrangian_rhs, (0.0, cfg.dt), state, method="DOP853", rtol=1e-12, atol=1e-13,
                    args=(force, cfg))
    return sol.y[:, -1]


def test_push_right_from_rest_matches_ode_oracle():
    nxt, reward, terminal = cartpole_step(CartpoleState(0, 0, 0, 0), 1)
    expected = oracle_step([0.0, 0.0, 0.0, 0.0], 1)
    np.testing.assert_allclose(nxt.as_array(), expected, rtol=0, atol=1e-6)
    assert reward == 1.0 and not terminal
    assert nxt.x_dot > 0 and nxt.theta_dot < 0


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(-0.25, 0.25), st.floats(-2.0, 2.0),
    st.sampled_from([0, 1]),
)
def test_step_agrees_with_ode_oracle(x, x_dot, theta, theta_dot, action):
    nxt, _, _ = cartpole_step(CartpoleState(x, x_dot, theta, theta_dot), action)
    np.testing.assert_allclose(nxt.as_array(), oracle_step([x, x_dot, theta, theta_dot], action),
                               rtol=0, atol=1e-6)


def test_euler_integrator_is_one_explicit_step():
    cfg = CartpoleConfig(integrator="euler")
    s = np.array([0.1, -0.2, 0.05, 0.3])
    nxt, _, _ = cartpole_step(CartpoleState.from_array(s), 0, cfg)
    np.testing.assert_allclose(nxt.as_array(), s + cfg.dt * np.array(lagrangian_rhs(0, s, -10.0)),
                               rtol=0, atol=1e-12)


def test_terminal_rules_follow_15_degree_and_2_4_limits():
    assert is_terminal(CartpoleState(0, 0, math.radians(16), 0))
    assert not is_terminal(CartpoleState(0, 0, math.radians(14.9), 0))
    assert is_terminal(CartpoleState(2.5, 0, 0, 0))
    assert not is_terminal(CartpoleState(2.4, 0, 0, 0))
    # 14.9 deg falling fast crosses the limit within one step
    _, _, terminal = cartpole_step(CartpoleState(0, 0, math.radians(14.9), 2.0), 1)
    assert terminal


def test_step_on_terminal_state_raises():
    with pytest.raises(TerminalStateError):
        cartpole_step(CartpoleState(0, 0, math.radians(16), 0), 0)
    with pytest.raises(TerminalStateError):
        cartpole_step(CartpoleState(2.5, 0, 0, 0), 1)


def test_reset_explicit_and_sampled(rng):
    s = cartpole_reset((0.1, 0, 0.05, 0), rng)
    assert s == CartpoleState(0.1, 0.0, 0.05, 0.0)
    for _ in range(200):
        arr = cartpole_reset(None, rng).as_array()
        assert np.all(np.abs(arr) <= 0.05)
    with pytest.raises(InvalidInitialState):
        cartpole_reset((0, 0, 0.3, 0), rng)


def test_truncation_at_500_steps():
    env = CartpoleEnv(CartpoleConfig(gravity=0.0, force_mag=0.0), seed=0)
    env.reset((0, 0, 0, 0))
    outcomes = []
    for k in range(500):
        outcomes.append(env.step(k % 2))
    assert all(not o.done for o in outcomes[:-1])
    assert outcomes[-1].truncated and not outcomes[-1].terminal
    with pytest.raises(TerminalStateError):
        env.step(0)


def test_configurable_angle_limit():
    cfg = CartpoleConfig(theta_limit_deg=12.0)
    assert is_terminal(CartpoleState(0, 0, math.radians(13), 0), cfg)
    assert not is_terminal(CartpoleState(0, 0, math.radians(13), 0))


def test_determinism_same_seed_same_actions():
    def trajectory(seed):
        env = CartpoleEnv(seed=seed)
        obs = [env.reset()]
        actions = np.random.default_rng(seed + 1).integers(0, 2, size=500)
        for a in actions:
            out = env.step(int(a))
            obs.append(out.next_state)
            if out.done:
                break
        return np.array(obs)

    a, b = trajectory(3), trajectory(3)
    assert a.tobytes() == b.tobytes()
