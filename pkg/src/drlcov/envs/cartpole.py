"""Cart-pole balancing with a settable initial state."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .base import InvalidInitialState, StepOutcome, TerminalStateError


@dataclass(frozen=True)
class CartpoleConfig:
    gravity: float = 9.8
    masscart: float = 1.0
    masspole: float = 0.1
    half_length: float = 0.5
    force_mag: float = 10.0
    dt: float = 0.02
    theta_limit_deg: float = 15.0
    x_limit: float = 2.4
    max_steps: int = 500
    init_range: float = 0.05
    integrator: str = "rk4"

    @property
    def theta_limit(self) -> float:
        return math.radians(self.theta_limit_deg)


@dataclass(frozen=True)
class CartpoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.theta, self.theta_dot])

    @classmethod
    def from_array(cls, values) -> "CartpoleState":
        x, x_dot, theta, theta_dot = (float(v) for v in values)
        return cls(x, x_dot, theta, theta_dot)


def is_terminal(state: CartpoleState, cfg: CartpoleConfig = CartpoleConfig()) -> bool:
    return abs(state.x) > cfg.x_limit or abs(state.theta) > cfg.theta_limit


def cartpole_step(state: CartpoleState, action: int, cfg: CartpoleConfig = CartpoleConfig()):
    """One integration step; returns ``(next_state, reward, terminal)``.

    ``action`` 1 pushes right, 0 pushes left. Time-limit truncation is
    tracked by :class:`CartpoleEnv`, not here.
    """
    if is_terminal(state, cfg):
        raise TerminalStateError(f"cannot step from terminal state {state}")
    if action not in (0, 1):
        raise ValueError(f"cartpole action must be 0 or 1, got {action!r}")
    force = cfg.force_mag if action == 1 else -cfg.force_mag
    nxt = CartpoleState(
        *kernels.cartpole_step(
            state.x,
            state.x_dot,
            state.theta,
            state.theta_dot,
            force,
            cfg.gravity,
            cfg.masscart,
            cfg.masspole,
            cfg.half_length,
            cfg.dt,
            cfg.integrator == "rk4",
        )
    )
    return nxt, 1.0, is_terminal(nxt, cfg)


def cartpole_reset(init, rng: np.random.Generator, cfg: CartpoleConfig = CartpoleConfig()) -> CartpoleState:
    """Explicit ``init`` is validated and returned unchanged; ``None`` samples
    every component uniformly from ``[-init_range, init_range]``."""
    if init is None:
        r = cfg.init_range
        return CartpoleState.from_array(rng.uniform(-r, r, size=4))
    state = init if isinstance(init, CartpoleState) else CartpoleState.from_array(init)
    values = state.as_array()
    if not np.all(np.isfinite(values)):
        raise InvalidInitialState(f"non-finite initial state {state}")
    if is_terminal(state, cfg):
        raise InvalidInitialState(
            f"initial state {state} outside termination bounds "
            f"(|x| <= {cfg.x_limit}, |theta| <= {cfg.theta_limit:.6f} rad)"
        )
    return state


class CartpoleEnv:
    observation_size = 4
    action_count = 2

    def __init__(self, config: CartpoleConfig | None = None, seed=None):
        self.config = config or CartpoleConfig()
        self.rng = np.random.default_rng(seed)
        self.state: CartpoleState | None = None
        self.steps = 0
        self.done = True

    def reset(self, init=None) -> np.ndarray:
        self.state = cartpole_reset(init, self.rng, self.config)
        self.steps = 0
        self.done = False
        return self.state.as_array()

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise TerminalStateError("episode finished; call reset()")
        self.state, reward, terminal = cartpole_step(self.state, int(action), self.config)
        self.steps += 1
        truncated = not terminal and self.steps >= self.config.max_steps
        self.done = terminal or truncated
        return StepOutcome(self.state.as_array(), reward, terminal, truncated)

    def validate_init(self, full_state) -> np.ndarray:
        return cartpole_reset(full_state, self.rng, self.config).as_array()
