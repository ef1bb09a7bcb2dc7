"""Simulators with settable initial states and a uniform reset/step API."""
from .base import EnvError, InvalidInitialState, StepOutcome, TerminalStateError
from .cartpole import CartpoleConfig, CartpoleEnv, CartpoleState, cartpole_reset, cartpole_step, is_terminal
from .highway import (
    ACTIONS,
    HighwayConfig,
    HighwayEnv,
    HighwayRewardParams,
    HighwayState,
    PlacementError,
    default_placement,
    highway_reset,
    highway_reward,
    highway_step,
    observe,
)
from .traffic import IDMParams, MOBILParams, EgoPose, Vehicle, bicycle_step, idm_acceleration, mobil_decide

__all__ = [
    "ACTIONS",
    "CartpoleConfig",
    "CartpoleEnv",
    "CartpoleState",
    "EgoPose",
    "EnvError",
    "HighwayConfig",
    "HighwayEnv",
    "HighwayRewardParams",
    "HighwayState",
    "IDMParams",
    "InvalidInitialState",
    "MOBILParams",
    "PlacementError",
    "StepOutcome",
    "TerminalStateError",
    "Vehicle",
    "bicycle_step",
    "cartpole_reset",
    "cartpole_step",
    "default_placement",
    "highway_reset",
    "highway_reward",
    "highway_step",
    "idm_acceleration",
    "is_terminal",
    "mobil_decide",
    "observe",
]
