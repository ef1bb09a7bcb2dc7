from dataclasses import dataclass

import numpy as np


class EnvError(RuntimeError):
    pass


class TerminalStateError(EnvError):
    """Raised when stepping a state that already satisfies termination."""


class InvalidInitialState(EnvError, ValueError):
    """Requested initial state violates the environment's preconditions."""


@dataclass
class StepOutcome:
    next_state: np.ndarray
    reward: float
    terminal: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated
