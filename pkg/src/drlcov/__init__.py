"""Coverage assessment and coverage-maximizing start-state scheduling for DQN agents."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
