"""newsflow: agent-based news-consumption simulator and diversity analytics."""

__version__ = "0.1.0"

from .core import RngStream, argmax_category, entropy, evaluate, normalize, simpson
from .simengine import BatchResult, RunResult, SimConfig, World, init_world, run, run_batch

__all__ = [
    "__version__",
    "RngStream",
    "argmax_category",
    "entropy",
    "evaluate",
    "normalize",
    "simpson",
    "SimConfig",
    "World",
    "RunResult",
    "BatchResult",
    "init_world",
    "run",
    "run_batch",
]
