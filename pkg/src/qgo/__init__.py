"""Quantum greedy optimization of y-field signs in diabatic quantum annealing."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .greedy import QgoConfig, sequential_qgo, single_shot_qgo, yfield_greedy, optimize_bc
from .model import IsingProblem, ScheduleParams, SpinConfig, ferro_problem, sk_problem

__all__ = [
    "IsingProblem", "ScheduleParams", "SpinConfig", "ferro_problem", "sk_problem",
    "QgoConfig", "sequential_qgo", "single_shot_qgo", "yfield_greedy", "optimize_bc",
]
