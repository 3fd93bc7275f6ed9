"""Energies, fidelities and the brute-force ground-state oracle."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import IsingProblem, SpinConfig, diagonal_energies

MAX_ENUM_N = 24
TIE_TOL = 1e-12


class CapabilityError(ValueError):
    """Requested size exceeds what exhaustive methods support."""


class InvalidTargetError(ValueError):
    pass


def _check_size(n_state: int, n: int) -> None:
    if n_state != n:
        raise ValueError(f"size mismatch: {n_state} vs problem size {n}")


def ising_energy(config: SpinConfig, problem: IsingProblem) -> float:
    _check_size(config.n, problem.n)
    s = config.signs
    return -sum(v * s[i] * s[j] for (i, j), v in problem.couplings.items())


@dataclass(frozen=True)
class GroundTruth:
    """Minimum Ising energy and every configuration attaining it."""

    energy: float
    configs: tuple[SpinConfig, ...]

    @property
    def n(self) -> int:
        return self.configs[0].n

    @property
    def indices(self) -> np.ndarray:
        return np.array([c.index() for c in self.configs], dtype=np.int64)

    def designated_target(self) -> SpinConfig:
        """Ground configuration with spin +1 on site 0 (lowest basis index)."""
        return min(self.configs, key=lambda c: c.index())

    def to_json(self) -> str:
        return json.dumps({"energy": self.energy, "configs": [list(c.signs) for c in self.configs]})

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        data = json.loads(text)
        return cls(float(data["energy"]), tuple(SpinConfig(tuple(c)) for c in data["configs"]))


def ground_states(problem: IsingProblem, diag: np.ndarray | None = None) -> GroundTruth:
    """Exhaustive search over all ``2**n`` configurations."""
    if problem.n > MAX_ENUM_N:
        raise CapabilityError(f"enumeration limited to n <= {MAX_ENUM_N}")
    if diag is None:
        diag = diagonal_energies(problem)
    emin = float(diag.min())
    idx = np.flatnonzero(diag <= emin + TIE_TOL)
    return GroundTruth(emin, tuple(SpinConfig.from_index(int(k), problem.n) for k in idx))


def cached_ground_states(problem: IsingProblem, path: str | Path) -> GroundTruth:
    """Read a GroundTruth JSON from ``path`` or compute and write it."""
    path = Path(path)
    if path.exists():
        truth = GroundTruth.from_json(path.read_text())
        if truth.n == problem.n:
            return truth
    truth = ground_states(problem)
    path.write_text(truth.to_json() + "\n")
    return truth


def energy_expectation(state: np.ndarray, problem: IsingProblem, diag: np.ndarray | None = None) -> float:
    _check_size(state.shape[0], 2**problem.n)
    if diag is None:
        diag = diagonal_energies(problem)
    return float(np.dot(np.abs(state) ** 2, diag))


def fidelity(state: np.ndarray, truth: GroundTruth, target: SpinConfig | None = None) -> float:
    """Overlap of ``state`` with the ground space, or with one ground configuration.

    ``state`` may also be a real probability vector (simulated annealing), in
    which case the ground-state probability mass is returned.
    """
    _check_size(state.shape[0], 2**truth.n)
    probs = state if np.isrealobj(state) else np.abs(state) ** 2
    if target is not None:
        if target not in truth.configs:
            raise InvalidTargetError(f"target {target} is not a ground configuration")
        return float(probs[target.index()])
    return float(np.sum(probs[truth.indices]))


def solution_success(config: SpinConfig, truth: GroundTruth) -> bool:
    """True when ``config`` or its global flip is a ground configuration."""
    _check_size(config.n, truth.n)
    return config in truth.configs or config.flipped() in truth.configs


def exact_success(config: SpinConfig, truth: GroundTruth) -> bool:
    return config in truth.configs
