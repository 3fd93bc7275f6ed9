"""Problem instances, annealing schedules and rotated-frame coefficients.

Spin/bit convention used throughout the package: site 0 is the most
significant bit of a basis index, and bit value 0 is spin +1 (the
sigma^z = +1 eigenstate).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class IsingProblem:
    """Ising problem ``H^z = -sum_{i<j} J_ij s_i s_j``.

    Couplings are stored upper-triangular, keyed by ``(i, j)`` with ``i < j``.
    """

    n: int
    couplings: Mapping[tuple[int, int], float]
    seed: int | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"problem size must be >= 1, got {self.n}")
        clean: dict[tuple[int, int], float] = {}
        for (i, j), value in self.couplings.items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-coupling on site {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"coupling ({i}, {j}) out of range for n={self.n}")
            key = (i, j) if i < j else (j, i)
            if key in clean:
                raise ValueError(f"duplicate coupling {key}")
            clean[key] = float(value)
        object.__setattr__(self, "couplings", dict(sorted(clean.items())))

    def J(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = (i, j) if i < j else (j, i)
        return self.couplings.get(key, 0.0)

    def dense(self) -> np.ndarray:
        """Symmetric ``n x n`` coupling matrix with zero diagonal."""
        mat = np.zeros((self.n, self.n))
        for (i, j), value in self.couplings.items():
            mat[i, j] = mat[j, i] = value
        return mat

    def to_dict(self) -> dict:
        out: dict = {
            "n": self.n,
            "couplings": [[i, j, v] for (i, j), v in self.couplings.items()],
        }
        if self.seed is not None:
            out["seed"] = self.seed
        if self.label is not None:
            out["label"] = self.label
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "IsingProblem":
        couplings: dict[tuple[int, int], float] = {}
        for entry in data["couplings"]:
            i, j, value = entry
            i, j = int(i), int(j)
            key = (min(i, j), max(i, j))
            if key in couplings:
                raise ValueError(f"duplicate coupling {key}")
            couplings[(i, j)] = float(value)
        return cls(int(data["n"]), couplings, data.get("seed"), data.get("label"))


def save_problem(problem: IsingProblem, path: str | Path) -> None:
    # repr() of a float round-trips exactly, so the file is lossless
    Path(path).write_text(json.dumps(problem.to_dict(), indent=1) + "\n")


def load_problem(path: str | Path) -> IsingProblem:
    return IsingProblem.from_dict(json.loads(Path(path).read_text()))


def ferro_problem(n: int, J: float = 1.0) -> IsingProblem:
    """All-to-all ferromagnet with ``J_ij = J / (n - 1)``."""
    if n < 2:
        raise ValueError(f"ferromagnetic model needs n >= 2, got {n}")
    if J <= 0:
        raise ValueError("J must be positive")
    value = J / (n - 1)
    couplings = {(i, j): value for i in range(n) for j in range(i + 1, n)}
    return IsingProblem(n, couplings, label=f"ferro-n{n}")


def sk_problem(n: int, seed: int) -> IsingProblem:
    """Sherrington-Kirkpatrick instance with Gaussian couplings of variance 1/(n-1).

    Couplings are drawn from ``numpy.random.Generator(PCG64(seed))`` with
    ``standard_normal`` (ziggurat), in row-major order over pairs ``i < j``.
    """
    if n < 2:
        raise ValueError(f"SK model needs n >= 2, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.standard_normal(n * (n - 1) // 2) / math.sqrt(n - 1)
    pairs = ((i, j) for i in range(n) for j in range(i + 1, n))
    couplings = {pair: float(v) for pair, v in zip(pairs, draws)}
    return IsingProblem(n, couplings, seed=seed, label=f"sk-n{n}-s{seed}")


def spin_table(n: int) -> np.ndarray:
    """``(2**n, n)`` array of spins (+1/-1) for every basis index."""
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def diagonal_energies(problem: IsingProblem) -> np.ndarray:
    """Ising energy of every basis state, indexed by basis index."""
    spins = spin_table(problem.n).astype(np.float64)
    energies = np.zeros(2**problem.n)
    for (i, j), value in problem.couplings.items():
        energies -= value * spins[:, i] * spins[:, j]
    return energies


@dataclass(frozen=True)
class ScheduleParams:
    """Amplitudes of ``A(t) = a t/tau``, ``B(t) = b (1 - t/tau)`` and the y-field magnitude."""

    b: float
    tau: float = 1.0
    a: float = 1.0
    c_amp: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.b < 0 or self.c_amp < 0:
            raise ValueError("b and c_amp must be non-negative")


def as_cvector(c: Iterable[float] | float, n: int) -> np.ndarray:
    """Coerce a scalar or sequence to a length-``n`` float array of y-field coefficients."""
    arr = np.asarray(c, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"c vector has shape {arr.shape}, expected ({n},)")
    return arr


@dataclass(frozen=True)
class SpinConfig:
    signs: tuple[int, ...]

    def __post_init__(self) -> None:
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (1, -1) for s in signs):
            raise ValueError("spin entries must be +1 or -1")
        object.__setattr__(self, "signs", signs)

    @property
    def n(self) -> int:
        return len(self.signs)

    def flipped(self) -> "SpinConfig":
        return SpinConfig(tuple(-s for s in self.signs))

    def index(self) -> int:
        """Basis index of this configuration (site 0 is the most significant bit)."""
        out = 0
        for s in self.signs:
            out = (out << 1) | (0 if s == 1 else 1)
        return out

    @classmethod
    def from_index(cls, index: int, n: int) -> "SpinConfig":
        return cls(tuple(1 - 2 * ((index >> (n - 1 - k)) & 1) for k in range(n)))

    def __str__(self) -> str:
        return "".join("+" if s == 1 else "-" for s in self.signs)


def coefficients(t, p: ScheduleParams, c) -> tuple:
    """Schedule values ``(A, B, C_i)`` at time ``t``.

    ``t`` may exceed ``tau`` (over-annealing scans); the same formulas apply.
    Array-valued ``t`` broadcasts, giving ``C`` of shape ``t.shape + (n,)``.
    """
    s = np.asarray(t, dtype=np.float64) / p.tau
    c = np.asarray(c, dtype=np.float64)
    A = p.a * s
    B = p.b * (1.0 - s)
    C = np.multiply.outer(np.sin(np.pi * s) ** 2, c)
    return A, B, C


def _cprime_unit(s: np.ndarray, b: float, c: float, tau: float) -> np.ndarray:
    u = 1.0 - s
    sin1 = np.sin(np.pi * s)
    num = b * c * (np.pi * u * np.sin(2.0 * np.pi * s) + sin1**2)
    den = 2.0 * tau * (b**2 * u**2 + c**2 * sin1**4)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -num / den
    if b > 0:
        # both numerator and denominator vanish like (1 - s)^2 at s = 1
        out = np.where(np.isclose(s, 1.0, rtol=0, atol=1e-12), c * np.pi**2 / (2.0 * tau * b), out)
    else:
        out = np.where(den == 0, 0.0, out)
    return out


def rotated_coefficients(t, p: ScheduleParams, c_i: float) -> tuple:
    """Transverse amplitude ``B'`` and longitudinal field ``C'`` after the z-rotation.

    ``B' = sqrt(B^2 + C_i^2)`` and ``C' = -(1/2) d theta_i/dt``.  The 0/0 at
    ``t = tau`` is replaced by its limit ``c_i pi^2 / (2 tau b)``.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    s = t_arr / p.tau
    B = p.b * (1.0 - s)
    C = c_i * np.sin(np.pi * s) ** 2
    bprime = np.hypot(B, C)
    cprime = _cprime_unit(s, p.b, float(c_i), p.tau)
    if np.ndim(t) == 0:
        return float(bprime), float(cprime)
    return bprime, cprime


def rotation_angle(t, p: ScheduleParams, c_i: float):
    """Rotation angle ``theta_i = arctan(C_i / B)`` of the z-frame change.

    At ``t = tau`` both ``B`` and ``C_i`` vanish.  For ``b > 0`` the ratio goes
    to zero like ``1 - t/tau`` so the continuous value there is 0; for
    ``b = 0`` the angle is ``pi/2 sgn(c_i)`` at every interior time and that
    value is kept at the endpoint.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    s = t_arr / p.tau
    B = p.b * (1.0 - s)
    C = c_i * np.sin(np.pi * s) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.arctan(C / B)
    # sin^2(pi) is ~1e-32, not 0: treat t within 1e-12 of tau as the endpoint
    at_end = np.isclose(s, 1.0, rtol=0, atol=1e-12)
    degenerate = ((B == 0) & (C == 0)) | at_end
    if np.any(degenerate):
        if p.b > 0:
            fill = 0.0
        else:
            fill = math.copysign(math.pi / 2, c_i) if c_i != 0 else 0.0
        theta = np.where(degenerate, np.where(s <= 0, 0.0, fill), theta)
    if np.ndim(t) == 0:
        return float(theta)
    return theta
