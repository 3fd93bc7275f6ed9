"""Time evolution: statevector Schrodinger dynamics (lab and rotated frame),
mean-field qubit dynamics, exact counterdiabatic mean-field driving and the
classical master equation used for simulated annealing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from ._fallback import _apply_h
from .model import (
    IsingProblem,
    ScheduleParams,
    as_cvector,
    coefficients,
    diagonal_energies,
    rotated_coefficients,
    spin_table,
)

NORM_TOL = 1e-6


class IntegrationError(RuntimeError):
    """Raised when an evolution produces non-finite values or loses its norm."""


@dataclass(frozen=True)
class IntegratorConfig:
    """How to integrate an evolution.

    ``method`` is ``"rk4"`` (fixed step) or ``"adaptive"`` (scipy DOP853).
    The RK4 step count is ``steps`` when given, else ``ceil(steps_per_tau * duration)``.
    ``stride`` is the number of RK4 steps between recorded samples.
    """

    method: str = "rk4"
    steps_per_tau: int = 1000
    steps: int | None = None
    tol: float = 1e-10
    stride: int = 10

    def __post_init__(self) -> None:
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.steps_per_tau < 1 or self.stride < 1:
            raise ValueError("steps_per_tau and stride must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def n_steps(self, duration: float) -> int:
        if self.steps is not None:
            return self.steps
        return max(1, math.ceil(self.steps_per_tau * duration - 1e-9))


DEFAULT_CONFIG = IntegratorConfig()


def plus_state(n: int) -> np.ndarray:
    """Uniform superposition, the ground state of ``-sum_i sigma^x_i``."""
    return np.full(2**n, 2 ** (-n / 2), dtype=np.complex128)


def basis_state(index: int, n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=np.complex128)
    psi[index] = 1.0
    return psi


def _check_state(psi: np.ndarray) -> None:
    if not np.all(np.isfinite(psi)):
        raise IntegrationError("non-finite amplitudes")
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > NORM_TOL:
        raise IntegrationError(f"norm drift {drift:.3e} exceeds {NORM_TOL:g}")


@dataclass
class _Tables:
    A: np.ndarray
    bx: np.ndarray
    cy: np.ndarray
    hz: np.ndarray | None


def _lab_tables(times: np.ndarray, p: ScheduleParams, c: np.ndarray) -> _Tables:
    A, B, C = coefficients(times, p, c)
    n = c.shape[0]
    bx = np.ascontiguousarray(np.repeat(B[:, None], n, axis=1))
    return _Tables(np.ascontiguousarray(A), bx, np.ascontiguousarray(C), None)


def _eff_tables(times: np.ndarray, p: ScheduleParams, c: np.ndarray) -> _Tables:
    A = p.a * times / p.tau
    n = c.shape[0]
    bx = np.empty((times.size, n))
    hz = np.empty((times.size, n))
    for i, ci in enumerate(c):
        bx[:, i], hz[:, i] = rotated_coefficients(times, p, ci)
    return _Tables(np.ascontiguousarray(A), bx, np.zeros_like(bx), hz)


def _propagate(
    diag: np.ndarray,
    spins: np.ndarray,
    tables_fn: Callable[[np.ndarray], _Tables],
    psi0: np.ndarray,
    t_final: float,
    cfg: IntegratorConfig,
    sample: bool,
):
    psi = np.array(psi0, dtype=np.complex128, copy=True)
    if cfg.method == "adaptive":
        return _propagate_adaptive(diag, spins, tables_fn, psi, t_final, cfg, sample)
    n_steps = cfg.n_steps(t_final)
    dt = t_final / n_steps
    grid = np.arange(2 * n_steps + 1) * (0.5 * dt)
    tab = tables_fn(grid)
    times, states = [0.0], [psi.copy()] if sample else None
    stride = cfg.stride if sample else n_steps
    for k0 in range(0, n_steps, stride):
        k1 = min(k0 + stride, n_steps)
        kernels.rk4_statevector(psi, diag, spins, tab.A, tab.bx, tab.cy, tab.hz, dt, k0, k1)
        if sample:
            times.append(k1 * dt)
            states.append(psi.copy())
    _check_state(psi)
    if sample:
        return np.array(times), np.array(states)
    return psi


def _propagate_adaptive(diag, spins, tables_fn, psi, t_final, cfg, sample):
    n = spins.shape[1]
    spins_f = spins.astype(np.float64)

    def rhs(t, y):
        tab = tables_fn(np.array([t]))
        out = np.empty_like(y)
        hz = None if tab.hz is None else tab.hz[0]
        _apply_h(y, out, diag, tab.A[0], tab.bx[0], tab.cy[0], hz, spins_f, n)
        return out

    t_eval = None
    if sample:
        n_samples = max(1, cfg.n_steps(t_final) // cfg.stride)
        t_eval = np.linspace(0.0, t_final, n_samples + 1)
    sol = solve_ivp(rhs, (0.0, t_final), psi, method="DOP853", rtol=cfg.tol, atol=cfg.tol * 1e-2, t_eval=t_eval)
    if not sol.success:
        raise IntegrationError(sol.message)
    final = sol.y[:, -1]
    _check_state(final)
    if sample:
        return sol.t, sol.y.T.copy()
    return final


def evolve_schrodinger(
    problem: IsingProblem,
    p: ScheduleParams,
    c,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    t_final: float | None = None,
    sample: bool = False,
    diag: np.ndarray | None = None,
):
    """Evolve ``|+...+>`` under ``A H^z + B H^x + sum_i C_i H^y_i`` up to ``t_final``.

    ``t_final`` defaults to ``p.tau``; other values give the early/late
    termination scans.  With ``sample=True`` returns ``(times, states)``
    recorded every ``cfg.stride`` steps, otherwise the final state.
    ``diag`` may pass precomputed Ising energies to skip the enumeration.
    """
    c = as_cvector(c, problem.n)
    if diag is None:
        diag = diagonal_energies(problem)
    t_final = p.tau if t_final is None else float(t_final)
    spins = spin_table(problem.n)
    return _propagate(
        diag, spins, lambda ts: _lab_tables(ts, p, c), plus_state(problem.n), t_final, cfg, sample
    )


def evolve_effective(
    problem: IsingProblem,
    p: ScheduleParams,
    c,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    sample: bool = False,
    diag: np.ndarray | None = None,
):
    """Evolve in the z-rotated frame where the y-field is absorbed.

    The Hamiltonian is ``A H^z + sum_i C'_i sigma^z_i - sum_i B'_i sigma^x_i``
    (see :func:`~qgo.model.rotated_coefficients`).  The result is the rotated
    image ``U_g psi`` of the lab-frame state; z-basis probabilities coincide.
    """
    c = as_cvector(c, problem.n)
    if p.b <= 0 and np.any(c != 0):
        raise ValueError("rotated frame needs b > 0 (rotation angle jumps at t=0 otherwise)")
    if diag is None:
        diag = diagonal_energies(problem)
    spins = spin_table(problem.n)
    return _propagate(
        diag, spins, lambda ts: _eff_tables(ts, p, c), plus_state(problem.n), p.tau, cfg, sample
    )


def frame_rotation(t: float, p: ScheduleParams, c, n: int) -> np.ndarray:
    """Diagonal of ``U_g(t) = exp(i/2 sum_i theta_i sigma^z_i)`` in the computational basis."""
    from .model import rotation_angle

    c = as_cvector(c, n)
    theta = np.array([rotation_angle(t, p, ci) for ci in c])
    return np.exp(0.5j * (spin_table(n).astype(np.float64) @ theta))


# ---------------------------------------------------------------- mean field


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    cfield: np.ndarray | None = None
    ground_fidelity: np.ndarray | None = None

    @property
    def magnetization(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2

    @property
    def bloch(self) -> np.ndarray:
        """``(len(times), 3)`` Bloch vectors ``(<x>, <y>, <z>)``."""
        ab = np.conj(self.alpha) * self.beta
        return np.stack([2 * ab.real, 2 * ab.imag, self.magnetization], axis=1)


def meanfield_rhs(alpha: complex, beta: complex, hz: float, hx: float, cy: float) -> tuple[complex, complex]:
    """``-i H (alpha, beta)`` for ``H = -hz sigma^z - hx sigma^x - cy sigma^y``."""
    return (
        1j * hz * alpha + (1j * hx + cy) * beta,
        (1j * hx - cy) * alpha - 1j * hz * beta,
    )


def _rk4_qubit(deriv, alpha, beta, t_final, cfg, record):
    n_steps = cfg.n_steps(t_final)
    dt = t_final / n_steps
    h = 0.5 * dt
    times, alphas, betas = [0.0], [alpha], [beta]
    for k in range(n_steps):
        t = k * dt
        a1, b1 = deriv(t, alpha, beta)
        a2, b2 = deriv(t + h, alpha + h * a1, beta + h * b1)
        a3, b3 = deriv(t + h, alpha + h * a2, beta + h * b2)
        a4, b4 = deriv(t + dt, alpha + dt * a3, beta + dt * b3)
        alpha = alpha + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        beta = beta + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        if record and ((k + 1) % cfg.stride == 0 or k + 1 == n_steps):
            times.append((k + 1) * dt)
            alphas.append(alpha)
            betas.append(beta)
    if not record:
        times, alphas, betas = [t_final], [alpha], [beta]
    alpha_arr = np.array(alphas, dtype=np.complex128)
    beta_arr = np.array(betas, dtype=np.complex128)
    norm = np.abs(alpha_arr) ** 2 + np.abs(beta_arr) ** 2
    if not np.all(np.isfinite(norm)) or np.max(np.abs(norm - 1.0)) > NORM_TOL:
        raise IntegrationError("mean-field norm drift")
    return np.array(times), alpha_arr, beta_arr


def evolve_meanfield(
    b: float,
    c: float,
    tau: float = 1.0,
    g: float = 1.0,
    h: float = 0.0,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    record: bool = True,
) -> MeanFieldTrajectory:
    """Self-consistent single-qubit dynamics under
    ``H = -(t/tau)(g <sigma^z> + h) sigma^z - b(1 - t/tau) sigma^x - c sin^2(pi t/tau) sigma^y``.

    ``<sigma^z>`` is recomputed from the current amplitudes at every RK stage.
    Starts from ``alpha = beta = 1/sqrt(2)``.
    """
    if cfg.method != "rk4":
        raise ValueError("mean-field dynamics only support the rk4 method")

    def deriv(t, a, bb):
        s = t / tau
        m = (a * a.conjugate()).real - (bb * bb.conjugate()).real
        return meanfield_rhs(a, bb, s * (g * m + h), b * (1.0 - s), c * math.sin(math.pi * s) ** 2)

    r = 1.0 / math.sqrt(2.0)
    times, alpha, beta = _rk4_qubit(deriv, complex(r), complex(r), tau, cfg, record)
    return MeanFieldTrajectory(times, alpha, beta)


class FixedPointError(RuntimeError):
    pass


def _selfconsistent_m(s: float, g: float, h: float, hx: float, m0: float, max_iter: int, tol: float) -> float:
    """Ground-state magnetization solving ``m = hz / |(hx, hz)|`` with ``hz = s (g m + h)``."""
    m = m0
    for _ in range(max_iter):
        hz = s * (g * m + h)
        r = math.hypot(hz, hx)
        new = hz / r if r > 0 else m
        if abs(new - m) < tol:
            return new
        m = new
    raise FixedPointError(f"self-consistency did not converge at s={s:.6f}")


@dataclass
class _CDPoint:
    m: float
    hz: float
    hx: float
    c: float


def _cd_field(t, tau, g, h, b, m_seed, sign, max_iter, tol) -> _CDPoint:
    s = t / tau
    hx = b * (1.0 - s)
    m = _selfconsistent_m(s, g, h, hx, m_seed, max_iter, tol)
    hz = s * (g * m + h)
    r2 = hz * hz + hx * hx
    # d m*/ds by implicit differentiation of m - hz/|h| = 0
    r3 = r2 ** 1.5
    dfdm = hx * hx / r3 * s * g
    dfds = (hx * hx * (g * m + h) + hz * hx * b) / r3
    dm_ds = dfds / (1.0 - dfdm)
    dhz = ((g * m + h) + s * g * dm_ds) / tau
    dhx = -b / tau
    c = sign * (dhx * hz - hx * dhz) / (2.0 * r2)
    return _CDPoint(m, hz, hx, c)


def exact_cd_meanfield(
    g: float,
    h: float,
    b: float,
    tau: float = 1.0,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    sign: int = -1,
    max_iter: int = 100_000,
    tol: float = 1e-14,
) -> MeanFieldTrajectory:
    """Mean-field evolution driven by the two-level counterdiabatic y-field.

    The field is ``c(t) = sign * (dhx hz - hx dhz) / (2 (hz^2 + hx^2))`` with
    ``hx = b(1 - t/tau)`` and ``hz = (t/tau)(g m* + h)``, where ``m*`` is the
    self-consistent ground-state magnetization (fixed-point iteration seeded
    from the previous evaluation).  ``sign=-1`` is the branch that keeps the
    state on the instantaneous ground state for the ``H^y = -sigma^y``
    convention; ``sign=+1`` is provided for comparison.
    """
    if h == 0:
        raise ValueError("h must be non-zero for the exact counterdiabatic field")
    if cfg.method != "rk4":
        raise ValueError("exact counterdiabatic dynamics only support the rk4 method")
    seed = [0.0]

    def field_at(t):
        pt = _cd_field(t, tau, g, h, b, seed[0], sign, max_iter, tol)
        seed[0] = pt.m
        return pt

    def deriv(t, a, bb):
        pt = field_at(t)
        s = t / tau
        m = (a * a.conjugate()).real - (bb * bb.conjugate()).real
        return meanfield_rhs(a, bb, s * (g * m + h), pt.hx, pt.c)

    r = 1.0 / math.sqrt(2.0)
    times, alpha, beta = _rk4_qubit(deriv, complex(r), complex(r), tau, cfg, True)
    seed[0] = 0.0
    cs, fids = [], []
    for t, a, bb in zip(times, alpha, beta):
        pt = field_at(t)
        phi = math.atan2(pt.hx, pt.hz)
        gs = np.array([math.cos(phi / 2), math.sin(phi / 2)])
        cs.append(pt.c)
        fids.append(abs(gs[0] * a + gs[1] * bb) ** 2)
    return MeanFieldTrajectory(times, alpha, beta, np.array(cs), np.array(fids))


# ---------------------------------------------------------------- master equation


def sa_beta(t, tau: float):
    """Inverse-temperature schedule ``beta = s / (1.1 - s)``, ``s = t/tau``."""
    s = np.asarray(t, dtype=np.float64) / tau
    return s / (1.1 - s)


def flip_tables(problem: IsingProblem, diag: np.ndarray | None = None):
    """Energy change ``dE[z, i]`` and target index ``flip[z, i]`` for every single-spin flip."""
    n = problem.n
    if diag is None:
        diag = diagonal_energies(problem)
    idx = np.arange(2**n, dtype=np.int64)
    masks = (1 << np.arange(n - 1, -1, -1, dtype=np.int64))
    flip = np.ascontiguousarray(idx[:, None] ^ masks[None, :])
    dE = np.ascontiguousarray(diag[flip] - diag[:, None])
    return dE, flip


def evolve_master_equation(
    problem: IsingProblem,
    tau: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    beta_fn: Callable | None = None,
    diag: np.ndarray | None = None,
) -> np.ndarray:
    """Anneal the uniform distribution under single-spin-flip Metropolis rates.

    Each spin attempts flips at unit rate and is accepted with
    ``min(1, exp(-beta dE))``.  ``beta_fn(t)`` overrides the default schedule.
    """
    if cfg.method != "rk4":
        raise ValueError("master equation only supports the rk4 method")
    dE, flip = flip_tables(problem, diag)
    n_steps = cfg.n_steps(tau)
    dt = tau / n_steps
    grid = np.arange(2 * n_steps + 1) * (0.5 * dt)
    beta = np.ascontiguousarray(np.asarray(beta_fn(grid) if beta_fn else sa_beta(grid, tau), dtype=np.float64))
    beta = np.broadcast_to(beta, grid.shape).copy()
    prob = np.full(2**problem.n, 2.0**-problem.n)
    kernels.rk4_master(prob, dE, flip, beta, dt, 0, n_steps)
    if not np.all(np.isfinite(prob)) or prob.min() < -1e-10:
        raise IntegrationError("master equation produced negative probabilities")
    if abs(prob.sum() - 1.0) > NORM_TOL:
        raise IntegrationError("probability not conserved")
    return prob


# ---------------------------------------------------------------- dense analysis


MAX_DENSE_N = 12


def dense_hamiltonian(problem: IsingProblem, A: float, B: float, C, diag: np.ndarray | None = None) -> np.ndarray:
    """Materialized ``A H^z + B H^x + sum_i C_i H^y_i``."""
    n = problem.n
    if n > MAX_DENSE_N:
        raise ValueError(f"dense Hamiltonian limited to n <= {MAX_DENSE_N}")
    C = as_cvector(C, n)
    if diag is None:
        diag = diagonal_energies(problem)
    dim = 2**n
    H = np.diag((A * diag).astype(np.complex128))
    idx = np.arange(dim)
    for i in range(n):
        m = 1 << (n - 1 - i)
        other = idx ^ m
        up = (idx & m) == 0
        # <z|(-B sx - C sy)|z^m>: -B + iC when z has bit 0, -B - iC otherwise
        H[idx, other] += np.where(up, -B + 1j * C[i], -B - 1j * C[i])
    return H


def _ground_projector_overlap(H: np.ndarray, psi: np.ndarray, tol: float = 1e-8) -> float:
    w, v = np.linalg.eigh(H)
    deg = w <= w[0] + tol * max(1.0, abs(w[0]))
    amps = v[:, deg].conj().T @ psi
    return float(np.sum(np.abs(amps) ** 2))


@dataclass
class OverlapTrace:
    times: np.ndarray
    ising: np.ndarray
    transverse: np.ndarray
    full: np.ndarray


def overlap_trace(
    problem: IsingProblem,
    p: ScheduleParams,
    c,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> OverlapTrace:
    """Overlaps of the evolving state with the ground spaces of ``H^z``,
    ``A H^z + B H^x`` and the full Hamiltonian at the sampled times.
    """
    n = problem.n
    if n > MAX_DENSE_N:
        raise ValueError(f"overlap_trace needs dense diagonalization; n must be <= {MAX_DENSE_N}")
    c = as_cvector(c, n)
    diag = diagonal_energies(problem)
    times, states = evolve_schrodinger(problem, p, c, cfg, sample=True, diag=diag)
    emin = diag.min()
    gs_mask = diag <= emin + 1e-12
    ising, trans, full = [], [], []
    for t, psi in zip(times, states):
        A, B, C = coefficients(t, p, c)
        ising.append(float(np.sum(np.abs(psi[gs_mask]) ** 2)))
        trans.append(_ground_projector_overlap(dense_hamiltonian(problem, float(A), float(B), np.zeros(n), diag), psi))
        full.append(_ground_projector_overlap(dense_hamiltonian(problem, float(A), float(B), C, diag), psi))
    return OverlapTrace(np.asarray(times), np.array(ising), np.array(trans), np.array(full))


# ---------------------------------------------------------------- symmetric subspace


def collective_operators(n: int):
    """Ising energies and ``sum_i sigma^x_i``, ``sum_i sigma^y_i`` on the ``n + 1`` Dicke states.

    Dicke state ``k`` has ``k`` spins down; the Ising energy is for unit
    all-to-all coupling ``J_ij = 1/(n - 1)``.
    """
    k = np.arange(n + 1)
    M = n - 2 * k
    energy = -(M.astype(np.float64) ** 2 - n) / (2.0 * (n - 1))
    S = n / 2.0
    m = M / 2.0
    # <k+1| S_- |k> lowers m by one
    lower = np.sqrt(S * (S + 1) - m[:-1] * (m[:-1] - 1))
    Sm = np.zeros((n + 1, n + 1))
    Sm[k[1:], k[:-1]] = lower
    Sp = Sm.T
    X = Sp + Sm
    Y = -1j * (Sp - Sm)
    return energy, X, Y


def symmetric_plus_state(n: int) -> np.ndarray:
    from math import comb

    return np.sqrt(np.array([comb(n, k) for k in range(n + 1)], dtype=np.float64) / 2.0**n).astype(np.complex128)


def evolve_ferro_symmetric(
    n: int,
    J: float,
    p: ScheduleParams,
    c: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    t_final: float | None = None,
    sample: bool = False,
):
    """Uniform-field evolution of the all-to-all ferromagnet inside the
    permutation-symmetric subspace (dimension ``n + 1``).

    Equivalent to :func:`evolve_schrodinger` on :func:`~qgo.model.ferro_problem`
    with every ``c_i = c``; amplitudes are indexed by the number of down spins.
    """
    energy, X, Y = collective_operators(n)
    energy = J * energy
    t_final = p.tau if t_final is None else float(t_final)
    n_steps = cfg.n_steps(t_final)
    dt = t_final / n_steps
    psi = symmetric_plus_state(n)

    grid = np.arange(2 * n_steps + 1) * (0.5 * dt)
    A, B, C = coefficients(grid, p, c)
    mX = 1j * X
    mY = 1j * Y
    mE = -1j * energy

    def deriv(r, v):
        return A[r] * mE * v + B[r] * (mX @ v) + C[r] * (mY @ v)

    times, states = [0.0], [psi.copy()]
    for k in range(n_steps):
        k1 = deriv(2 * k, psi)
        k2 = deriv(2 * k + 1, psi + 0.5 * dt * k1)
        k3 = deriv(2 * k + 1, psi + 0.5 * dt * k2)
        k4 = deriv(2 * k + 2, psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if sample and ((k + 1) % cfg.stride == 0 or k + 1 == n_steps):
            times.append((k + 1) * dt)
            states.append(psi.copy())
    _check_state(psi)
    if sample:
        return np.array(times), np.array(states)
    return psi
