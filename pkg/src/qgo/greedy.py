"""Greedy sign selection for the y-field coefficients.

Sequential and single-shot variants drive short annealing runs and fix one
(or all) signs from forward-difference gradients of the final-state measure.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DEFAULT_CONFIG, IntegratorConfig, evolve_schrodinger
from .measures import GroundTruth, ground_states
from .model import IsingProblem, ScheduleParams, SpinConfig, diagonal_energies

log = logging.getLogger(__name__)

ZERO_GRAD = 1e-12
# |g| values closer than this (relative) count as a tie, resolved by lowest site index
TIE_RTOL = 1e-9

# Desk-scale defaults taken from the mean-field optimum
B_OPT = 0.539
C_OPT = 1.565


class AmbiguityError(RuntimeError):
    """Every probed gradient vanishes; no sign can be preferred."""


@dataclass(frozen=True)
class QgoConfig:
    measure: str = "energy"
    delta: float = 0.1
    b_opt: float = B_OPT
    c_opt: float = C_OPT
    tau: float = 1.0
    integrator: IntegratorConfig = DEFAULT_CONFIG
    gradient: str = "forward"

    def __post_init__(self) -> None:
        if self.measure not in ("energy", "fidelity"):
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.gradient not in ("forward", "average"):
            raise ValueError(f"unknown gradient rule {self.gradient!r}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.c_opt > 0:
            raise ValueError("c_opt must be positive")

    @property
    def schedule(self) -> ScheduleParams:
        return ScheduleParams(b=self.b_opt, tau=self.tau, c_amp=self.c_opt)


class QAMeasure:
    """Measure ``f(b, c)`` of one annealing run, counting every run.

    ``energy``: final ``<H^z>``.  ``fidelity``: ``1 - |<target|psi>|^2`` with
    the target the ground configuration having spin +1 on site 0.
    """

    def __init__(self, problem: IsingProblem, cfg: QgoConfig, truth: GroundTruth | None = None):
        self.problem = problem
        self.cfg = cfg
        self.diag = diagonal_energies(problem)
        self.calls = 0
        self.truth = truth
        self.target_index = None
        if cfg.measure == "fidelity":
            if self.truth is None:
                self.truth = ground_states(problem, self.diag)
            self.target_index = self.truth.designated_target().index()

    def state(self, c, b: float | None = None, count: bool = True) -> np.ndarray:
        p = ScheduleParams(b=self.cfg.b_opt if b is None else b, tau=self.cfg.tau, c_amp=self.cfg.c_opt)
        if count:
            self.calls += 1
        return evolve_schrodinger(self.problem, p, c, self.cfg.integrator, diag=self.diag)

    def value_of(self, psi: np.ndarray) -> float:
        if self.cfg.measure == "energy":
            return float(np.dot(np.abs(psi) ** 2, self.diag))
        return 1.0 - float(abs(psi[self.target_index]) ** 2)

    def __call__(self, c, b: float | None = None, count: bool = True) -> float:
        return self.value_of(self.state(c, b, count))


def measure_value(problem: IsingProblem, b: float, c, cfg: QgoConfig) -> float:
    return QAMeasure(problem, cfg)(np.asarray(c, dtype=np.float64), b)


def gradient_vector(f, c: np.ndarray, delta: float, base: float | None = None, rule: str = "forward"):
    """Forward-difference gradient over the unfixed (zero) entries of ``c``.

    Returns ``(g, base)`` where ``g`` is NaN on fixed sites.  ``base`` is
    reused when supplied, so a sweep costs ``#unfixed + 1`` calls of ``f``.
    ``rule="average"`` averages the slope over ``[0, delta]`` from three
    points instead of the single forward difference.
    """
    c = np.asarray(c, dtype=np.float64)
    if base is None:
        base = f(c)
    g = np.full(c.shape[0], np.nan)
    for j in np.flatnonzero(c == 0):
        probe = c.copy()
        if rule == "forward":
            probe[j] = delta
            g[j] = (f(probe) - base) / delta
        else:
            probe[j] = 0.5 * delta
            mid = f(probe)
            probe[j] = delta
            end = f(probe)
            g[j] = 0.5 * ((mid - base) / (0.5 * delta) + (end - base) / delta)
    return g, base


def _select(g: np.ndarray) -> int:
    mag = np.where(np.isnan(g), -1.0, np.abs(g))
    top = mag.max()
    if not top > ZERO_GRAD:
        raise AmbiguityError("all gradients vanish; every sign choice is equivalent")
    return int(np.flatnonzero(mag >= top - TIE_RTOL * top)[0])


@dataclass
class IterationRecord:
    iteration: int
    gradients: np.ndarray
    site: int
    gradient: float
    sign: int
    measure_value: float
    qa_calls: int


@dataclass
class QgoTrace:
    records: list[IterationRecord] = field(default_factory=list)
    c_final: np.ndarray | None = None
    final_measure: float | None = None

    @property
    def qa_calls(self) -> int:
        return self.records[-1].qa_calls if self.records else 0

    def rows(self):
        for r in self.records:
            yield [r.iteration, r.site, r.gradient, r.sign, r.measure_value, r.qa_calls]


TRACE_COLUMNS = ["iteration", "site", "gradient", "sign", "measure_value", "qa_calls"]


def _signs(c: np.ndarray) -> SpinConfig:
    return SpinConfig(tuple(int(np.sign(v)) for v in c))


def sequential_qgo(problem: IsingProblem, cfg: QgoConfig, truth: GroundTruth | None = None):
    """Fix one y-field sign per iteration, always at the steepest unfixed site.

    Each iteration evaluates the measure at the current ``c`` and at one
    probe per unfixed site, then sets ``c_i = -c_opt sgn(g_i)``.  The
    measure after each assignment is the base evaluation of the next
    iteration, giving ``n (n + 3) / 2`` runs in total.  The measure after the
    final assignment is a reporting run and is not counted.
    """
    f = QAMeasure(problem, cfg, truth)
    n = problem.n
    c = np.zeros(n)
    trace = QgoTrace()
    base = None
    for it in range(n):
        g, base = gradient_vector(f, c, cfg.delta, base, cfg.gradient)
        i = _select(g)
        c[i] = -cfg.c_opt * np.sign(g[i])
        base = f(c, count=it < n - 1)
        trace.records.append(IterationRecord(it, g, i, float(g[i]), int(np.sign(c[i])), base, f.calls))
    trace.c_final = c
    trace.final_measure = base
    return _signs(c), trace


def single_shot_qgo(problem: IsingProblem, cfg: QgoConfig, truth: GroundTruth | None = None):
    """Fix ``c_0 = +c_opt`` and all remaining signs from one gradient sweep (``n`` runs)."""
    f = QAMeasure(problem, cfg, truth)
    n = problem.n
    c = np.zeros(n)
    c[0] = cfg.c_opt
    g, base = gradient_vector(f, c, cfg.delta, None, cfg.gradient)
    trace = QgoTrace()
    for j in range(1, n):
        if abs(g[j]) <= ZERO_GRAD:
            raise AmbiguityError(f"vanishing gradient on site {j}")
        c[j] = -cfg.c_opt * np.sign(g[j])
    final = f(c, count=False)
    for j in range(1, n):
        trace.records.append(IterationRecord(0, g, j, float(g[j]), int(np.sign(c[j])), final, f.calls))
    trace.c_final = c
    trace.final_measure = final
    return _signs(c), trace


# ---------------------------------------------------------------- y-field only


def rotated_product_state(theta: np.ndarray) -> np.ndarray:
    """``prod_i R_y(theta_i) |+...+>`` with ``R_y(theta) = exp(i theta sigma^y / 2)``."""
    psi = np.ones(1, dtype=np.complex128)
    r = 1.0 / math.sqrt(2.0)
    for th in theta:
        cs, sn = math.cos(th / 2), math.sin(th / 2)
        # exp(i th sy/2) = [[cos, sin], [-sin, cos]] applied to (1, 1)/sqrt 2
        site = np.array([r * (cs + sn), r * (cs - sn)], dtype=np.complex128)
        psi = np.kron(psi, site)
    return psi


def yfield_energy(problem: IsingProblem, theta, diag: np.ndarray | None = None) -> float:
    if diag is None:
        diag = diagonal_energies(problem)
    psi = rotated_product_state(np.asarray(theta, dtype=np.float64))
    return float(np.dot(np.abs(psi) ** 2, diag))


def yfield_greedy(problem: IsingProblem, delta: float = 0.1):
    """Greedy +-pi/2 assignment of single-qubit y-rotation angles.

    At ``theta = 0`` every probe leaves the energy at zero, so the first
    assignment is the symmetry-breaking ``theta_0 = +pi/2``; later steps
    follow the forward-difference gradient like the sequential variant.
    """
    diag = diagonal_energies(problem)
    n = problem.n
    calls = [0]

    def f(theta, count=True):
        calls[0] += count
        return yfield_energy(problem, theta, diag)

    theta = np.zeros(n)
    trace = QgoTrace()
    base = None
    for it in range(n):
        g, base = gradient_vector(f, theta, delta, base)
        try:
            i = _select(g)
            theta[i] = -0.5 * math.pi * np.sign(g[i])
        except AmbiguityError:
            if it > 0:
                raise
            i = 0
            theta[0] = 0.5 * math.pi
        base = f(theta, count=it < n - 1)
        trace.records.append(IterationRecord(it, g, i, float(g[i]), int(np.sign(theta[i])), base, calls[0]))
    trace.c_final = theta
    trace.final_measure = base
    return _signs(theta), trace


# ---------------------------------------------------------------- (b, c) calibration


@dataclass
class BCResult:
    b: float
    c: float
    residual: float
    converged: bool
    grid_b: np.ndarray
    grid_c: np.ndarray
    grid_values: np.ndarray


def _family_objective(family, measure: str, integrator: IntegratorConfig):
    """Return ``f(b, c)`` to minimize and a map from its value to the reported residual."""
    from .dynamics import collective_operators, evolve_ferro_symmetric, evolve_meanfield

    if family == "meanfield":

        def f(b, c):
            m = evolve_meanfield(b, c, cfg=integrator, record=False).magnetization[-1]
            return 1.0 - m

        return f, lambda v: v
    kind, n = family
    if kind != "ferro":
        raise ValueError(f"unknown problem family {family!r}")
    energies = collective_operators(n)[0]
    e_min = energies.min()

    def f(b, c):
        amp = evolve_ferro_symmetric(n, 1.0, ScheduleParams(b=b), c, integrator)
        if measure == "fidelity":
            return 1.0 - abs(amp[0]) ** 2
        return float(np.dot(np.abs(amp) ** 2, energies)) - e_min

    return f, lambda v: v


def optimize_bc(
    family="meanfield",
    measure: str = "fidelity",
    grid: int = 21,
    b_range=(0.0, 1.0),
    c_range=(1.0, 2.0),
    integrator: IntegratorConfig = DEFAULT_CONFIG,
) -> BCResult:
    """Calibrate the transverse amplitude ``b`` and y-field magnitude ``c``.

    ``family`` is ``"meanfield"`` (maximize the final magnetization) or
    ``("ferro", n)`` (minimize ``1 - P_gs`` towards all-up, or the excess
    energy, for uniform ``c``).  A ``grid x grid`` scan is refined by BFGS
    with finite-difference gradients; when BFGS fails the best grid point
    is returned with ``converged=False``.
    """
    from scipy.optimize import minimize

    if measure not in ("fidelity", "energy"):
        raise ValueError(f"unknown measure {measure!r}")
    f, _ = _family_objective(family, measure, integrator)
    gb = np.linspace(*b_range, grid)
    gc = np.linspace(*c_range, grid)
    values = np.array([[f(b, c) for c in gc] for b in gb])
    i, j = np.unravel_index(np.argmin(values), values.shape)
    x0 = np.array([gb[i], gc[j]])
    res = minimize(lambda x: f(x[0], x[1]), x0, method="BFGS", options={"gtol": 1e-9})
    best_grid = float(values[i, j])
    if res.fun <= best_grid:
        # BFGS often stops on "precision loss" at a flat optimum; accept a small gradient
        ok = bool(res.success) or float(np.linalg.norm(res.jac)) < 1e-5
        b, c, resid = float(res.x[0]), float(res.x[1]), float(res.fun)
    else:
        ok, b, c, resid = False, float(x0[0]), float(x0[1]), best_grid
    if not ok:
        log.warning("BFGS refinement did not converge (%s)", res.message)
    return BCResult(b, c, resid, ok, gb, gc, values)
