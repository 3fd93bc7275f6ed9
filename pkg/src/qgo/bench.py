"""Benchmark harness: baselines, success statistics, time-to-solution and
per-figure dataset generation.

Instance seeds come from a counter scheme, ``seed = master * 1_000_000 +
n * 1_000 + index``, so any subset of a suite can be regenerated alone.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .dynamics import (
    IntegratorConfig,
    collective_operators,
    evolve_ferro_symmetric,
    evolve_master_equation,
    evolve_meanfield,
    evolve_schrodinger,
    exact_cd_meanfield,
    overlap_trace,
)
from .greedy import (
    QAMeasure,
    QgoConfig,
    gradient_vector,
    optimize_bc,
    sequential_qgo,
    single_shot_qgo,
    yfield_greedy,
)
from .measures import GroundTruth, energy_expectation, exact_success, fidelity, ground_states, solution_success
from .model import IsingProblem, ScheduleParams, diagonal_energies, ferro_problem, rotated_coefficients, sk_problem

log = logging.getLogger(__name__)

QGO_METHODS = ("QGO", "single-shot-QGO", "yfield")
METHODS = QGO_METHODS + ("QA", "SA")
# desk-scale integrator for suites; greedy decisions agree with 1000 steps/tau
SUITE_STEPS_PER_TAU = 200


def instance_seed(master: int, n: int, index: int) -> int:
    return master * 1_000_000 + n * 1_000 + index


@dataclass
class BenchRecord:
    instance: int
    seed: int
    method: str
    n: int
    tau: float
    success: float
    success_kind: str
    energy: float
    qa_calls: int
    exact_success: float | None = None
    measure: str = ""
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.success <= 1.0 + 1e-9:
            raise ValueError(f"success {self.success} outside [0, 1]")
        if self.qa_calls < 0:
            raise ValueError("qa_calls must be non-negative")


RECORD_COLUMNS = ["instance", "seed", "method", "measure", "n", "tau", "success", "success_kind", "exact_success", "energy", "qa_calls"]


def run_qa(problem: IsingProblem, p: ScheduleParams, cfg: IntegratorConfig, truth: GroundTruth | None = None,
           instance: int = 0) -> BenchRecord:
    """Plain annealing (``c = 0``); success is the final ground-space probability."""
    start = time.perf_counter()
    diag = diagonal_energies(problem)
    truth = truth or ground_states(problem, diag)
    psi = evolve_schrodinger(problem, p, 0.0, cfg, diag=diag)
    return BenchRecord(instance, problem.seed or 0, "QA", problem.n, p.tau, min(1.0, fidelity(psi, truth)),
                       "probability", energy_expectation(psi, problem, diag), 1,
                       wall_time=time.perf_counter() - start)


def run_sa(problem: IsingProblem, tau: float, cfg: IntegratorConfig, truth: GroundTruth | None = None,
           instance: int = 0) -> BenchRecord:
    """Master-equation simulated annealing; success is the ground-state probability mass."""
    start = time.perf_counter()
    diag = diagonal_energies(problem)
    truth = truth or ground_states(problem, diag)
    prob = evolve_master_equation(problem, tau, cfg, diag=diag)
    return BenchRecord(instance, problem.seed or 0, "SA", problem.n, tau, min(1.0, fidelity(prob, truth)),
                       "probability", float(np.dot(prob, diag)), 0,
                       wall_time=time.perf_counter() - start)


def run_qgo(problem: IsingProblem, method: str, qcfg: QgoConfig, truth: GroundTruth | None = None,
            instance: int = 0) -> BenchRecord:
    """Run one greedy variant; success is binary (the returned configuration)."""
    from .measures import ising_energy

    start = time.perf_counter()
    truth = truth or ground_states(problem)
    if method == "QGO":
        config, trace = sequential_qgo(problem, qcfg, truth)
    elif method == "single-shot-QGO":
        config, trace = single_shot_qgo(problem, qcfg, truth)
    elif method == "yfield":
        config, trace = yfield_greedy(problem, qcfg.delta)
    else:
        raise ValueError(f"not a greedy method: {method!r}")
    return BenchRecord(instance, problem.seed or 0, method, problem.n, qcfg.tau,
                       float(solution_success(config, truth)), "binary", ising_energy(config, problem),
                       trace.qa_calls if method != "yfield" else 0,
                       exact_success=float(exact_success(config, truth)),
                       measure=qcfg.measure if method != "yfield" else "energy",
                       wall_time=time.perf_counter() - start)


def tts(p_success: float, tau: float, P: float = 0.99) -> float:
    """Time to reach success probability ``P`` by repetition: ``tau log(1-P) / log(1-p)``.

    ``p = 0`` gives ``inf``; ``p = 1`` gives ``tau`` (a single run suffices).
    """
    if not 0.0 < P < 1.0:
        raise ValueError("target probability P must lie in (0, 1)")
    if not 0.0 <= p_success <= 1.0:
        raise ValueError("p_success must lie in [0, 1]")
    if p_success == 0.0:
        return math.inf
    if p_success == 1.0:
        return float(tau)
    return tau * math.log(1.0 - P) / math.log(1.0 - p_success)


def qgo_overhead(method: str, n: int) -> int:
    if method == "QGO":
        return n * (n + 3) // 2
    if method == "single-shot-QGO":
        return n
    raise ValueError(f"no run-count overhead defined for {method!r}")


def qgo_tts_adjusted(record: BenchRecord, P: float = 0.99) -> float:
    """TTS multiplied by the number of annealing runs the greedy method spends."""
    return tts(record.success, record.tau, P) * qgo_overhead(record.method, record.n)


def bootstrap_ci(samples, resamples: int = 10_000, level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval of the mean."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    means = x[idx].mean(axis=1)
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    mean = x.mean()
    # quantile interpolation can land an ulp away from a degenerate mean
    return float(min(lo, mean)), float(max(hi, mean))


@lru_cache(maxsize=None)
def calibration(n: int, steps_per_tau: int = 1000, grid: int = 11) -> tuple[float, float]:
    """Size-dependent ``(b_opt, c_opt)`` from fidelity optimization on the ferromagnet."""
    res = optimize_bc(("ferro", n), "fidelity", grid=grid, integrator=IntegratorConfig(steps_per_tau=steps_per_tau))
    return res.b, res.c


# ---------------------------------------------------------------- suites


@dataclass
class SuiteSpec:
    figure: str
    sizes: tuple[int, ...] = (4, 6, 8, 10, 12)
    instances: int = 100
    taus: tuple[float, ...] = (1.0,)
    seed: int = 7
    steps_per_tau: int = SUITE_STEPS_PER_TAU
    resolution: int = 21
    threads: int = 1
    methods: tuple[str, ...] = ()
    calibrate: str = "ferro"


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v)) if math.isnan(v) else format(float(v), ".17g")
    if isinstance(v, (np.integer,)):
        return int(v)
    return "" if v is None else v


def _params_for(spec: SuiteSpec, n: int) -> tuple[float, float]:
    if spec.calibrate == "meanfield":
        from .greedy import B_OPT, C_OPT

        return B_OPT, C_OPT
    return calibration(n)


def _instance_task(args):
    """Every requested method on one SK instance (top level so workers can pickle it)."""
    n, index, seed, tau, methods, b, c, steps, measure = args
    problem = sk_problem(n, seed)
    integ = IntegratorConfig(steps_per_tau=steps)
    diag = diagonal_energies(problem)
    truth = ground_states(problem, diag)
    out = []
    for method in methods:
        if method == "QA":
            out.append(run_qa(problem, ScheduleParams(b=b, tau=tau), integ, truth, index))
        elif method == "SA":
            out.append(run_sa(problem, tau, integ, truth, index))
        else:
            meas = measure if method != "yfield" else "energy"
            qcfg = QgoConfig(measure=meas, b_opt=b, c_opt=c, tau=tau, integrator=integ)
            out.append(run_qgo(problem, method, qcfg, truth, index))
    return out


def run_instances(spec: SuiteSpec, methods: Iterable[str], measure: str = "energy") -> list[BenchRecord]:
    """All (size, tau, instance) combinations of ``spec`` for ``methods``; sorted by key."""
    tasks = []
    for n in spec.sizes:
        b, c = _params_for(spec, n)
        for tau in spec.taus:
            for idx in range(spec.instances):
                tasks.append((n, idx, instance_seed(spec.seed, n, idx), tau, tuple(methods), b, c, spec.steps_per_tau, measure))
    if spec.threads > 1:
        with ProcessPoolExecutor(spec.threads) as pool:
            results = list(pool.map(_instance_task, tasks, chunksize=1))
    else:
        results = [_instance_task(t) for t in tasks]
    records = [r for group in results for r in group]
    records.sort(key=lambda r: (r.n, r.tau, r.method, r.measure, r.instance))
    return records


def records_table(records: list[BenchRecord], name: str) -> Table:
    table = Table(name, RECORD_COLUMNS)
    for r in records:
        table.rows.append([getattr(r, col) for col in RECORD_COLUMNS])
    return table


SUMMARY_COLUMNS = ["n", "tau", "method", "measure", "success_kind", "instances", "mean_success", "ci_lo", "ci_hi",
                   "tts", "tts_ci_lo", "tts_ci_hi", "tts_adjusted", "tts_adjusted_ci_lo", "tts_adjusted_ci_hi", "tts_convention"]


def summarize(records: list[BenchRecord], seed: int, name: str) -> Table:
    """Mean success with bootstrap CI per (n, tau, method, measure), plus TTS columns."""
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.n, r.tau, r.method, r.measure), []).append(r)
    table = Table(name, SUMMARY_COLUMNS)
    for (n, tau, method, measure), recs in sorted(groups.items()):
        recs.sort(key=lambda r: r.instance)
        x = np.array([r.success for r in recs])
        mean = float(x.mean())
        lo, hi = bootstrap_ci(x, seed=seed)
        # TTS decreases in p, so the CI endpoints swap
        t_mid, t_lo, t_hi = tts(mean, tau), tts(hi, tau), tts(lo, tau)
        convention = "p=1->tau" if mean == 1.0 else ""
        if method in ("QGO", "single-shot-QGO"):
            k = qgo_overhead(method, n)
            adj = (t_mid * k, t_lo * k, t_hi * k)
        else:
            adj = (None, None, None)
        table.rows.append([n, tau, method, measure, recs[0].success_kind, len(recs), mean, lo, hi,
                           t_mid, t_lo, t_hi, *adj, convention])
    return table


def _suite_fig6(spec: SuiteSpec) -> list[Table]:
    methods = spec.methods or ("QGO", "QA", "SA")
    records = run_instances(spec, methods)
    return [records_table(records, "instances"), summarize(records, spec.seed, "summary")]


def _suite_fig7b(spec: SuiteSpec) -> list[Table]:
    methods = spec.methods or ("QGO", "yfield", "QA")
    records = run_instances(spec, methods)
    return [records_table(records, "instances"), summarize(records, spec.seed, "summary")]


def _suite_fig9(spec: SuiteSpec) -> list[Table]:
    records = run_instances(spec, ("single-shot-QGO",), "fidelity")
    records += run_instances(spec, ("single-shot-QGO",), "energy")
    records.sort(key=lambda r: (r.n, r.tau, r.method, r.measure, r.instance))
    return [records_table(records, "instances"), summarize(records, spec.seed, "summary")]


def _suite_fig1(spec: SuiteSpec) -> list[Table]:
    res = optimize_bc("meanfield", grid=spec.resolution, integrator=IntegratorConfig(steps_per_tau=1000))
    grid = Table("grid", ["b", "c", "magnetization"])
    for i, b in enumerate(res.grid_b):
        for j, c in enumerate(res.grid_c):
            grid.rows.append([b, c, 1.0 - res.grid_values[i, j]])
    opt = Table("optimum", ["b", "c", "magnetization", "converged"], [[res.b, res.c, 1.0 - res.residual, res.converged]])
    return [grid, opt]


def _ferro_point(n, b, c, cfg, t_final=None):
    energies = collective_operators(n)[0]
    amp = evolve_ferro_symmetric(n, 1.0, ScheduleParams(b=b), c, cfg, t_final=t_final)
    probs = np.abs(amp) ** 2
    return float(probs[0]), float(np.dot(probs, energies))


def _suite_fig2ab(spec: SuiteSpec) -> list[Table]:
    cfg = IntegratorConfig(steps_per_tau=1000)
    tables = []
    for n in spec.sizes:
        t = Table(f"n{n}", ["n", "b", "c", "fidelity", "energy"])
        for b in np.linspace(0.0, 1.0, spec.resolution):
            for c in np.linspace(1.0, 2.0, spec.resolution):
                t.rows.append([n, b, c, *_ferro_point(n, b, c, cfg)])
        tables.append(t)
    return tables


def _suite_fig2cd(spec: SuiteSpec) -> list[Table]:
    cfg = IntegratorConfig(steps_per_tau=1000)
    tables = []
    for n in spec.sizes:
        b, _ = calibration(n)
        t = Table(f"n{n}", ["n", "b", "tau_actual", "c", "fidelity", "energy"])
        for ta in np.linspace(0.5, 1.5, spec.resolution):
            for c in np.linspace(1.0, 2.0, spec.resolution):
                t.rows.append([n, b, ta, c, *_ferro_point(n, b, c, cfg, t_final=ta)])
        tables.append(t)
    return tables


def _suite_fig3(spec: SuiteSpec) -> list[Table]:
    cfg = IntegratorConfig(steps_per_tau=1000, stride=10)
    opt = Table("optimum", ["n", "measure", "b_opt", "c_opt", "residual", "magnetization_error", "converged"])
    traj = Table("magnetization", ["n", "t", "magnetization"])
    for n in spec.sizes:
        for measure in ("fidelity", "energy"):
            res = optimize_bc(("ferro", n), measure, grid=11, integrator=cfg)
            times, states = evolve_ferro_symmetric(n, 1.0, ScheduleParams(b=res.b), res.c, cfg, sample=True)
            k = np.arange(n + 1)
            mags = (np.abs(states) ** 2) @ ((n - 2 * k) / n)
            opt.rows.append([n, measure, res.b, res.c, res.residual, 1.0 - mags[-1], res.converged])
            if measure == "fidelity":
                for t, m in zip(times, mags):
                    traj.rows.append([n, t, m])
    return [opt, traj]


def _curve(f, c, site, grid):
    out = []
    for v in grid:
        probe = c.copy()
        probe[site] = v
        out.append(f(probe, count=False))
    return out


def _suite_greedy_curves(spec: SuiteSpec, problem: IsingProblem, measures) -> list[Table]:
    """Measure versus c_i for every site at each iteration of a sequential run."""
    integ = IntegratorConfig(steps_per_tau=spec.steps_per_tau)
    b, c_opt = _params_for(spec, problem.n)
    grid = np.linspace(-2.0, 2.0, spec.resolution)
    tables = []
    for measure in measures:
        qcfg = QgoConfig(measure=measure, b_opt=b, c_opt=c_opt, integrator=integ)
        _, trace = sequential_qgo(problem, qcfg)
        f = QAMeasure(problem, qcfg)
        t = Table(measure, ["measure", "iteration", "site", "role", "gradient", "c", "value"])
        c = np.zeros(problem.n)
        for rec in trace.records:
            for site in range(problem.n):
                if c[site] != 0:
                    role = "fixed"
                elif site == rec.site:
                    role = "selected"
                else:
                    role = "candidate"
                for v, val in zip(grid, _curve(f, c, site, grid)):
                    t.rows.append([measure, rec.iteration, site, role, rec.gradients[site], v, val])
            c[rec.site] = rec.sign * c_opt
        tables.append(t)
    return tables


def _suite_fig4(spec: SuiteSpec) -> list[Table]:
    return _suite_greedy_curves(spec, ferro_problem(8), ("fidelity", "energy"))


def _suite_fig5(spec: SuiteSpec) -> list[Table]:
    return _suite_greedy_curves(spec, sk_problem(8, instance_seed(spec.seed, 8, 0)), ("energy",))


def _suite_fig8(spec: SuiteSpec) -> list[Table]:
    problem = sk_problem(8, instance_seed(spec.seed, 8, 0))
    integ = IntegratorConfig(steps_per_tau=spec.steps_per_tau)
    b, c_opt = _params_for(spec, 8)
    grid = np.linspace(-2.0, 2.0, spec.resolution)
    t = Table("curves", ["panel", "measure", "site", "gradient", "c", "value"])
    for panel, measure in (("a", "fidelity"), ("b", "energy")):
        qcfg = QgoConfig(measure=measure, b_opt=b, c_opt=c_opt, integrator=integ)
        f = QAMeasure(problem, qcfg)
        base = np.zeros(8)
        base[0] = c_opt
        g, _ = gradient_vector(f, base, qcfg.delta)
        for site in range(8):
            for v, val in zip(grid, _curve(f, base, site, grid)):
                t.rows.append([panel, measure, site, g[site], v, val])
        if measure == "energy":
            config, _ = single_shot_qgo(problem, qcfg)
            fixed = np.array(config.signs, dtype=np.float64) * c_opt
            for site in range(8):
                probe = fixed.copy()
                probe[site] = 0.0
                for v, val in zip(grid, _curve(f, probe, site, grid)):
                    t.rows.append(["c", measure, site, None, v, val])
    return [t]


def _suite_fig10(spec: SuiteSpec) -> list[Table]:
    integ = IntegratorConfig(steps_per_tau=1000, stride=10)
    t = Table("overlaps", ["problem", "method", "t", "ising", "transverse", "full"])
    for label, problem in (("ferro", ferro_problem(8)), ("sk", sk_problem(8, instance_seed(spec.seed, 8, 0)))):
        b, c_opt = _params_for(spec, 8)
        config, _ = sequential_qgo(problem, QgoConfig(b_opt=b, c_opt=c_opt, integrator=IntegratorConfig(steps_per_tau=spec.steps_per_tau)))
        c = np.array(config.signs, dtype=np.float64) * c_opt
        for method, cvec in (("QGO", c), ("QA", np.zeros(8))):
            tr = overlap_trace(problem, ScheduleParams(b=b), cvec, integ)
            for row in zip(tr.times, tr.ising, tr.transverse, tr.full):
                t.rows.append([label, method, *row])
    return [t]


def coefficient_table(b: float, c: float, tau: float, a: float = 1.0, points: int = 201) -> Table:
    """``A``, ``B'`` and ``C'`` over ``[0, tau]`` in long format (t, observable, value)."""
    p = ScheduleParams(b=b, tau=tau, a=a)
    t = Table("coefficients", ["t", "observable", "value"])
    for ti in np.linspace(0.0, tau, points):
        bp, cp = rotated_coefficients(ti, p, c)
        t.rows.extend([[ti, "A", a * ti / tau], [ti, "Bprime", bp], [ti, "Cprime", cp]])
    return t


def _suite_figS1(spec: SuiteSpec) -> list[Table]:
    return [coefficient_table(0.5, 1.5, 1.0)]


def _suite_figS2(spec: SuiteSpec) -> list[Table]:
    cfg = IntegratorConfig(steps_per_tau=1000, stride=10)
    t = Table("bloch", ["b", "c", "t", "x", "y", "z"])
    for b in (0.0, 0.5, 1.0, 1.5, 2.0):
        for c in (0.1, 0.5, 1.0, 1.5, 2.0):
            tr = evolve_meanfield(b, c, cfg=cfg)
            for ti, (x, y, z) in zip(tr.times, tr.bloch):
                t.rows.append([b, c, ti, x, y, z])
    return [t]


def _suite_figS3(spec: SuiteSpec) -> list[Table]:
    from .greedy import B_OPT, C_OPT

    cfg = IntegratorConfig(steps_per_tau=1000, stride=10)
    t = Table("exact_cd", ["g", "h", "t", "cfield", "magnetization", "ground_fidelity"])
    for g, h in ((0.0, 1.0), (1.0, 0.01), (1.0, 0.1), (1.0, 0.3), (1.0, 1.0)):
        tr = exact_cd_meanfield(g, h, B_OPT, cfg=cfg)
        for row in zip(tr.times, tr.cfield, tr.magnetization, tr.ground_fidelity):
            t.rows.append([g, h, *row])
    q = Table("qgo_meanfield", ["t", "cfield", "magnetization"])
    tr = evolve_meanfield(B_OPT, C_OPT, cfg=cfg)
    for ti, m in zip(tr.times, tr.magnetization):
        q.rows.append([ti, C_OPT * math.sin(math.pi * ti) ** 2, m])
    return [t, q]


FIGURES: dict[str, Callable[[SuiteSpec], list[Table]]] = {
    "fig1": _suite_fig1,
    "fig2ab": _suite_fig2ab,
    "fig2cd": _suite_fig2cd,
    "fig3": _suite_fig3,
    "fig4": _suite_fig4,
    "figS4": _suite_fig4,
    "fig5": _suite_fig5,
    "figS5": _suite_fig5,
    "fig6a": _suite_fig6,
    "fig6b": _suite_fig6,
    "fig7b": _suite_fig7b,
    "fig8": _suite_fig8,
    "fig9": _suite_fig9,
    "fig10": _suite_fig10,
    "figS1": _suite_figS1,
    "figS2": _suite_figS2,
    "figS3": _suite_figS3,
    "custom": _suite_fig6,
}


def run_suite(spec: SuiteSpec) -> list[Table]:
    """Generate the dataset for ``spec.figure``; deterministic given the spec."""
    try:
        fn = FIGURES[spec.figure]
    except KeyError:
        raise ValueError(f"unknown figure id {spec.figure!r}; choose from {sorted(FIGURES)}") from None
    if any(n > 12 for n in spec.sizes) and spec.figure in ("fig6a", "fig6b", "fig7b", "fig9", "custom"):
        log.warning("statevector suites beyond n=12 are slow on desk hardware")
    return fn(spec)
