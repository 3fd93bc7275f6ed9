"""Command-line entry point: ``qgo gen|run|scan|bench|trace|meanfield``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    FIGURES,
    SUITE_STEPS_PER_TAU,
    SuiteSpec,
    Table,
    coefficient_table,
    run_qa,
    run_sa,
    run_suite,
)
from .dynamics import (
    FixedPointError,
    IntegrationError,
    IntegratorConfig,
    evolve_meanfield,
    exact_cd_meanfield,
    overlap_trace,
)
from .greedy import B_OPT, C_OPT, TRACE_COLUMNS, AmbiguityError, QgoConfig, optimize_bc
from .measures import CapabilityError, cached_ground_states, ground_states
from .model import IsingProblem, ScheduleParams, ferro_problem, load_problem, save_problem, sk_problem

log = logging.getLogger("qgo")

NUMERICAL_ERRORS = (IntegrationError, FixedPointError, AmbiguityError, FloatingPointError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; usage errors here are 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    start: str = ""
    end: str = ""
    timings: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def write(self, path: Path) -> Path:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _int_range(text: str) -> tuple[int, ...]:
    """``4:12:2`` (inclusive), ``4,6,8`` or ``8``."""
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step <= 0:
                raise ValueError
            return tuple(range(start, stop + 1, step))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _integrator(args, default_steps: int = 1000) -> IntegratorConfig:
    steps = args.steps if args.steps is not None else default_steps
    return IntegratorConfig(method=args.method, steps_per_tau=steps, tol=args.tol)


def _add_integrator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("integrator")
    g.add_argument("--steps", type=int, default=None, help="RK4 steps per unit tau")
    g.add_argument("--tol", type=float, default=1e-10, help="tolerance for --method adaptive")
    g.add_argument("--method", choices=("rk4", "adaptive"), default="rk4")


def _emit(table: Table, out: Path | None, stem: str | None = None) -> str | None:
    text = table.to_csv()
    if out is None:
        sys.stdout.write(text)
        return None
    if out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        return str(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem or table.name}.csv"
    path.write_text(text)
    return str(path)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qgo", description="Quantum greedy optimization for diabatic annealing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of defaults (flags take precedence)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate an Ising instance")
    p.add_argument("--model", choices=("sk", "ferro"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--J", type=float, default=1.0, help="ferromagnet total coupling scale")
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="single QGO / QA / SA run on one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=("sequential", "single-shot", "yfield", "qa", "sa"), default="sequential")
    p.add_argument("--measure", choices=("energy", "fidelity"), default="energy")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--b", type=float, default=B_OPT)
    p.add_argument("--c", type=float, default=C_OPT)
    p.add_argument("--gradient", choices=("forward", "average"), default="forward")
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.add_argument("--cache-gs", help="ground-truth JSON cache file")
    _add_integrator_flags(p)

    p = sub.add_parser("scan", help="(b, c) grids and optimizations")
    p.add_argument("--figure", choices=("fig1", "fig2ab", "fig2cd", "fig3"), default="fig2ab")
    p.add_argument("--sizes", type=_int_range, default=(8,))
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="benchmark suites")
    p.add_argument("--figure", choices=sorted(FIGURES), required=True)
    p.add_argument("--sizes", type=_int_range, default=None)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--tau", type=_float_list, default=(1.0,), help="comma-separated list")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--methods", default=None, help="comma-separated subset of QGO,single-shot-QGO,yfield,QA,SA")
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--threads", type=int, default=None, help="worker processes (env QGO_THREADS; default: all cores)")
    p.add_argument("--allow-large", action="store_true", help="permit sizes above 12")
    p.add_argument("--out", required=True)
    _add_integrator_flags(p)

    p = sub.add_parser("trace", help="coefficient or overlap traces")
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--coeffs", action="store_true", help="A, B', C' over [0, tau]")
    kind.add_argument("--overlaps", action="store_true", help="ground-space overlaps along a run")
    p.add_argument("--instance")
    p.add_argument("--b", type=float, default=B_OPT)
    p.add_argument("--c", type=float, default=C_OPT)
    p.add_argument("--signs", help="comma-separated +1/-1 per site (default all +1); 0 for plain QA")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out")
    _add_integrator_flags(p)

    p = sub.add_parser("meanfield", help="single-spin mean-field dynamics")
    p.add_argument("--b", type=float, default=B_OPT)
    p.add_argument("--c", type=float, default=C_OPT)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--exact-cd", action="store_true", help="self-consistent counterdiabatic field instead of sin^2")
    p.add_argument("--optimize", action="store_true", help="optimize (b, c) for the final magnetization")
    p.add_argument("--out")
    _add_integrator_flags(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv, config: dict) -> argparse.Namespace:
    """Re-parse with config-file values as defaults so flags still win."""
    args = parser.parse_args(argv)
    section = {**config.get("defaults", {}), **config.get(args.command, {})}
    if not section:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(section) - known
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    sub.set_defaults(**section)
    return parser.parse_args(argv)


# ---------------------------------------------------------------- commands


def cmd_gen(args, manifest: RunManifest) -> int:
    if args.model == "sk":
        problem = sk_problem(args.n, args.seed)
    else:
        problem = ferro_problem(args.n, args.J)
    save_problem(problem, args.out)
    print(f"wrote {args.model} instance n={args.n} to {args.out}")
    return 0


def _load_instance(path: str) -> IsingProblem:
    try:
        return load_problem(path)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot load instance {path}: {exc}") from None


def cmd_run(args, manifest: RunManifest) -> int:
    problem = _load_instance(args.instance)
    manifest.inputs[args.instance] = _sha256(args.instance)
    truth = cached_ground_states(problem, args.cache_gs) if args.cache_gs else ground_states(problem)
    integ = _integrator(args)
    if args.mode == "qa":
        rec = run_qa(problem, ScheduleParams(b=args.b, tau=args.tau), integ, truth)
        print(f"QA success={rec.success:.10g} energy={rec.energy:.10g} qa_calls=1")
        return 0
    if args.mode == "sa":
        rec = run_sa(problem, args.tau, integ, truth)
        print(f"SA success={rec.success:.10g} energy={rec.energy:.10g}")
        return 0
    qcfg = QgoConfig(measure=args.measure, delta=args.delta, b_opt=args.b, c_opt=args.c, tau=args.tau,
                     integrator=integ, gradient=args.gradient)
    from .greedy import sequential_qgo, single_shot_qgo, yfield_greedy
    from .measures import ising_energy, solution_success

    if args.mode == "sequential":
        config, trace = sequential_qgo(problem, qcfg, truth)
    elif args.mode == "single-shot":
        config, trace = single_shot_qgo(problem, qcfg, truth)
    else:
        config, trace = yfield_greedy(problem, args.delta)
    print(f"config={config} energy={ising_energy(config, problem):.10g} qa_calls={trace.qa_calls} "
          f"success={int(solution_success(config, truth))} ground_energy={truth.energy:.10g}")
    if args.trace:
        table = Table("trace", TRACE_COLUMNS, [list(r) for r in trace.rows()])
        manifest.outputs.append(_emit(table, Path(args.trace)))
    return 0


def cmd_scan(args, manifest: RunManifest) -> int:
    spec = SuiteSpec(args.figure, sizes=args.sizes, resolution=args.resolution)
    return _write_suite(spec, Path(args.out), manifest)


def _write_suite(spec: SuiteSpec, out: Path, manifest: RunManifest) -> int:
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    tables = run_suite(spec)
    manifest.timings["suite_seconds"] = time.perf_counter() - start
    for table in tables:
        manifest.outputs.append(_emit(table, out, f"{spec.figure}_{table.name}"))
    manifest.config["suite"] = asdict(spec)
    print(f"wrote {len(tables)} table(s) for {spec.figure} to {out}")
    return 0


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("QGO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"QGO_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


DEFAULT_SIZES = {
    "fig6a": (4, 6, 8, 10, 12), "fig6b": (8,), "fig7b": (4, 6, 8, 10, 12), "fig9": (4, 6, 8, 10, 12),
    "custom": (8,), "fig2ab": (8,), "fig2cd": (8,), "fig3": (8, 10, 12),
}


def cmd_bench(args, manifest: RunManifest) -> int:
    sizes = args.sizes or DEFAULT_SIZES.get(args.figure, (8,))
    if any(n > 12 for n in sizes) and not args.allow_large:
        raise UsageError("sizes above 12 need --allow-large (runtime grows as 2^n)")
    taus = args.tau
    if args.figure == "fig6b" and args.tau == (1.0,):
        taus = (0.5, 1.0, 2.0, 4.0, 8.0)
    methods = tuple(m.strip() for m in args.methods.split(",")) if args.methods else ()
    from .bench import METHODS

    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {list(METHODS)}")
    threads = _threads(args)
    manifest.environment["threads"] = threads
    spec = SuiteSpec(args.figure, sizes=sizes, instances=args.instances, taus=taus, seed=args.seed,
                     steps_per_tau=args.steps or SUITE_STEPS_PER_TAU, resolution=args.resolution,
                     threads=threads, methods=methods)
    return _write_suite(spec, Path(args.out), manifest)


def _sign_vector(text: str | None, n: int) -> np.ndarray:
    if text is None:
        return np.ones(n)
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"bad --signs {text!r}") from None
    if v.size == 1:
        v = np.full(n, v[0])
    if v.size != n or not np.all(np.isin(v, (-1.0, 0.0, 1.0))):
        raise UsageError(f"--signs needs {n} entries from -1, 0, +1")
    return v


def cmd_trace(args, manifest: RunManifest) -> int:
    out = Path(args.out) if args.out else None
    if args.coeffs:
        if args.b <= 0:
            raise UsageError("--coeffs needs --b > 0 (the rotated frame is singular at b = 0)")
        table = coefficient_table(args.b, args.c, args.tau, args.a, args.points)
    else:
        if not args.instance:
            raise UsageError("--overlaps needs --instance")
        problem = _load_instance(args.instance)
        manifest.inputs[args.instance] = _sha256(args.instance)
        c = _sign_vector(args.signs, problem.n) * args.c
        tr = overlap_trace(problem, ScheduleParams(b=args.b, tau=args.tau, a=args.a), c, _integrator(args))
        table = Table("overlaps", ["t", "observable", "value"])
        for t, a, b, f in zip(tr.times, tr.ising, tr.transverse, tr.full):
            table.rows.extend([[t, "ising", a], [t, "transverse", b], [t, "full", f]])
    path = _emit(table, out, "trace")
    if path:
        manifest.outputs.append(path)
    return 0


def cmd_meanfield(args, manifest: RunManifest) -> int:
    out = Path(args.out) if args.out else None
    cfg = _integrator(args)
    if args.optimize:
        res = optimize_bc("meanfield", integrator=cfg)
        print(f"b_opt={res.b:.10g} c_opt={res.c:.10g} magnetization={1 - res.residual:.10g} converged={res.converged}")
        return 0
    if args.exact_cd:
        tr = exact_cd_meanfield(args.g, args.h, args.b, args.tau, cfg)
    else:
        tr = evolve_meanfield(args.b, args.c, args.tau, args.g, args.h, cfg)
    table = Table("meanfield", ["t", "observable", "value"])
    bloch = tr.bloch
    for k, t in enumerate(tr.times):
        table.rows.extend([[t, "x", bloch[k, 0]], [t, "y", bloch[k, 1]], [t, "z", bloch[k, 2]]])
        if tr.cfield is not None:
            table.rows.append([t, "cfield", tr.cfield[k]])
        if tr.ground_fidelity is not None:
            table.rows.append([t, "ground_fidelity", tr.ground_fidelity[k]])
    path = _emit(table, out, "meanfield")
    if path:
        manifest.outputs.append(path)
    return 0


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "scan": cmd_scan, "bench": cmd_bench, "trace": cmd_trace,
            "meanfield": cmd_meanfield}


def _manifest_path(args) -> Path | None:
    """Suites get ``<out>/manifest.json``; single-file outputs get a sidecar."""
    if args.command in ("scan", "bench"):
        return Path(args.out) / "manifest.json"
    for attr in ("out", "trace"):
        value = getattr(args, attr, None)
        if value:
            return Path(str(value) + ".manifest.json")
    return None


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, _load_config(args.config))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        manifest = RunManifest(
            command=args.command,
            config={k: v for k, v in vars(args).items() if k not in ("config", "verbose")},
            seed=getattr(args, "seed", None),
            version=__version__,
            start=_now(),
            environment={"python": platform.python_version(), "numpy": np.__version__,
                         "backend": __import__("qgo.kernels", fromlist=["BACKEND"]).BACKEND},
        )
        if args.config:
            manifest.inputs[args.config] = _sha256(args.config)
        code = COMMANDS[args.command](args, manifest)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (CapabilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest.end = _now()
    path = _manifest_path(args)
    if path is not None and path.parent.is_dir():
        manifest.config = json.loads(json.dumps(manifest.config, default=str))
        manifest.write(path)
    return code


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))
