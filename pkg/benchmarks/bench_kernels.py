"""Compare the compiled and pure-numpy RK4 kernels.

    python benchmarks/bench_kernels.py --sizes 6,8,10 --steps 200 --repeat 3

Reports best-of-``repeat`` wall time per kernel and the max deviation
between the two backends' final states.
"""
import argparse
import time

import numpy as np

from qgo import _fallback
from qgo.dynamics import _lab_tables, flip_tables, plus_state, sa_beta
from qgo.model import ScheduleParams, diagonal_energies, sk_problem, spin_table

try:
    from qgo import _kernels
except ImportError:  # pragma: no cover - extension not built
    _kernels = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_statevector(n, steps, repeat):
    problem = sk_problem(n, 1)
    diag = diagonal_energies(problem)
    spins = spin_table(n).astype(np.float64)
    grid = np.arange(2 * steps + 1) * (0.5 / steps)
    tab = _lab_tables(grid, ScheduleParams(b=0.539), np.full(n, 1.565))

    def run(mod):
        psi = plus_state(n)
        mod.rk4_statevector(psi, diag, spins, tab.A, tab.bx, tab.cy, tab.hz, 1.0 / steps, 0, steps)
        return psi

    return {name: _best(lambda m=mod: run(m), repeat) for name, mod in _backends()}


def bench_master(n, steps, repeat):
    dE, flip = flip_tables(sk_problem(n, 1))
    beta = sa_beta(np.arange(2 * steps + 1) * (0.5 / steps), 1.0)

    def run(mod):
        p = np.full(2**n, 2.0**-n)
        return mod.rk4_master(p, dE, flip, beta, 1.0 / steps, 0, steps)

    return {name: _best(lambda m=mod: run(m), repeat) for name, mod in _backends()}


def _backends():
    out = [("python", _fallback)]
    if _kernels is not None:
        out.insert(0, ("compiled", _kernels))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="6,8,10")
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':<12}{'n':>4}{'compiled s':>13}{'python s':>12}{'speedup':>10}{'max dev':>11}")
    for n in (int(x) for x in args.sizes.split(",")):
        for label, fn in (("statevector", bench_statevector), ("master", bench_master)):
            res = fn(n, args.steps, args.repeat)
            tp, out_p = res["python"]
            if "compiled" in res:
                tc, out_c = res["compiled"]
                dev = float(np.max(np.abs(np.asarray(out_c) - np.asarray(out_p))))
                print(f"{label:<12}{n:>4}{tc:>13.4f}{tp:>12.4f}{tp / tc:>10.1f}{dev:>11.1e}")
            else:
                print(f"{label:<12}{n:>4}{'-':>13}{tp:>12.4f}{'-':>10}{'-':>11}")


if __name__ == "__main__":
    main()
