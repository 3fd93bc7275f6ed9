import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from conftest import kron_hamiltonian
from qgo import kernels
from qgo.dynamics import (
    IntegratorConfig,
    collective_operators,
    dense_hamiltonian,
    evolve_effective,
    evolve_ferro_symmetric,
    evolve_master_equation,
    evolve_meanfield,
    evolve_schrodinger,
    exact_cd_meanfield,
    flip_tables,
    frame_rotation,
    meanfield_rhs,
    overlap_trace,
    plus_state,
    sa_beta,
)
from qgo.measures import energy_expectation
from qgo.model import ScheduleParams, coefficients, diagonal_energies, ferro_problem, sk_problem

FAST = IntegratorConfig(steps_per_tau=400)


def oracle_evolution(problem, p, c, t_final=None):
    """Independent reference: Kronecker-built H(t), scipy DOP853 at tight tolerance."""
    J = problem.dense()
    t_final = p.tau if t_final is None else t_final

    def rhs(t, y):
        A, B, C = coefficients(t, p, c)
        return -1j * (kron_hamiltonian(J, A, B, np.broadcast_to(C, (problem.n,))) @ y)

    sol = solve_ivp(rhs, (0, t_final), plus_state(problem.n), method="DOP853", rtol=1e-11, atol=1e-12)
    return sol.y[:, -1]


@pytest.mark.parametrize("n,seed", [(3, 1), (4, 2)])
def test_statevector_matches_kron_oracle(n, seed):
    problem = sk_problem(n, seed)
    c = np.linspace(-1.5, 1.5, n)
    p = ScheduleParams(b=0.6, tau=1.3)
    psi = evolve_schrodinger(problem, p, c, IntegratorConfig(steps_per_tau=2000))
    ref = oracle_evolution(problem, p, c)
    assert abs(np.vdot(ref, psi)) ** 2 == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(psi, ref, atol=1e-7)


def test_dense_hamiltonian_matches_kron():
    problem = sk_problem(4, 5)
    C = np.array([0.3, -0.2, 0.0, 1.1])
    np.testing.assert_allclose(dense_hamiltonian(problem, 0.7, 0.4, C), kron_hamiltonian(problem.dense(), 0.7, 0.4, C), atol=1e-13)


def test_adaptive_agrees_with_rk4():
    problem = sk_problem(5, 3)
    p = ScheduleParams(b=0.5)
    a = evolve_schrodinger(problem, p, 1.2, IntegratorConfig(method="adaptive", tol=1e-11))
    b = evolve_schrodinger(problem, p, 1.2, IntegratorConfig(steps_per_tau=2000))
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_early_termination_and_sampling():
    problem = ferro_problem(4)
    p = ScheduleParams(b=0.5)
    cfg = IntegratorConfig(steps_per_tau=1000, stride=100)
    times, states = evolve_schrodinger(problem, p, 1.0, cfg, t_final=0.6, sample=True)
    assert times[0] == 0 and times[-1] == pytest.approx(0.6)
    ref = oracle_evolution(problem, p, np.ones(4), t_final=0.6)
    np.testing.assert_allclose(states[-1], ref, atol=1e-7)


@given(st.integers(2, 6), st.integers(0, 10**6), st.floats(0.0, 1.5), st.floats(-2, 2), st.floats(0.3, 3.0))
@settings(max_examples=25, deadline=None)
def test_norm_conserved(n, seed, b, c, tau):
    psi = evolve_schrodinger(sk_problem(n, seed), ScheduleParams(b=b, tau=tau), c, FAST)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-8)


def test_frame_equivalence_small():
    problem = sk_problem(5, 9)
    p = ScheduleParams(b=0.539)
    c = np.array([1.5, -1.5, 1.5, 1.5, -1.5])
    cfg = IntegratorConfig(steps_per_tau=2000)
    lab = evolve_schrodinger(problem, p, c, cfg)
    eff = evolve_effective(problem, p, c, cfg)
    np.testing.assert_allclose(np.abs(lab) ** 2, np.abs(eff) ** 2, atol=1e-6)
    # the rotated state is U_g psi_lab up to the integration error
    np.testing.assert_allclose(frame_rotation(p.tau, p, c, 5) * lab, eff, atol=1e-4)


def test_effective_needs_positive_b():
    with pytest.raises(ValueError):
        evolve_effective(ferro_problem(3), ScheduleParams(b=0.0), 1.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2))
@settings(max_examples=100, deadline=None)
def test_meanfield_rhs_is_minus_i_H(hz, hx, cy, a, b):
    H = np.array([[-hz, -hx + 1j * cy], [-hx - 1j * cy, hz]])
    ref = -1j * H @ np.array([a, b])
    got = meanfield_rhs(a, b, hz, hx, cy)
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_meanfield_norm_and_decoupled_limit():
    tr = evolve_meanfield(0.5, 1.5, cfg=FAST)
    np.testing.assert_allclose(np.abs(tr.alpha) ** 2 + np.abs(tr.beta) ** 2, 1.0, atol=1e-8)
    # g=0, h=0, c=0: pure transverse field keeps |+> stationary
    tr = evolve_meanfield(0.7, 0.0, g=0.0, cfg=FAST)
    np.testing.assert_allclose(tr.bloch[-1], [1, 0, 0], atol=1e-10)


def test_exact_cd_tracks_ground_state():
    b = 0.539
    tr = exact_cd_meanfield(0.0, 1.0, b, cfg=IntegratorConfig(steps_per_tau=2000))
    assert tr.ground_fidelity.min() >= 1 - 1e-4
    assert abs(tr.cfield[0]) == pytest.approx(1.0 / (2 * b), abs=1e-6)
    assert tr.magnetization[-1] > 0.999


def test_exact_cd_rejects_zero_h():
    with pytest.raises(ValueError):
        exact_cd_meanfield(1.0, 0.0, 0.5)


def test_sa_beta():
    assert sa_beta(0.0, 1.0) == 0
    assert sa_beta(1.0, 1.0) == pytest.approx(10.0)


def generator_oracle(problem, beta):
    """Dense Metropolis generator built by explicit loops (independent of flip_tables)."""
    n, dim = problem.n, 2**problem.n
    diag = diagonal_energies(problem)
    W = np.zeros((dim, dim))
    for z in range(dim):
        for i in range(n):
            y = z ^ (1 << (n - 1 - i))
            W[y, z] += min(1.0, math.exp(-beta * (diag[y] - diag[z])))
    W -= np.diag(W.sum(axis=0))
    return W


def test_master_equation_matches_dense_oracle():
    problem = sk_problem(4, 6)
    tau = 2.0
    prob = evolve_master_equation(problem, tau, IntegratorConfig(steps_per_tau=500))
    sol = solve_ivp(lambda t, p: generator_oracle(problem, float(sa_beta(t, tau))) @ p, (0, tau),
                    np.full(16, 1 / 16), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(prob, sol.y[:, -1], atol=1e-8)


@given(st.integers(2, 7), st.integers(0, 10**6), st.floats(0.2, 20))
@settings(max_examples=20, deadline=None)
def test_master_equation_conserves_probability(n, seed, tau):
    prob = evolve_master_equation(sk_problem(n, seed), tau, IntegratorConfig(steps_per_tau=200))
    assert prob.sum() == pytest.approx(1.0, abs=1e-8)
    assert prob.min() >= -1e-12


def test_master_equation_constant_beta_reaches_gibbs():
    problem = sk_problem(3, 1)
    diag = diagonal_energies(problem)
    prob = evolve_master_equation(problem, 60.0, IntegratorConfig(steps_per_tau=50), beta_fn=lambda t: np.full_like(t, 0.7))
    gibbs = np.exp(-0.7 * diag)
    np.testing.assert_allclose(prob, gibbs / gibbs.sum(), atol=1e-8)


def test_flip_tables():
    problem = sk_problem(3, 2)
    dE, flip = flip_tables(problem)
    assert flip[0, 0] == 4 and flip[0, 2] == 1
    diag = diagonal_energies(problem)
    assert dE[5, 1] == pytest.approx(diag[7] - diag[5])


def test_collective_operators_match_full_space():
    n = 4
    energy, X, Y = collective_operators(n)
    assert energy[0] == pytest.approx(-n / 2)
    # Dicke spectrum of sum sigma^x is n, n-2, ..., -n
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(X)), np.arange(-n, n + 1, 2), atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Y)), np.arange(-n, n + 1, 2), atol=1e-12)


@pytest.mark.parametrize("c", [0.0, 1.3, -0.8])
def test_symmetric_subspace_matches_statevector(c):
    n = 6
    p = ScheduleParams(b=0.6)
    cfg = IntegratorConfig(steps_per_tau=1000)
    full = evolve_schrodinger(ferro_problem(n), p, c, cfg)
    sym = evolve_ferro_symmetric(n, 1.0, p, c, cfg)
    assert abs(sym[0]) ** 2 == pytest.approx(abs(full[0]) ** 2, abs=1e-10)
    assert abs(sym[-1]) ** 2 == pytest.approx(abs(full[-1]) ** 2, abs=1e-10)
    energies = collective_operators(n)[0]
    assert np.dot(np.abs(sym) ** 2, energies) == pytest.approx(energy_expectation(full, ferro_problem(n)), abs=1e-10)


def test_overlap_trace_endpoints():
    problem = ferro_problem(4)
    tr = overlap_trace(problem, ScheduleParams(b=0.5), 1.0, IntegratorConfig(steps_per_tau=400, stride=40))
    # |+...+> is the ground state of -B sum sigma^x at t=0
    assert tr.transverse[0] == pytest.approx(1.0)
    assert tr.full[0] == pytest.approx(1.0)
    # at t=tau the full, transverse and Ising ground spaces coincide
    assert tr.full[-1] == pytest.approx(tr.ising[-1], abs=1e-9)
    assert np.all((tr.ising >= -1e-12) & (tr.ising <= 1 + 1e-12))


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(steps=0)
    assert IntegratorConfig(steps_per_tau=100).n_steps(2.5) == 250


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")
