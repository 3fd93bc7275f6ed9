import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import SY
from qgo.dynamics import IntegratorConfig
from qgo.greedy import (
    AmbiguityError,
    QAMeasure,
    QgoConfig,
    _select,
    gradient_vector,
    optimize_bc,
    rotated_product_state,
    sequential_qgo,
    single_shot_qgo,
    yfield_energy,
    yfield_greedy,
)
from qgo.measures import ground_states, solution_success
from qgo.model import ferro_problem, sk_problem

FAST = IntegratorConfig(steps_per_tau=200)


class Counter:
    def __init__(self, fn):
        self.fn, self.calls = fn, 0

    def __call__(self, c, count=True):
        self.calls += count
        return self.fn(c)


def test_gradient_vector_linear_oracle():
    w = np.array([0.5, -2.0, 0.0, 3.0])
    f = Counter(lambda c: float(w @ c))
    c = np.array([0.0, 1.0, 0.0, 0.0])
    g, base = gradient_vector(f, c, 0.1)
    assert base == pytest.approx(-2.0)
    assert np.isnan(g[1])
    np.testing.assert_allclose(g[[0, 2, 3]], [0.5, 0.0, 3.0], atol=1e-12)
    assert f.calls == 4  # base + three probes
    g2, _ = gradient_vector(f, c, 0.1, base=base, rule="average")
    np.testing.assert_allclose(g2[[0, 2, 3]], [0.5, 0.0, 3.0], atol=1e-12)


def test_select_ties_and_ambiguity():
    assert _select(np.array([np.nan, 1.0, -1.0 + 1e-12, 0.5])) == 1
    assert _select(np.array([0.2, np.nan, -0.9])) == 2
    with pytest.raises(AmbiguityError):
        _select(np.array([0.0, np.nan, 1e-14]))


def test_config_validation():
    with pytest.raises(ValueError):
        QgoConfig(measure="entropy")
    with pytest.raises(ValueError):
        QgoConfig(delta=0)
    with pytest.raises(ValueError):
        QgoConfig(gradient="central")


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sequential_call_count_and_ferro_uniform(n):
    config, trace = sequential_qgo(ferro_problem(n), QgoConfig(integrator=FAST))
    assert trace.qa_calls == n * (n + 3) // 2
    assert len(set(config.signs)) == 1
    assert sorted(r.site for r in trace.records) == list(range(n))


def test_sequential_calls_monotone_and_sign_rule():
    _, trace = sequential_qgo(sk_problem(5, 3), QgoConfig(integrator=FAST))
    calls = [r.qa_calls for r in trace.records]
    assert calls == sorted(calls)
    for r in trace.records:
        assert r.sign == -int(np.sign(r.gradient))
        assert trace.c_final[r.site] == pytest.approx(r.sign * QgoConfig().c_opt)


def test_single_shot_call_count():
    problem = sk_problem(6, 1)
    config, trace = single_shot_qgo(problem, QgoConfig(measure="fidelity", integrator=FAST))
    assert trace.qa_calls == 6
    assert config.signs[0] == 1


def test_fidelity_measure_target():
    problem = ferro_problem(4)
    f = QAMeasure(problem, QgoConfig(measure="fidelity", integrator=FAST))
    assert f.target_index == 0
    psi = f.state(np.zeros(4))
    assert f(np.zeros(4)) == pytest.approx(1 - abs(psi[0]) ** 2)
    assert f.calls == 2
    f(np.zeros(4), count=False)
    assert f.calls == 2


def test_rotated_product_state_matches_expm():
    theta = np.array([0.3, -1.1, 2.0])
    plus = np.full(2, 1 / math.sqrt(2))
    ref = reduce(np.kron, [expm(0.5j * th * SY) @ plus for th in theta])
    np.testing.assert_allclose(rotated_product_state(theta), ref, atol=1e-14)


@given(st.integers(2, 7), st.integers(0, 10**6), st.lists(st.floats(-math.pi, math.pi), min_size=7, max_size=7))
@settings(max_examples=50, deadline=None)
def test_yfield_energy_product_oracle(n, seed, angles):
    problem = sk_problem(n, seed)
    theta = np.array(angles[:n])
    m = np.sin(theta)
    oracle = -sum(v * m[i] * m[j] for (i, j), v in problem.couplings.items())
    assert yfield_energy(problem, theta) == pytest.approx(oracle, abs=1e-10)


def test_yfield_greedy_ferro_and_calls():
    config, trace = yfield_greedy(ferro_problem(5))
    assert config.signs == (1,) * 5
    assert trace.qa_calls == 5 * 8 // 2
    assert trace.records[0].site == 0  # symmetry-breaking first assignment


def test_yfield_greedy_sk_success_is_plausible():
    wins = 0
    for seed in range(10):
        problem = sk_problem(6, seed)
        config, _ = yfield_greedy(problem)
        wins += solution_success(config, ground_states(problem))
    assert wins >= 5


def test_optimize_bc_meanfield_coarse():
    res = optimize_bc("meanfield", grid=5, integrator=IntegratorConfig(steps_per_tau=300))
    assert res.b == pytest.approx(0.539, abs=0.01)
    assert res.c == pytest.approx(1.565, abs=0.01)
    assert res.residual < 1e-3
    assert res.grid_values.shape == (5, 5)


def test_optimize_bc_rejects_bad_inputs():
    with pytest.raises(ValueError):
        optimize_bc("meanfield", measure="entropy")
    with pytest.raises(ValueError):
        optimize_bc(("lattice", 4), grid=2)
