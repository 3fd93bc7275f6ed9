import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_ground
from qgo.measures import (
    CapabilityError,
    GroundTruth,
    InvalidTargetError,
    cached_ground_states,
    energy_expectation,
    exact_success,
    fidelity,
    ground_states,
    ising_energy,
    solution_success,
)
from qgo.model import IsingProblem, SpinConfig, diagonal_energies, ferro_problem, sk_problem


@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_ground_states_match_enumeration_oracle(n, seed):
    problem = sk_problem(n, seed)
    e, configs = brute_force_ground(problem.dense())
    truth = ground_states(problem)
    assert truth.energy == pytest.approx(e, abs=1e-12)
    assert {c.signs for c in truth.configs} == configs


def test_ground_states_z2_pairs():
    truth = ground_states(sk_problem(8, 1))
    signs = {c.signs for c in truth.configs}
    assert all(tuple(-s for s in c) in signs for c in signs)
    assert len(truth.configs) % 2 == 0


def test_ferro_ground_pair_and_target():
    truth = ground_states(ferro_problem(5))
    assert truth.energy == pytest.approx(-2.5)
    assert truth.designated_target().signs == (1,) * 5


def test_degenerate_ties_kept():
    # frustrated triangle: six degenerate ground configurations
    tri = IsingProblem(3, {(0, 1): -1.0, (1, 2): -1.0, (0, 2): -1.0})
    assert len(ground_states(tri).configs) == 6


def test_capability_limit():
    with pytest.raises(CapabilityError):
        ground_states(IsingProblem(25, {(0, 1): 1.0}))


def test_ising_energy_matches_diagonal():
    problem = sk_problem(6, 7)
    diag = diagonal_energies(problem)
    for idx in (0, 5, 33, 63):
        assert ising_energy(SpinConfig.from_index(idx, 6), problem) == pytest.approx(diag[idx])
    with pytest.raises(ValueError):
        ising_energy(SpinConfig((1, 1)), problem)


def test_fidelity_and_energy_expectation():
    problem = ferro_problem(3)
    truth = ground_states(problem)
    psi = np.zeros(8, dtype=complex)
    psi[0] = psi[7] = 1 / np.sqrt(2)
    assert fidelity(psi, truth) == pytest.approx(1.0)
    assert fidelity(psi, truth, SpinConfig((1, 1, 1))) == pytest.approx(0.5)
    with pytest.raises(InvalidTargetError):
        fidelity(psi, truth, SpinConfig((1, -1, 1)))
    assert energy_expectation(psi, problem) == pytest.approx(truth.energy)
    probs = np.full(8, 1 / 8)
    assert fidelity(probs, truth) == pytest.approx(0.25)


def test_success_flip_quotient():
    truth = ground_states(ferro_problem(4))
    down = SpinConfig((-1,) * 4)
    assert solution_success(down, truth) and exact_success(down, truth)
    truth_one = GroundTruth(truth.energy, (SpinConfig((1,) * 4),))
    assert solution_success(down, truth_one) and not exact_success(down, truth_one)
    assert not solution_success(SpinConfig((1, -1, 1, 1)), truth)


def test_cache_round_trip(tmp_path):
    problem = sk_problem(6, 2)
    path = tmp_path / "gs.json"
    a = cached_ground_states(problem, path)
    assert path.exists()
    b = cached_ground_states(problem, path)
    assert a == b
