import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgo.model import (
    IsingProblem,
    ScheduleParams,
    SpinConfig,
    as_cvector,
    coefficients,
    diagonal_energies,
    ferro_problem,
    load_problem,
    rotated_coefficients,
    rotation_angle,
    save_problem,
    sk_problem,
    spin_table,
)


def test_couplings_normalized_upper_triangular():
    p = IsingProblem(3, {(2, 0): 1.5, (1, 2): -0.5})
    assert list(p.couplings) == [(0, 2), (1, 2)]
    assert p.J(2, 0) == 1.5 and p.J(0, 1) == 0.0


@pytest.mark.parametrize("couplings", [{(1, 1): 1.0}, {(0, 5): 1.0}, {(0, 1): 1.0, (1, 0): 2.0}])
def test_invalid_couplings_rejected(couplings):
    with pytest.raises(ValueError):
        IsingProblem(3, couplings)


def test_ferro_scale_and_small_n():
    p = ferro_problem(5, 2.0)
    assert all(v == pytest.approx(0.5) for v in p.couplings.values())
    with pytest.raises(ValueError):
        ferro_problem(1)


def test_sk_reproducible_and_variance():
    a, b = sk_problem(6, 3), sk_problem(6, 3)
    assert a.couplings == b.couplings
    assert sk_problem(6, 4).couplings != a.couplings
    vals = np.concatenate([list(sk_problem(40, s).couplings.values()) for s in range(5)])
    assert np.var(vals) == pytest.approx(1 / 39, rel=0.1)


def test_json_round_trip_is_fixed_point(tmp_path):
    p = sk_problem(7, 11)
    f1, f2 = tmp_path / "a.json", tmp_path / "b.json"
    save_problem(p, f1)
    q = load_problem(f1)
    save_problem(q, f2)
    assert q == p and f1.read_bytes() == f2.read_bytes()


def test_json_duplicate_pair_rejected(tmp_path):
    f = tmp_path / "dup.json"
    f.write_text(json.dumps({"n": 3, "couplings": [[0, 1, 1.0], [1, 0, 2.0]]}))
    with pytest.raises(ValueError):
        load_problem(f)


def test_bit_convention():
    spins = spin_table(3)
    assert tuple(spins[0]) == (1, 1, 1)
    assert tuple(spins[4]) == (-1, 1, 1)  # site 0 is the most significant bit
    assert SpinConfig((-1, 1, 1)).index() == 4
    assert SpinConfig.from_index(4, 3).signs == (-1, 1, 1)
    assert str(SpinConfig((1, -1))) == "+-"


def test_diagonal_energies_match_quadratic_form():
    p = sk_problem(6, 2)
    J = p.dense()
    spins = spin_table(6).astype(float)
    oracle = -0.5 * np.einsum("zi,ij,zj->z", spins, J, spins)
    np.testing.assert_allclose(diagonal_energies(p), oracle, atol=1e-13)


def test_coefficient_boundaries():
    p = ScheduleParams(b=0.7, tau=2.0)
    A, B, C = coefficients(0.0, p, [1.0, -2.0])
    assert A == 0 and B == 0.7 and np.allclose(C, 0)
    A, B, C = coefficients(2.0, p, [1.0, -2.0])
    assert A == 1 and B == 0 and np.allclose(C, 0, atol=1e-15)
    _, _, C = coefficients(1.0, p, [1.0, -2.0])
    np.testing.assert_allclose(C, [1.0, -2.0])


def test_as_cvector():
    np.testing.assert_array_equal(as_cvector(0.5, 3), [0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        as_cvector([1, 2], 3)


def _numeric_theta(t, p, c):
    # independent: theta = atan2(C, B) of the lab-frame transverse field
    B = p.b * (1 - t / p.tau)
    C = c * math.sin(math.pi * t / p.tau) ** 2
    return math.atan2(C, B)


@given(st.floats(0.05, 2.0), st.floats(-2.5, 2.5), st.floats(0.01, 0.99), st.floats(0.5, 3.0))
@settings(max_examples=60, deadline=None)
def test_rotated_coefficients_oracle(b, c, s, tau):
    p = ScheduleParams(b=b, tau=tau)
    t = s * tau
    Bp, Cp = rotated_coefficients(t, p, c)
    B = b * (1 - s)
    C = c * math.sin(math.pi * s) ** 2
    assert Bp == pytest.approx(math.hypot(B, C), rel=1e-10, abs=1e-12)
    # C' = -theta'/2, derivative by central difference of the independent angle
    h = 1e-6 * tau
    dtheta = (_numeric_theta(t + h, p, c) - _numeric_theta(t - h, p, c)) / (2 * h)
    assert Cp == pytest.approx(-0.5 * dtheta, rel=1e-5, abs=1e-6)
    assert rotation_angle(t, p, c) == pytest.approx(_numeric_theta(t, p, c), abs=1e-12)


def test_rotated_endpoint_limits():
    b, c, tau = 0.5, 1.5, 1.0
    p = ScheduleParams(b=b, tau=tau)
    Bp, Cp = rotated_coefficients(tau, p, c)
    assert Bp == pytest.approx(0.0, abs=1e-12)
    assert Cp == pytest.approx(c * math.pi**2 / (2 * tau * b), rel=1e-9)
    # continuity from the left
    _, Cl = rotated_coefficients(tau * (1 - 1e-5), p, c)
    assert Cl == pytest.approx(Cp, rel=1e-3)
    assert rotation_angle(tau, p, c) == 0.0
    assert rotation_angle(0.0, p, c) == 0.0
    assert rotation_angle(0.5, ScheduleParams(b=0.0), -1.0) == pytest.approx(-math.pi / 2)
