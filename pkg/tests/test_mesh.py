import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsbdf2.mesh import (
    Mesh,
    MeshError,
    case1_mesh,
    geometric_mesh,
    random_mesh,
    uniform_mesh,
    validate_mesh,
)


def test_uniform_four_steps():
    m = uniform_mesh(1.0, 4)
    np.testing.assert_array_equal(m.tau, [0.25] * 4)
    np.testing.assert_array_equal(m.ratios, [1.0] * 3)


def test_uniform_single_step():
    m = uniform_mesh(2.0, 1)
    np.testing.assert_array_equal(m.tau, [2.0])
    assert m.ratios.size == 0


def test_uniform_final_level_exact():
    m = uniform_mesh(1.0, 160)
    assert m.t[-1] == 1.0
    assert np.all(m.tau == 1.0 / 160)


@pytest.mark.parametrize("T, N", [(0.0, 3), (-1.0, 3), (1.0, 0)])
def test_uniform_rejects_bad_args(T, N):
    with pytest.raises(MeshError):
        uniform_mesh(T, N)


def test_case1_hand_solved():
    np.testing.assert_allclose(case1_mesh(1.0, 4).tau, [0.1, 0.4, 0.1, 0.4], rtol=1e-15)
    np.testing.assert_allclose(case1_mesh(1.0, 2).tau, [0.2, 0.8], rtol=1e-15)


def test_case1_ratio_pattern():
    np.testing.assert_array_equal(case1_mesh(1.0, 6).ratios, [4, 0.25, 4, 0.25, 4])


def test_case1_odd_rejected():
    with pytest.raises(MeshError):
        case1_mesh(1.0, 5)


def test_geometric_examples():
    np.testing.assert_allclose(geometric_mesh(7.0, 3, 2.0).tau, [1, 2, 4], rtol=1e-15)
    np.testing.assert_allclose(geometric_mesh(1.0, 3, 1.0).tau, [1 / 3] * 3, rtol=1e-15)
    m = geometric_mesh(1.0, 20, 2.0)
    denom = 2.0**20 - 1
    assert m.tau[0] == pytest.approx(1 / denom, rel=1e-14)
    assert m.tau[-1] == pytest.approx(2.0**19 / denom, rel=1e-14)


def test_geometric_rejects_nonpositive_ratio():
    with pytest.raises(MeshError):
        geometric_mesh(1.0, 4, 0.0)


def test_random_deterministic_and_normalized():
    a = random_mesh(1.0, 5, seed=7)
    b = random_mesh(1.0, 5, seed=7)
    np.testing.assert_array_equal(a.tau, b.tau)
    assert abs(a.tau.sum() - 1.0) < 1e-12
    assert np.all((a.tau > 0) & (a.tau < 1.0))
    assert not np.array_equal(a.tau, random_mesh(1.0, 5, seed=8).tau)


def test_random_low_caps_ratios():
    m = random_mesh(1.0, 400, seed=3, low=0.25)
    assert m.max_ratio() <= 4.0


@settings(max_examples=60, deadline=None)
@given(
    T=st.floats(0.1, 10.0),
    N=st.integers(1, 60),
    r=st.floats(0.3, 3.0),
)
def test_geometric_ratios_reconstructed(T, N, r):
    m = geometric_mesh(T, N, r)
    assert abs(m.tau.sum() - T) <= 1e-12 * T
    if N > 1:
        np.testing.assert_allclose(m.ratios, r, rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 40).map(lambda k: 2 * k), T=st.floats(0.1, 5.0))
def test_case1_exact_pattern(N, T):
    m = case1_mesh(T, N)
    assert np.all(m.tau[1::2] == 4 * m.tau[0::2])
    assert np.all(m.tau[2::2] == m.tau[1:-1:2] / 4)


def test_mesh_invariants_checked():
    with pytest.raises(MeshError):
        Mesh(np.array([0.5, -0.1, 0.6]), 1.0)
    with pytest.raises(MeshError):
        Mesh(np.array([0.5, 0.6]), 1.0)


def test_csv_round_trip():
    m = case1_mesh(1.0, 6)
    text = m.to_csv()
    lines = text.splitlines()
    assert lines[0] == "k,t_k,tau_k,r_k"
    assert lines[1].endswith(",")  # r_1 left empty
    back = Mesh.from_csv(text)
    np.testing.assert_array_equal(back.tau, m.tau)


def test_validate_uniform_and_geometric():
    assert validate_mesh(uniform_mesh(1.0, 10), 1.0).violating_indices == []
    assert validate_mesh(geometric_mesh(1.0, 10, 2.0), 1.0).violating_indices == []


def test_validate_flags_large_ratio():
    rep = validate_mesh(geometric_mesh(1.0, 8, 5.0), 1.0)
    assert rep.violating_indices == list(range(2, 9))
    assert rep.r_s_used == pytest.approx(4.8645365123, abs=1e-9)
    assert rep.max_ratio == pytest.approx(5.0)


def test_validate_warns_out_of_range_theta():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = validate_mesh(uniform_mesh(1.0, 4), 0.3)
    assert rep.theta_out_of_range
    assert caught
