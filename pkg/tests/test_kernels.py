import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lagrange_derivative_weights
from wsbdf2.kernels import (
    apply_D2,
    build_doc_explicit,
    build_doc_recursive,
    build_kernels,
    check_orthogonality,
    doc_apply,
    doc_rows,
)
from wsbdf2.mesh import Mesh, case1_mesh, random_mesh, uniform_mesh

THETAS = [0.5, 0.6, 0.75, 0.9, 1.0]


def two_step_mesh():
    return Mesh(np.array([0.1, 0.4]), 0.5)


def test_crank_nicolson_kernels():
    m = random_mesh(1.0, 12, seed=2)
    k = build_kernels(m, 0.5)
    np.testing.assert_array_equal(k.b1, 0.0)
    np.testing.assert_allclose(k.b0, 1.0 / m.tau, rtol=1e-15)


def test_uniform_bdf2_kernels():
    tau = 0.125
    k = build_kernels(uniform_mesh(1.0, 8), 1.0)
    assert k.b0[0] == 1 / tau
    np.testing.assert_allclose(k.b0[1:], 3 / (2 * tau), rtol=1e-15)
    np.testing.assert_allclose(k.b1[1:], -1 / (2 * tau), rtol=1e-15)


def test_hand_evaluated_kernels():
    k = build_kernels(two_step_mesh(), 1.0)
    assert k.b0[0] == pytest.approx(10.0)
    assert k.b0[1] == pytest.approx(4.5, rel=1e-15)
    assert k.b1[1] == pytest.approx(-8.0, rel=1e-15)


@pytest.mark.parametrize("theta", THETAS)
def test_kernel_unit_identity(theta):
    m = random_mesh(1.0, 30, seed=5)
    k = build_kernels(m, theta)
    np.testing.assert_allclose(k.b1[1:] * m.tau[:-1] + k.b0[1:] * m.tau[1:], 1.0, rtol=1e-14)


def test_doc_hand_recursion():
    doc = build_doc_recursive(build_kernels(two_step_mesh(), 1.0))
    assert doc.d[1, 1] == pytest.approx(2 / 9, rel=1e-15)
    assert doc.d[1, 0] == pytest.approx(8 / 45, rel=1e-15)
    assert doc.row_sums()[1] == pytest.approx(0.4, rel=1e-15)


def test_doc_crank_nicolson_is_diagonal():
    m = random_mesh(1.0, 9, seed=1)
    for builder in (build_doc_recursive, lambda k: build_doc_explicit(k, m)):
        doc = builder(build_kernels(m, 0.5))
        np.testing.assert_allclose(np.diag(doc.d), m.tau, rtol=1e-15)
        assert np.all(np.tril(doc.d, -1) == 0.0)


def test_doc_uniform_bdf2_closed_form():
    N, tau = 12, 1.0 / 12
    doc = build_doc_explicit(build_kernels(uniform_mesh(1.0, N), 1.0), uniform_mesh(1.0, N))
    for n in range(2, N + 1):
        for k in range(2, n + 1):
            assert doc.d[n - 1, k - 1] == pytest.approx(2 * tau / 3 * (1 / 3) ** (n - k), rel=1e-13)


def test_doc_rows_match_table():
    kern = build_kernels(case1_mesh(1.0, 10), 0.75)
    table = build_doc_recursive(kern)
    for n, row in enumerate(doc_rows(kern), start=1):
        np.testing.assert_array_equal(row, table.row(n))


def test_general_sum_form_equals_dense_inverse():
    # the full-sum definition of the DOC kernels is D B = I for the dense B
    m = random_mesh(1.0, 25, seed=11, low=0.25)
    kern = build_kernels(m, 0.8)
    B = kern.dense()
    D_brute = np.linalg.inv(B)
    doc = build_doc_recursive(kern)
    np.testing.assert_allclose(doc.d, np.tril(D_brute), rtol=1e-12, atol=1e-15 * np.abs(D_brute).max())


def test_orthogonality_cn_exact():
    m = random_mesh(1.0, 15, seed=4)
    kern = build_kernels(m, 0.5)
    ok, worst = check_orthogonality(kern, build_doc_recursive(kern))
    assert ok and worst < 1e-15


def test_orthogonality_random_mesh():
    m = random_mesh(1.0, 50, seed=9, low=0.25)
    kern = build_kernels(m, 0.75)
    ok, worst = check_orthogonality(kern, build_doc_recursive(kern))
    assert ok and worst < 1e-12


@settings(max_examples=40, deadline=None)
@given(
    N=st.integers(1, 200),
    seed=st.integers(0, 2**32 - 1),
    theta=st.sampled_from(THETAS),
)
def test_recursive_explicit_agree(N, seed, theta):
    m = random_mesh(1.0, N, seed, low=0.25)
    kern = build_kernels(m, theta)
    rec = build_doc_recursive(kern).d
    exp = build_doc_explicit(kern, m).d
    scale = np.maximum(np.abs(rec), np.abs(exp))
    rel = np.divide(np.abs(rec - exp), scale, out=np.zeros_like(rec), where=scale > 0)
    assert rel.max() <= 1e-13
    assert np.all(rec >= 0.0)
    np.testing.assert_allclose(rec.sum(axis=1), m.tau, rtol=1e-13)
    np.testing.assert_allclose(np.cumsum(rec.sum(axis=1)), m.t[1:], rtol=1e-13)


def test_apply_D2_constant_and_linear():
    m = random_mesh(2.0, 20, seed=3)
    for theta in THETAS:
        np.testing.assert_allclose(apply_D2(m, theta, np.full(21, 3.5)), 0.0, atol=1e-12)
        np.testing.assert_allclose(apply_D2(m, theta, m.t), 1.0, rtol=1e-12)


def test_apply_D2_quadratic_bdf2():
    m = random_mesh(1.0, 30, seed=8, low=0.2)
    out = apply_D2(m, 1.0, m.t**2)
    np.testing.assert_allclose(out[1:], 2 * m.t[2:], rtol=1e-11)


@pytest.mark.parametrize("theta", THETAS)
def test_apply_D2_is_weighted_interpolant_derivative(theta):
    # D2 v^n = theta p'(t_n) + (1-theta) p'(t_{n-1}) with p the quadratic through three levels
    m = random_mesh(1.0, 15, seed=21, low=0.2)
    v = np.random.default_rng(0).standard_normal(16)
    out = apply_D2(m, theta, v)
    for n in range(2, 16):
        nodes = m.t[n - 2 : n + 1]
        w = theta * lagrange_derivative_weights(nodes, nodes[2]) + (1 - theta) * lagrange_derivative_weights(
            nodes, nodes[1]
        )
        assert out[n - 1] == pytest.approx(w @ v[n - 2 : n + 1], rel=1e-10, abs=1e-10)
    assert out[0] == pytest.approx((v[1] - v[0]) / m.tau[0])


def test_apply_D2_length_mismatch():
    with pytest.raises(ValueError):
        apply_D2(uniform_mesh(1.0, 4), 1.0, np.zeros(4))


@pytest.mark.parametrize("theta", THETAS)
def test_doc_summation_recovers_differences(theta):
    m = random_mesh(1.0, 40, seed=13, low=0.25)
    v = np.cumsum(np.random.default_rng(1).standard_normal((41, 3)), axis=0)
    doc = build_doc_recursive(build_kernels(m, theta))
    rec = doc_apply(doc, apply_D2(m, theta, v))
    np.testing.assert_allclose(rec, np.diff(v, axis=0), atol=1e-11)
