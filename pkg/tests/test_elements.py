from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypokfem.elements import (MAX_EXACTNESS, SUPPORTED_DEGREES, edge_rule, eig_sym_2x2,
                               lagrange_basis, sqrt_psd_2x2, tabulate, triangle_rule)
from hypokfem.params import coupling_matrix, regularisation_matrix


def monomial_integral(a, b):
    # int over the reference triangle of xi^a eta^b
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_triangle_rule_weights_sum_to_half():
    assert triangle_rule(1).weights.sum() == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("k", range(0, MAX_EXACTNESS + 1))
def test_triangle_rule_exact_up_to_its_degree(k):
    rule = triangle_rule(k)
    assert np.all(rule.weights > 0)
    x, y = rule.points.T
    for a in range(k + 1):
        for b in range(k + 1 - a):
            approx = rule.weights @ (x ** a * y ** b)
            assert approx == pytest.approx(monomial_integral(a, b), rel=1e-13)


def test_x2_v3_closed_form():
    rule = triangle_rule(6)
    x, y = rule.points.T
    # 2! 3! / 7! = 12 / 5040
    assert rule.weights @ (x ** 2 * y ** 3) == pytest.approx(12 / 5040, rel=1e-14)


@pytest.mark.parametrize("k", [0, 5, 11, 20])
def test_edge_rule(k):
    rule = edge_rule(k)
    assert rule.weights.sum() == pytest.approx(1.0)
    t = rule.points[:, 0]
    for a in range(k + 1):
        assert rule.weights @ t ** a == pytest.approx(1 / (a + 1), rel=1e-13)


@pytest.mark.parametrize("bad", [-1, 21, 2.5])
def test_rule_rejects_unsupported_exactness(bad):
    with pytest.raises(ValueError):
        triangle_rule(bad)
    with pytest.raises(ValueError):
        edge_rule(bad)


@pytest.mark.parametrize("r", [1, 5])
def test_unsupported_degree(r):
    with pytest.raises(ValueError):
        lagrange_basis(r)


def test_centroid_partition_of_unity():
    val, _, _ = tabulate(lagrange_basis(2), [1 / 3, 1 / 3])
    assert val.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("r", SUPPORTED_DEGREES)
def test_kronecker_property(r):
    basis = lagrange_basis(r)
    val, _, _ = basis.tabulate(basis.nodes)
    assert np.allclose(val, np.eye(basis.dim), atol=1e-12)
    assert basis.dim == (r + 1) * (r + 2) // 2


def test_gradients_match_central_differences():
    basis = lagrange_basis(2)
    p = np.array([0.2, 0.3])
    _, grad, _ = tabulate(basis, p)
    h = 1e-6
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        fd = (tabulate(basis, p + e)[0] - tabulate(basis, p - e)[0]) / (2 * h)
        assert np.max(np.abs(fd - grad[:, axis])) <= 1e-7


ref_points = st.tuples(st.floats(0, 1), st.floats(0, 1)).map(
    lambda t: (t[0] * (1 - t[1]), t[1]))


@settings(max_examples=50, deadline=None)
@given(p=ref_points, r=st.sampled_from(SUPPORTED_DEGREES))
def test_basis_sums(p, r):
    val, grad, hess = tabulate(lagrange_basis(r), p)
    assert val.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(grad.sum(axis=0)).max() < 1e-10
    assert np.abs(hess.sum(axis=0)).max() < 1e-8


@settings(max_examples=30, deadline=None)
@given(p=ref_points, r=st.sampled_from(SUPPORTED_DEGREES))
def test_hessian_matches_second_differences(p, r):
    basis = lagrange_basis(r)
    p = np.asarray(p)
    _, _, hess = tabulate(basis, p)
    h = 1e-4
    E = np.eye(2) * h
    for a in range(2):
        for b in range(2):
            f = lambda q: tabulate(basis, q)[0]
            fd = (f(p + E[a] + E[b]) - f(p + E[a] - E[b]) - f(p - E[a] + E[b])
                  + f(p - E[a] - E[b])) / (4 * h * h)
            assert np.max(np.abs(fd - hess[:, a, b])) <= 1e-5


@pytest.mark.parametrize("r", SUPPORTED_DEGREES)
def test_stiffness_symmetric(r):
    rule = triangle_rule(2 * r)
    _, grad, _ = lagrange_basis(r).tabulate(rule.points)
    K = np.einsum("q,qia,qja->ij", rule.weights, grad, grad)
    assert np.abs(K - K.T).max() <= 1e-14 * np.abs(K).max()


def test_eig_simple_cases():
    assert eig_sym_2x2(np.eye(2)) == (1.0, 1.0)
    assert eig_sym_2x2([[0, 1], [1, 0]]) == (-1.0, 1.0)


def test_eig_of_N_matches_closed_form():
    # trace eps (1 + m^2) and determinant 3/4 eps^2 m^2 give the discriminant
    # m^4 - m^2 + 1; the printed m^4 + m^2 + 1 contradicts the definition of N
    eps, m = 0.1, 0.35
    N = coupling_matrix(regularisation_matrix(eps, m), eps)
    lo, hi = eig_sym_2x2(N)
    root = np.sqrt(m ** 4 - m ** 2 + 1)
    assert lo == pytest.approx(eps / 2 * (1 + m * m - root), rel=1e-13)
    assert hi == pytest.approx(eps / 2 * (1 + m * m + root), rel=1e-13)
    assert np.allclose([lo, hi], np.linalg.eigvalsh(N), rtol=1e-13, atol=0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_eig_matches_numpy(a, b, c):
    A = np.array([[a, b], [b, c]])
    lo, hi = eig_sym_2x2(A)
    ref = np.linalg.eigvalsh(A)
    assert np.allclose([lo, hi], ref, rtol=1e-12, atol=1e-12 * (1 + np.abs(A).max()))


def test_sqrt_simple_cases():
    assert np.array_equal(sqrt_psd_2x2(np.eye(2)), np.eye(2))
    assert np.array_equal(sqrt_psd_2x2(np.zeros((2, 2))), np.zeros((2, 2)))


def test_sqrt_of_M_family():
    eps, m = 0.1, 0.35
    M = regularisation_matrix(eps, m)
    S = sqrt_psd_2x2(M)
    assert np.abs(S @ S - M).max() <= 1e-14
    lo, hi = eig_sym_2x2(M)
    assert hi == pytest.approx(eps * m * (m * m + 1), rel=1e-13)
    assert abs(lo) <= 1e-16


def test_sqrt_rejects_indefinite():
    with pytest.raises(ValueError):
        sqrt_psd_2x2([[1.0, 0.0], [0.0, -1.0]])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(-1, 1))
def test_sqrt_psd_property(l1, l2, angle):
    c, s = np.cos(angle), np.sin(angle)
    Q = np.array([[c, -s], [s, c]])
    M = Q @ np.diag([l1, l2]) @ Q.T
    M = 0.5 * (M + M.T)
    S = sqrt_psd_2x2(M, tol=1e-12)
    assert np.allclose(S, S.T)
    assert eig_sym_2x2(S)[0] >= -1e-12
    assert np.linalg.norm(S @ S - M) <= 1e-12 * (1 + np.linalg.norm(M)) * 10
