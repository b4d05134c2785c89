import numpy as np
import pytest
import sympy as sy
from hypothesis import given, settings
from hypothesis import strategies as st

from hypokfem.manufactured import (ZERO, Jet, cos, eval_jet, exp, kolmogorov, oc_manufactured,
                                   primal_case, primal_forcing, sin, sin4_benchmark, targets)
from hypokfem.params import regularisation_matrix

EPS = 0.1
M = regularisation_matrix(EPS, 0.35)

X, V = sy.symbols("x v")

# (jet expression, the same expression in sympy)
EXPRESSIONS = {
    "sin4": (sin4_benchmark, sy.sin(sy.pi * X) ** 4 * sy.sin(sy.pi * V) ** 4),
    "poly": (lambda x, v: 1 + x * v ** 3 - 2 * x ** 4 + v ** 2 * x ** 2,
             1 + X * V ** 3 - 2 * X ** 4 + V ** 2 * X ** 2),
    "exp": (lambda x, v: exp(-x * x - 2 * v) * cos(3 * v), sy.exp(-X * X - 2 * V) * sy.cos(3 * V)),
    "quotient": (lambda x, v: sin(x + v) / (2 + cos(x * v)), sy.sin(X + V) / (2 + sy.cos(X * V))),
}


def symbolic(expr, a, b):
    return sy.lambdify((X, V), sy.diff(expr, X, a, V, b), "numpy")


def fd_partial(expr, x, v, a, b, h=1e-2):
    """4th-order central differences applied a times in x then b times in v."""
    if a == 0 and b == 0:
        return expr(x, v)
    if a:
        g = lambda s: fd_partial(expr, x + s, v, a - 1, b, h)
    else:
        g = lambda s: fd_partial(expr, x, v + s, a, b - 1, h)
    return (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h)


def test_sin4_values():
    j = eval_jet(sin4_benchmark, 0.0, 0.5)
    assert j.value == 0 and j.partial(1, 0) == 0
    assert eval_jet(sin4_benchmark, 0.5, 0.5).value == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("name", sorted(EXPRESSIONS))
def test_jet_partials_match_symbolic(name):
    expr, sym = EXPRESSIONS[name]
    x, v = np.random.default_rng(7).uniform(-0.8, 0.8, (2, 50))
    jet = eval_jet(expr, x, v, 4)
    for k in range(5):
        for a in range(k + 1):
            ref = np.broadcast_to(symbolic(sym, a, k - a)(x, v), x.shape)
            scale = max(np.abs(ref).max(), 1.0)
            assert np.abs(jet.partial(a, k - a) - ref).max() <= 1e-12 * scale


@pytest.mark.parametrize("name", sorted(EXPRESSIONS))
def test_low_order_partials_match_finite_differences(name):
    expr = EXPRESSIONS[name][0]
    x, v = 0.31, -0.42
    jet = eval_jet(expr, x, v, 2)
    for a, b in ((1, 0), (0, 1), (1, 1), (2, 0), (0, 2)):
        assert fd_partial(expr, x, v, a, b, h=1e-3) == pytest.approx(jet.partial(a, b), rel=1e-6,
                                                                     abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 3), st.integers(0, 3))
def test_mixed_partial_order_is_irrelevant(x, v, a, b):
    # a single stored coefficient per multi-index, and products of jets agree with the chain rule
    f = lambda X, V: sin(2 * X) * exp(V) + X ** 3 * V
    j = eval_jet(f, x, v, 6)
    lhs = eval_jet(lambda X, V: sin(2 * X) * exp(V), x, v, 6).partial(a, b)
    rhs = (2 ** a * np.sin(2 * x + a * np.pi / 2)) * np.exp(v)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
    poly = {(0, 0): x ** 3 * v, (1, 0): 3 * x * x * v, (0, 1): x ** 3, (1, 1): 3 * x * x,
            (2, 0): 6 * x * v, (2, 1): 6 * x, (3, 0): 6 * v, (3, 1): 6}
    assert j.partial(a, b) == pytest.approx(rhs + poly.get((a, b), 0.0), rel=1e-12, abs=1e-12)


def test_partial_beyond_order_rejected():
    with pytest.raises(ValueError):
        eval_jet(sin4_benchmark, 0.1, 0.2, 2).partial(2, 1)


def test_primal_forcing_examples():
    zero = eval_jet(lambda x, v: 0 * x, 0.3, 0.4, 3)
    f, g = primal_forcing(zero, EPS)
    assert f == 0 and not np.any(g)
    f, g = primal_forcing(eval_jet(lambda x, v: v * v, 0.3, 0.4, 3), EPS)
    assert f == pytest.approx(-2 * EPS) and np.allclose(g, 0)


def test_primal_forcing_against_hand_derivation():
    # at (1/4, 1/4): u_x = pi / 4 and u_vv = pi^2 / 2
    f, _ = primal_forcing(eval_jet(sin4_benchmark, 0.25, 0.25, 3), EPS)
    assert f == pytest.approx(0.25 * np.pi / 4 - EPS * np.pi ** 2 / 2, rel=1e-13)


def test_primal_forcing_needs_order_three():
    with pytest.raises(ValueError):
        primal_forcing(eval_jet(sin4_benchmark, 0.0, 0.0, 2), EPS)


def test_primal_forcing_gradient_by_differences():
    _, f = primal_case(sin4_benchmark, EPS)
    x, v, h = 0.3, -0.2, 1e-5
    gx = (f(x + h, v) - f(x - h, v)) / (2 * h)
    gv = (f(x, v + h) - f(x, v - h)) / (2 * h)
    assert np.allclose(f.gradient(x, v), [gx, gv], rtol=1e-7, atol=1e-7)


def test_oc_manufactured_zero():
    case = oc_manufactured(lambda x, v: 0 * x, 1.0, EPS, M)
    pts = np.linspace(-0.9, 0.9, 7)
    for g in (case.z, case.f, case.target):
        assert not np.any(g(pts, pts))


def test_oc_manufactured_alpha_scaling():
    a = oc_manufactured(sin4_benchmark, 1.0, EPS, M)
    b = oc_manufactured(sin4_benchmark, 2.0, EPS, M)
    x, v = np.array([0.1, -0.3]), np.array([0.2, 0.6])
    assert np.allclose(b.z(x, v), 2 * a.z(x, v))
    assert np.allclose(b.f(x, v), a.f(x, v))
    # control equation alpha f = z holds pointwise
    assert np.allclose(2.0 * b.f(x, v), b.z(x, v), rtol=0, atol=1e-15)


def test_oc_target_formula():
    alpha = 0.5
    case = oc_manufactured(sin4_benchmark, alpha, EPS, M)
    u = EXPRESSIONS["sin4"][1]
    z = alpha * (V * sy.diff(u, X) - EPS * sy.diff(u, V, 2))
    base = u - V * sy.diff(z, X) - EPS * sy.diff(z, V, 2)
    value = base - 2 * (M[0, 1] * sy.diff(z, X, 2) + M[1, 1] * sy.diff(z, X, V))
    x, v = np.array([0.2, -0.6]), np.array([-0.35, 0.1])
    ev = lambda e: sy.lambdify((X, V), e, "numpy")(x, v)
    assert np.allclose(case.target(x, v), ev(value), rtol=1e-12, atol=1e-12)
    grad = np.stack([ev(sy.diff(base, X)), ev(sy.diff(base, V))], axis=-1)
    assert np.allclose(case.target.gradient(x, v), grad, rtol=1e-12, atol=1e-10)
    assert np.allclose(case.z(x, v), ev(z), rtol=1e-13, atol=1e-14)


def test_boundary_compatibility_check():
    with pytest.raises(ValueError, match="does not vanish"):
        oc_manufactured(lambda x, v: (1 - x * x) * (1 - v * v), 1.0, EPS, M)


def test_targets():
    D = targets()
    assert D["D1"](0.0, 0.0) == 1.0
    assert D["D1"](0.3, 0.0) == 0.0
    assert D["D2"](0.3, 0.3) == 0.0
    assert D["D2"](0.1, 0.1) == 1.0
    assert D["D_time"](0.5)(0.0, 0.0) == pytest.approx(2.0)
    assert D["D_time"](0.0)(0.0, 0.0) == 0.0
    assert np.allclose(D["D2"].gradient(np.zeros(3), np.zeros(3)), 0)


def test_d1_gradient_inside_support():
    D1 = targets()["D1"]
    x, v, h = 0.1, 0.2, 1e-6
    fd = [(D1(x + h, v) - D1(x - h, v)) / (2 * h), (D1(x, v + h) - D1(x, v - h)) / (2 * h)]
    assert np.allclose(D1.gradient(x, v), fd, rtol=1e-6)
    assert np.allclose(D1.gradient(0.5, 0.5), 0)


def test_zero_and_scaled_evaluators():
    x = np.linspace(0, 1, 4)
    assert ZERO(x, x).shape == (4,) and ZERO.gradient(x, x).shape == (4, 2)
    s = targets()["D_time"](0.25).scaled(3.0)
    assert s(0.0, 0.0) == pytest.approx(3.0)


def test_kolmogorov_jet_matches_forcing():
    j = eval_jet(sin4_benchmark, np.array([0.1, 0.4]), np.array([-0.3, 0.7]), 5)
    k = kolmogorov(j, EPS)
    f, g = primal_forcing(j, EPS)
    assert np.allclose(k.value, f) and np.allclose(k.grad(), g)
    assert isinstance(k, Jet) and k.order == 3
