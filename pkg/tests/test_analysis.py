import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypokfem import HParams, build_space, build_structured
from hypokfem import analysis as an
from hypokfem.experiments import primal_convergence
from hypokfem.manufactured import Exact, sin4_benchmark, targets
from hypokfem.space import Constraint, DiscreteField, l2_project

P = HParams()
ZERO_M = np.zeros((2, 2))


def random_field(space, seed, tag=Constraint.FREE):
    c = np.random.default_rng(seed).standard_normal(space.n_dofs)
    c[space.constrained(tag)] = 0.0
    return DiscreteField(space, c, tag)


def interior_field(space, seed):
    """Random coefficients on DOFs whose support misses the boundary."""
    mesh = space.mesh
    cells = np.unique(mesh.facet_cells[mesh.boundary_facets, 0])
    c = np.random.default_rng(seed).standard_normal(space.n_dofs)
    c[np.unique(space.cell_dofs[cells])] = 0.0
    return DiscreteField(space, c)


def test_h_norm_examples(space8):
    assert an.h_norm(space8.zeros(), P.M) == 0.0
    one = DiscreteField(space8, np.ones(space8.n_dofs))
    assert an.h_norm(one, ZERO_M) == pytest.approx(2.0, rel=1e-14)
    assert an.h_norm(one, P.M) == pytest.approx(2.0, rel=1e-14)


def test_h_norm_with_zero_M_is_l2(space8):
    w = random_field(space8, 3)
    assert an.h_norm(w, ZERO_M) == pytest.approx(an.l2_norm(w), rel=1e-14)


def test_h_norm_of_linear_field():
    space = build_space(build_structured(2, 2), 2)
    w = space.interpolate(lambda x, v: x)
    # ||x||^2 = 4/3 on (-1,1)^2 and ||sqrt(M) e_x||^2 = 4 M11
    assert an.h_norm(w, P.M) ** 2 == pytest.approx(4 / 3 + 4 * P.M[0, 0], rel=1e-14)
    assert an.grad_l2_norm(w) == pytest.approx(2.0, rel=1e-14)


def test_errors_against_exact_field():
    space = build_space(build_structured(4, 4), 4)
    g = lambda x, v: x ** 2 * v - v ** 3
    exact = Exact(g)
    w = space.interpolate(g)
    assert an.h_norm(w, P.M, exact) < 1e-13
    assert an.l2_norm(w, exact) < 1e-13
    assert an.triple_norm(w, an.PRIMAL, P, exact) < 1e-12


def test_triple_norm_zero_and_variants(space8):
    assert an.triple_norm(space8.zeros(), an.PRIMAL, P) == 0.0
    w = interior_field(space8, 5)
    assert an.triple_norm(w, an.PRIMAL, P) == pytest.approx(an.triple_norm(w, an.DUAL, P), rel=1e-12)
    with pytest.raises(ValueError):
        an.triple_norm(w, "both", P)


def test_triple_norm_of_polynomial_has_no_jump_part():
    space = build_space(build_structured(4, 4), 3)
    w = space.interpolate(lambda x, v: (x + v) ** 3 - x * v)
    total = an.triple_norm(w, an.PRIMAL, P)
    without = an.triple_norm(w, an.PRIMAL, P.with_(C_sigma=0.0))
    assert total ** 2 - without ** 2 <= 1e-12 * total ** 2


def test_cost_examples(space8):
    D = targets()["D_time"](0.25)
    U = space8.interpolate(D)
    F = random_field(space8, 1)
    assert an.cost(U, space8.zeros(), D, P) < 1e-2
    c1, c2 = an.cost(U, F, D, P), an.cost(U, F, D, P.with_(alpha=2.0))
    assert c2 - c1 == pytest.approx(0.5 * an.h_norm(F, P.M) ** 2, rel=1e-12)


def test_cost_trajectory_trapezoid(space8):
    D = targets()["D_time"]
    times = np.linspace(0, 1, 5)
    U = [space8.zeros()] * 5
    F = [DiscreteField(space8, np.ones(space8.n_dofs))] * 5
    J = an.cost_trajectory(times, U, F, [D(t) for t in times], P)
    E = [an.cost(u, f, D(t), P) for u, f, t in zip(U, F, times)]
    assert J == pytest.approx(0.25 * (sum(E) - 0.5 * (E[0] + E[-1])), rel=1e-14)


def test_eoc_examples():
    assert an.eoc([1, 0.5], [1, 0.5]) == pytest.approx([1.0])
    assert an.eoc([1, 0.5], [1, 1 / 8]) == pytest.approx([3.0])
    assert np.allclose(an.eoc([1, 0.5, 0.25], [1, 0.25, 1 / 16]), 2)


@pytest.mark.parametrize("h, err", [([1, 1], [1, 1]), ([0.5, 1], [1, 1]), ([1], [1]),
                                    ([1, 0.5], [1, -1]), ([1, 0.5], [1])])
def test_eoc_rejects_bad_tables(h, err):
    with pytest.raises(ValueError):
        an.eoc(h, err)


def test_fill_eoc_and_csv(tmp_path):
    rows = an.fill_eoc([an.ErrorReport(1.0, 9, 1.0, 2.0), an.ErrorReport(0.5, 25, 0.25, 1.0)])
    assert rows[1].eoc_H == pytest.approx(2) and rows[1].eoc_triple == pytest.approx(1)
    an.write_error_csv(tmp_path / "e.csv", rows, header="h1")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "# h1" and lines[1] == ",".join(an.CSV_COLUMNS)
    assert float(lines[3].split(",")[5]) == rows[1].eoc_H


def test_constants_of_default_family():
    c = an.constants(P)
    assert c.lam_plus_M == pytest.approx(0.1 * 0.35 * (0.35 ** 2 + 1), rel=1e-13)
    assert c.lam_plus_M == pytest.approx(0.0392875, rel=1e-12)
    assert c.lam_minus_M == pytest.approx(0.0, abs=1e-16)
    assert c.C_eq_plus == 1.0
    lam_N = np.linalg.eigvalsh(P.N)[0]
    assert c.lam_minus_N == pytest.approx(lam_N, rel=1e-13)
    assert c.delta_tilde == pytest.approx(lam_N / (8 / np.pi ** 2 + 1), rel=1e-13)
    assert set(c.as_dict()) >= {"delta_tilde", "C_eq_plus"}


def test_constants_without_hypocoercivity():
    c = an.constants(P.with_(m=0.0))
    assert c.lam_minus_N == 0.0 and c.delta_tilde == 0.0


def test_decay_report_examples():
    t = np.linspace(0, 3, 31)
    assert an.decay_report(t, np.ones_like(t)) == (True, pytest.approx(0.0, abs=1e-12))
    mono, rate = an.decay_report(t, np.exp(-2 * t), squared=True)
    assert mono and rate == pytest.approx(2.0, abs=1e-8)
    # H-norms e^{-t} have squares e^{-2t}
    assert an.decay_report(t, np.exp(-t))[1] == pytest.approx(2.0, abs=1e-8)
    assert not an.decay_report(t, 1 + 0.1 * np.sin(t))[0]
    with pytest.raises(ValueError):
        an.decay_report([0, 1], [1, 1])


def test_norm_equivalence_sandwich():
    space = build_space(build_structured(4, 4), 2)
    ceq = an.constants(P).C_eq_plus
    for seed in range(200):
        w = random_field(space, seed)
        h2, l2, g2 = an.h_norm(w, P.M) ** 2, an.l2_norm(w) ** 2, an.grad_l2_norm(w) ** 2
        assert l2 <= h2 * (1 + 1e-14)
        assert h2 <= ceq * (l2 + g2) * (1 + 1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 2.0), st.floats(0.01, 1.0))
def test_discrete_norm_relation(seed, m, eps):
    q = HParams(eps=eps, m=m)
    space = build_space(build_structured(4, 4), 2)
    w = random_field(space, seed, Constraint.MINUS)
    cp = 2 * np.sqrt(1 + q.x_max ** 2) / np.pi
    bound = cp ** 2 + an.constants(q).lam_plus_M
    assert an.h_norm(w, q.M) ** 2 <= bound * an.triple_norm(w, an.PRIMAL, q) ** 2


@pytest.mark.parametrize("r", [2, 3, 4])
def test_l2_projection_recovers_order(r):
    errs = []
    hs = []
    for n in (8, 16):
        space = build_space(build_structured(n, n), r)
        errs.append(an.l2_norm(l2_project(space, sin4_benchmark), sin4_benchmark))
        hs.append(space.mesh.h)
    assert an.eoc(hs, errs)[0] == pytest.approx(r + 1, abs=0.35)


def test_primal_convergence_table():
    table = primal_convergence(P, ns=(4, 8), rs=(2,))
    row = table[2][-1]
    assert row.err_H > 0 and row.err_triple > 0 and np.isfinite(row.eoc_triple)
