import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypokfem.analysis import l2_norm
from hypokfem.manufactured import sin4_benchmark
from hypokfem.mesh import build_structured
from hypokfem.space import (Constraint, DiscreteField, apply_constraints, build_space,
                            l2_project, mass_matrix, nodal_project)


@pytest.mark.parametrize("n, r, N", [(1, 2, 9), (4, 3, 169), (8, 2, 289), (3, 4, 169)])
def test_dof_count(n, r, N):
    assert build_space(build_structured(n, n), r).n_dofs == N


def test_full_size_dof_count():
    space = build_space(build_structured(90, 90), 2)
    assert space.n_dofs == 32761
    assert 2 * space.n_dofs == 65522


def test_shared_dofs_coincide():
    space = build_space(build_structured(3, 3), 3)
    # each global DOF has a single coordinate, whichever cell references it
    X = space.mesh.vertices[space.mesh.cells]
    J = space.cell_jac
    local = np.einsum("cab,kb->cka", J, space.basis.nodes) + X[:, :1]
    assert np.allclose(local, space.dof_coords[space.cell_dofs], atol=1e-14)


@pytest.mark.parametrize("r", [2, 3, 4])
def test_constrained_sets(r):
    space = build_space(build_structured(4, 4), r)
    x, v = space.dof_coords.T
    on = lambda idx: set(idx.tolist())
    lids = np.flatnonzero(np.isclose(np.abs(v), 1))
    assert on(lids) <= on(space.minus_dofs) and on(lids) <= on(space.plus_dofs)
    left_up = np.flatnonzero(np.isclose(x, -1) & (v > 1e-12))
    right_up = np.flatnonzero(np.isclose(x, 1) & (v > 1e-12))
    assert on(left_up) <= on(space.minus_dofs) and not on(left_up) & on(space.plus_dofs) - on(lids)
    assert on(right_up) <= on(space.plus_dofs) and not on(right_up) & on(space.minus_dofs) - on(lids)
    assert len(space.minus_dofs) == len(space.plus_dofs)
    # interior nodes are never constrained
    inside = np.flatnonzero((np.abs(x) < 1 - 1e-12) & (np.abs(v) < 1 - 1e-12))
    assert not on(inside) & (on(space.minus_dofs) | on(space.plus_dofs))


def test_apply_constraints(space8):
    ones = DiscreteField(space8, np.ones(space8.n_dofs), Constraint.MINUS)
    out = apply_constraints(ones.copy())
    assert np.all(out.coeffs[space8.minus_dofs] == 0)
    free = np.setdiff1d(np.arange(space8.n_dofs), space8.minus_dofs)
    assert np.all(out.coeffs[free] == 1)
    assert np.array_equal(apply_constraints(out.copy()).coeffs, out.coeffs)
    zero = space8.zeros(Constraint.PLUS)
    assert not apply_constraints(zero).coeffs.any()


def test_field_shape_checked(space8):
    with pytest.raises(ValueError):
        DiscreteField(space8, np.zeros(3))


def test_field_arithmetic(space8, rng):
    a = DiscreteField(space8, rng.standard_normal(space8.n_dofs))
    b = DiscreteField(space8, rng.standard_normal(space8.n_dofs))
    assert np.allclose((a + b).coeffs, a.coeffs + b.coeffs)
    assert np.allclose((a - b).coeffs, a.coeffs - b.coeffs)
    assert np.allclose((2 * a).coeffs, (a * 2).coeffs)


@pytest.mark.parametrize("r", [2, 3, 4])
def test_mass_matrix_sums_to_area(r):
    space = build_space(build_structured(3, 5, 2.0), r)
    M = mass_matrix(space)
    assert M.sum() == pytest.approx(8.0, rel=1e-13)
    assert abs(M - M.T).max() < 1e-15


@pytest.mark.parametrize("r", [2, 3, 4])
def test_interpolation_reproduces_polynomials(r):
    space = build_space(build_structured(3, 3), r)
    g = lambda x, v: (1 + x - 2 * v) ** r + x * v
    u = space.interpolate(g)
    assert l2_norm(u, g) < 1e-12


@pytest.mark.parametrize("r", [2, 3, 4])
def test_l2_projection_reproduces_polynomials(r):
    space = build_space(build_structured(3, 3), r)
    g = lambda x, v: x ** r - 0.5 * v ** (r - 1) + x * v + 2
    u = l2_project(space, g)
    assert np.abs(u.coeffs - g(*space.dof_coords.T)).max() < 1e-10


def test_l2_projection_of_zero(space8):
    u = l2_project(space8, lambda x, v: 0 * x, Constraint.MINUS)
    assert not u.coeffs.any()
    assert u.tag is Constraint.MINUS


@pytest.mark.parametrize("r", [2, 3])
def test_l2_projection_order(r):
    errs = []
    for n in (16, 32):
        space = build_space(build_structured(n, n), r)
        errs.append(l2_norm(l2_project(space, sin4_benchmark), sin4_benchmark))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(r + 1, abs=0.3)


def test_nodal_project_examples(space8):
    f = DiscreteField(space8, np.full(space8.n_dofs, -5.0))
    assert not nodal_project(f, 0.0).coeffs.any()
    g = DiscreteField(space8, np.linspace(0, 1, space8.n_dofs))
    assert np.array_equal(nodal_project(g, 0, 1).coeffs, g.coeffs)
    small = build_space(build_structured(1, 1), 2)
    c = np.zeros(9)
    c[:3] = (-1, 0.5, 2)
    assert np.array_equal(nodal_project(DiscreteField(small, c), 0, 1).coeffs[:3], (0, 0.5, 1))
    with pytest.raises(ValueError):
        nodal_project(g, 1, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=9, max_size=9),
       st.lists(st.floats(-1e6, 1e6), min_size=9, max_size=9),
       st.floats(-10, 0), st.floats(0, 10))
def test_nodal_project_properties(a, b, lo, hi):
    space = build_space(build_structured(1, 1), 2)
    fa, fb = DiscreteField(space, a), DiscreteField(space, b)
    pa, pb = nodal_project(fa, lo, hi), nodal_project(fb, lo, hi)
    assert np.array_equal(nodal_project(pa, lo, hi).coeffs, pa.coeffs)
    assert np.abs(pa.coeffs - pb.coeffs).max() <= np.abs(fa.coeffs - fb.coeffs).max()


def test_csv_and_vtk(tmp_path, space8):
    u = space8.interpolate(sin4_benchmark, Constraint.MINUS)
    u.write_csv(tmp_path / "u.csv", header="run 1")
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "# run 1" and lines[1] == "dof_index,x,v,value"
    assert len(lines) == 2 + space8.n_dofs
    i, x, v, val = lines[5].split(",")
    assert float(val) == u.coeffs[int(i)]
    u.write_vtk(tmp_path / "u.vtk", name="U")
    text = (tmp_path / "u.vtk").read_text()
    assert f"POINTS {space8.n_dofs} double" in text
    # r^2 sub-triangles per cell
    assert f"CELLS {4 * space8.mesh.n_cells} " in text
    assert "SCALARS U double 1" in text
