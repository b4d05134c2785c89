"""Continuous Lagrange spaces on a mesh, boundary-constrained subspaces, projections."""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .elements import lagrange_basis, triangle_rule


class Constraint(Enum):
    FREE = "free"
    MINUS = "minus"   # zero on the closure of Gamma^- and Gamma_0
    PLUS = "plus"     # zero on the closure of Gamma^+ and Gamma_0


class FunctionSpace:
    """Global C^0 Lagrange space of degree ``r``.

    Attributes
    ----------
    cell_dofs : (n_cells, n_local) int array
        Local-to-global map; local ordering follows the reference basis.
    dof_coords : (N, 2) array
        Physical coordinates of the Lagrange nodes.
    minus_dofs, plus_dofs : int arrays
        DOFs on the closed inflow-plus-wall and outflow-plus-wall boundary parts.
    """

    def __init__(self, mesh, r):
        self.mesh = mesh
        self.basis = lagrange_basis(r)
        self.degree = r
        X = mesh.vertices[mesh.cells]
        self.cell_origin = X[:, 0]
        J = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=-1)
        self.cell_jac = J
        self.cell_det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(self.cell_det <= 0):
            raise ValueError("cells must be counter-clockwise with positive area")
        self.cell_jinv = np.linalg.inv(J)

        local = np.einsum("cab,kb->cka", J, self.basis.nodes) + self.cell_origin[:, None, :]
        scale = max(mesh.x_max, 1.0)
        key = np.round(local.reshape(-1, 2) / scale * 1e9).astype(np.int64)
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        self.cell_dofs = inv.reshape(len(mesh.cells), -1)
        self.dof_coords = local.reshape(-1, 2)[first]
        self.n_dofs = len(first)
        self.minus_dofs, self.plus_dofs = self._boundary_dofs()
        for arr in (self.cell_dofs, self.dof_coords, self.minus_dofs, self.plus_dofs):
            arr.setflags(write=False)

    def _boundary_dofs(self):
        x, v = self.dof_coords[:, 0], self.dof_coords[:, 1]
        tol = 1e-10 * max(self.mesh.x_max, 1.0)
        left = np.abs(x + self.mesh.x_max) <= tol
        right = np.abs(x - self.mesh.x_max) <= tol
        lids = np.abs(np.abs(v) - 1.0) <= tol
        minus = lids | (left & (v >= -tol)) | (right & (v <= tol))
        plus = lids | (left & (v <= tol)) | (right & (v >= -tol))
        return np.flatnonzero(minus), np.flatnonzero(plus)

    def constrained(self, tag):
        tag = Constraint(tag)
        if tag is Constraint.MINUS:
            return self.minus_dofs
        if tag is Constraint.PLUS:
            return self.plus_dofs
        return np.zeros(0, dtype=np.int64)

    def free_mask(self, tag):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained(tag)] = False
        return mask

    def cell_geometry(self, rule):
        """Physical quadrature points, weights and basis derivatives per cell.

        Returns ``pts (C, Q, 2)``, ``wdet (C, Q)``, ``phi (Q, n)``,
        ``grad (C, Q, n, 2)`` and ``hess (C, Q, n, 2, 2)``.
        """
        phi, dref, href = self.basis.tabulate(rule.points)
        G = self.cell_jinv
        pts = np.einsum("cab,qb->cqa", self.cell_jac, rule.points) + self.cell_origin[:, None, :]
        grad = np.einsum("qnb,cba->cqna", dref, G)
        hess = np.einsum("cea,qned,cdb->cqnab", G, href, G)
        wdet = rule.weights[None, :] * self.cell_det[:, None]
        return pts, wdet, phi, grad, hess

    def to_reference(self, cells, points):
        """Reference coordinates of physical ``points`` (…, 2) in ``cells`` (…)."""
        d = points - self.cell_origin[cells]
        return np.einsum("...ab,...b->...a", self.cell_jinv[cells], d)

    def interpolate(self, g, tag=Constraint.FREE):
        """Nodal interpolant of ``g(x, v)``."""
        c = np.asarray(g(self.dof_coords[:, 0], self.dof_coords[:, 1]), dtype=float)
        c = np.broadcast_to(c, (self.n_dofs,)).copy()
        return apply_constraints(DiscreteField(self, c, Constraint(tag)))

    def zeros(self, tag=Constraint.FREE):
        return DiscreteField(self, np.zeros(self.n_dofs), Constraint(tag))

    def sub_triangles(self):
        """Split every cell into ``r^2`` straight sub-triangles on its Lagrange nodes."""
        r = self.degree
        lookup = {tuple(ij): k for k, ij in enumerate(self.basis.lattice)}
        loc = []
        for i in range(r):
            for j in range(r - i):
                loc.append((lookup[i, j], lookup[i + 1, j], lookup[i, j + 1]))
                if i + j < r - 1:
                    loc.append((lookup[i + 1, j], lookup[i + 1, j + 1], lookup[i, j + 1]))
        loc = np.array(loc)
        return self.cell_dofs[:, loc].reshape(-1, 3)


def build_space(mesh, r):
    return FunctionSpace(mesh, r)


@dataclass
class DiscreteField:
    """Coefficient vector of a finite element function with its constraint tag."""

    space: FunctionSpace
    coeffs: np.ndarray
    tag: Constraint = Constraint.FREE

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        self.tag = Constraint(self.tag)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} coefficients, got {self.coeffs.shape}")

    def copy(self):
        return DiscreteField(self.space, self.coeffs.copy(), self.tag)

    def __add__(self, other):
        return DiscreteField(self.space, self.coeffs + other.coeffs, self.tag)

    def __sub__(self, other):
        return DiscreteField(self.space, self.coeffs - other.coeffs, self.tag)

    def __mul__(self, s):
        return DiscreteField(self.space, s * self.coeffs, self.tag)

    __rmul__ = __mul__

    def write_csv(self, path, header=None):
        """CSV with columns ``dof_index,x,v,value``."""
        xy = self.space.dof_coords
        with open(path, "w") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write("dof_index,x,v,value\n")
            for i in range(len(self.coeffs)):
                fh.write(f"{i},{xy[i, 0]:.17g},{xy[i, 1]:.17g},{self.coeffs[i]:.17g}\n")

    def write_vtk(self, path, name="u", header=None):
        write_vtk(path, self.space, {name: self.coeffs}, header=header)


def write_vtk(path, space, point_data, header=None):
    """Legacy ASCII VTK unstructured grid on the Lagrange-node sub-triangulation."""
    tris = space.sub_triangles()
    xy = space.dof_coords
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write((header or "hypokfem field") + "\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(xy)} double\n")
        for x, v in xy:
            fh.write(f"{x:.17g} {v:.17g} 0\n")
        fh.write(f"CELLS {len(tris)} {4 * len(tris)}\n")
        for a, b, c in tris:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {len(tris)}\n")
        fh.write("5\n" * len(tris))
        fh.write(f"POINT_DATA {len(xy)}\n")
        for name, vals in point_data.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.writelines(f"{val:.17g}\n" for val in vals)


def apply_constraints(field):
    """Zero the coefficients the field's tag constrains (in place and returned)."""
    field.coeffs[field.space.constrained(field.tag)] = 0.0
    return field


def mass_matrix(space, rule=None):
    """Plain L^2 mass matrix (unconstrained)."""
    rule = rule or triangle_rule(2 * space.degree + 2)
    phi, _, _ = space.basis.tabulate(rule.points)
    local = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
    vals = space.cell_det[:, None, None] * local[None]
    return _scatter(space, vals)


def _scatter(space, local, rows=None, cols=None):
    """Sum local ``(E, n_test, n_trial)`` matrices into a CSR matrix."""
    rows = space.cell_dofs if rows is None else rows
    cols = rows if cols is None else cols
    n_r, n_c = rows.shape[1], cols.shape[1]
    I = np.repeat(rows, n_c, axis=1).ravel()
    J = np.tile(cols, (1, n_r)).ravel()
    A = sp.coo_matrix((local.ravel(), (I, J)), shape=(space.n_dofs, space.n_dofs)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def l2_project(space, g, tag=Constraint.FREE, rule=None):
    """L^2 projection of ``g(x, v)`` onto the (constrained) space."""
    from .linalg import restrict, solve

    rule = rule or triangle_rule(min(2 * space.degree + 2, 20))
    pts, wdet, phi, _, _ = space.cell_geometry(rule)
    gq = np.broadcast_to(np.asarray(g(pts[..., 0], pts[..., 1]), float), wdet.shape)
    b = np.zeros(space.n_dofs)
    np.add.at(b, space.cell_dofs, np.einsum("cq,qi->ci", wdet * gq, phi))
    tag = Constraint(tag)
    mask = space.free_mask(tag)
    b[~mask] = 0.0
    A = restrict(mass_matrix(space), mask, mask)
    c, _ = solve(A, b, tol=1e-12)
    return apply_constraints(DiscreteField(space, c, tag))


def nodal_project(field, lo=-np.inf, hi=np.inf):
    """Clamp every coefficient into ``[lo, hi]`` (nodal box projection)."""
    if lo > hi:
        raise ValueError(f"empty box [{lo}, {hi}]")
    return DiscreteField(field.space, np.clip(field.coeffs, lo, hi), field.tag)
