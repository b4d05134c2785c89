"""Bilinear and linear forms of the hypocoercive discretisation.

Matrices follow the row = test, column = trial convention, so the primal
operator has ``A[i, j] = a_h(phi_j, phi_i) + s_h(phi_j, phi_i)``.  The
adjoint operator has ``A*[i, j] = a_h*(phi_j, phi_i) = a_h(phi_i, phi_j)``
plus the adjoint stabilisation.

Facet terms use the stored facet normal to pick the "+" side: the first
adjacent cell.  Jumps of gradients are ``n_v (grad+ - grad-)`` on interior
facets and ``n_v grad`` on boundary facets, where the average is the one-sided
trace.
"""

from dataclasses import dataclass

import numpy as np

from .elements import edge_rule, triangle_rule
from .linalg import restrict
from .mesh import FacetLabel
from .space import Constraint, _scatter


def volume_rule(space):
    return triangle_rule(min(2 * space.degree + 2, 20))


def facet_rule(space):
    return edge_rule(min(2 * space.degree + 1, 20))


@dataclass
class FacetTraces:
    """Traces of the local basis on a group of facets, at edge quadrature points.

    Interior groups have ``2 n`` combined local DOFs (the "+" cell first);
    ``grad_m``/``hess_m`` are then the "-" traces.  Boundary groups have ``n``
    local DOFs and no "-" side.
    """

    facets: np.ndarray
    points: np.ndarray    # (F, Q, 2)
    weights: np.ndarray   # (F, Q), edge length included
    normals: np.ndarray   # (F, 2)
    h: np.ndarray         # (F,)
    dofs: np.ndarray      # (F, k)
    phi_p: np.ndarray     # (F, Q, k)
    grad_p: np.ndarray    # (F, Q, k, 2)
    hess_p: np.ndarray    # (F, Q, k, 2, 2)
    phi_m: np.ndarray = None
    grad_m: np.ndarray = None
    hess_m: np.ndarray = None

    @property
    def interior(self):
        return self.grad_m is not None

    def grad_jump(self):
        """``[grad phi]_v`` per local DOF, shape (F, Q, k, 2)."""
        nv = self.normals[:, 1][:, None, None, None]
        g = self.grad_p - self.grad_m if self.interior else self.grad_p
        return nv * g

    def grad_diff(self):
        """``grad+ - grad-`` (the one-sided gradient on the boundary)."""
        return self.grad_p - self.grad_m if self.interior else self.grad_p

    def grad_avg(self):
        return 0.5 * (self.grad_p + self.grad_m) if self.interior else self.grad_p

    def hess_avg(self):
        return 0.5 * (self.hess_p + self.hess_m) if self.interior else self.hess_p


def _side(space, cells, pts):
    F, Q = pts.shape[:2]
    ref = space.to_reference(np.repeat(cells[:, None], Q, axis=1), pts)
    phi, dref, href = space.basis.tabulate(ref.reshape(-1, 2))
    n = phi.shape[1]
    phi = phi.reshape(F, Q, n)
    dref = dref.reshape(F, Q, n, 2)
    href = href.reshape(F, Q, n, 2, 2)
    G = space.cell_jinv[cells]
    grad = np.einsum("fqnb,fba->fqna", dref, G)
    hess = np.einsum("fea,fqned,fdb->fqnab", G, href, G)
    return phi, grad, hess


def facet_traces(space, facets, rule=None):
    """Basis traces on ``facets``; all must be interior or all on the boundary."""
    rule = rule or facet_rule(space)
    mesh = space.mesh
    facets = np.asarray(facets, dtype=np.int64)
    fc = mesh.facet_cells[facets]
    interior = fc[:, 1] >= 0
    if interior.any() and not interior.all():
        raise ValueError("facet group mixes interior and boundary facets")
    X = mesh.vertices[mesh.facet_vertices[facets]]
    s = rule.points[:, 0]
    pts = X[:, None, 0, :] + s[None, :, None] * (X[:, None, 1, :] - X[:, None, 0, :])
    w = rule.weights[None, :] * mesh.facet_lengths[facets][:, None]
    normals = mesh.facet_normals[facets]
    h = mesh.facet_h[facets]
    phi0, g0, h0 = _side(space, fc[:, 0], pts)
    if len(facets) == 0 or not interior[0]:
        return FacetTraces(facets, pts, w, normals, h, space.cell_dofs[fc[:, 0]], phi0, g0, h0)
    phi1, g1, h1 = _side(space, fc[:, 1], pts)
    z = np.zeros_like
    dofs = np.concatenate([space.cell_dofs[fc[:, 0]], space.cell_dofs[fc[:, 1]]], axis=1)
    cat = lambda a, b: np.concatenate([a, b], axis=2)
    return FacetTraces(facets, pts, w, normals, h, dofs,
                       cat(phi0, z(phi1)), cat(g0, z(g1)), cat(h0, z(h1)),
                       cat(z(phi0), phi1), cat(z(g0), g1), cat(z(h0), h1))


def _facet_groups(space, labels=None):
    """Interior facets and the boundary facets whose label is in ``labels``."""
    mesh = space.mesh
    groups = [mesh.interior_facets]
    bnd = mesh.boundary_facets
    if labels is not None:
        bnd = bnd[np.isin(mesh.facet_labels[bnd], [int(l) for l in labels])]
    groups.append(bnd)
    return [facet_traces(space, g) for g in groups if len(g)]


def _boundary_traces(space):
    b = space.mesh.boundary_facets
    return facet_traces(space, b)


def _empty(space):
    return _scatter(space, np.zeros((0, 1, 1)), np.zeros((0, 1), np.int64))


# -- volume terms ---------------------------------------------------------

def _volume_local(space, p):
    """``L[c, w, phi] = a_h`` restricted to cell ``c`` with first argument ``w``."""
    rule = volume_rule(space)
    pts, wdet, _, G, H = space.cell_geometry(rule)
    phi = space.basis.tabulate(rule.points)[0]
    M, eps = np.asarray(p.M), p.eps
    v = pts[..., 1]
    # grad(v W_x) = (v W_xx, W_x + v W_xv); grad(W_v) = (W_xv, W_vv)
    T = np.stack([v[..., None] * H[..., 0, 0], G[..., 0] + v[..., None] * H[..., 0, 1]], axis=-1)
    Hv = H[..., :, 1]
    MG = G @ M
    MHv = Hv @ M
    L = np.einsum("cq,cqw,qf->cwf", wdet * v, G[..., 0], phi)
    L += np.einsum("cq,cqwa,cqfa->cwf", wdet, T, MG)
    L += eps * np.einsum("cq,cqw,cqf->cwf", wdet, G[..., 1], G[..., 1])
    L += eps * np.einsum("cq,cqwa,cqfa->cwf", wdet, Hv, MHv)
    return L


def volume_matrix(space, p, adjoint=False):
    """Unconstrained cell-sum part of ``a_h`` (or of ``a_h*``)."""
    L = _volume_local(space, p)
    # rows are test functions: the second argument of a_h for the primal,
    # the first argument of a_h for the adjoint
    local = L if adjoint else np.swapaxes(L, 1, 2)
    return _scatter(space, local)


# -- stabilisation --------------------------------------------------------

def _transport_weight(tr, adjoint, boundary="literal"):
    vnx = tr.points[..., 1] * tr.normals[:, 0][:, None]
    if tr.interior:
        return vnx
    if adjoint and boundary == "mirrored":
        return np.zeros_like(vnx)
    # boundary: inflow part for the primal, outflow part for the adjoint,
    # resolved pointwise so a facet straddling v = 0 is split correctly
    return np.minimum(vnx, 0.0) if not adjoint else np.maximum(vnx, 0.0)


def transport_jump_matrix(space, p, adjoint=False):
    """``s_{h,1}`` over interior and inflow facets (``s_{h,1}*``: outflow facets).

    ``s_{h,1}(U, Phi) = - int v n_x+ (grad U+ - grad U-)^T M {grad Phi}``;
    the adjoint puts the jump on the test function and the average on the trial.
    With ``p.adjoint_boundary == "mirrored"`` the adjoint keeps interior facets only.
    """
    M = np.asarray(p.M)
    out = _empty(space)
    for tr in _facet_groups(space):
        wt = tr.weights * _transport_weight(tr, adjoint, p.adjoint_boundary)
        D = tr.grad_diff() @ M
        A = tr.grad_avg()
        if adjoint:
            local = -np.einsum("fq,fqia,fqja->fij", wt, D, A)
        else:
            local = -np.einsum("fq,fqja,fqia->fij", wt, D, A)
        out = out + _scatter(space, local, tr.dofs)
    return out


def penalty_matrix(space, p):
    """``s_{h,2}``: symmetric interior penalty in ``grad(.)_v`` over interior and lid facets.

    ``- int eps ({M grad U_v} . [grad Phi]_v + {M grad Phi_v} . [grad U]_v)
    - sigma [grad U]_v^T M [grad Phi]_v`` with ``sigma = C_sigma r^2 / h_e``.
    The same form serves as ``s_{h,2}*``.
    """
    M, eps = np.asarray(p.M), p.eps
    r = space.degree
    out = _empty(space)
    for tr in _facet_groups(space, labels=[FacetLabel.GAMMA_ZERO]):
        sigma = p.C_sigma * r * r / tr.h
        J = tr.grad_jump()
        MJ = J @ M
        B = tr.hess_avg()[..., :, 1] @ M
        cons = np.einsum("fq,fqja,fqia->fij", tr.weights, B, J)
        local = -eps * (cons + np.swapaxes(cons, 1, 2))
        local += np.einsum("fq,fqja,fqia->fij", tr.weights * sigma[:, None], J, MJ)
        out = out + _scatter(space, local, tr.dofs)
    return out


def inflow_trace_matrix(space, p):
    """``int_{Gamma-} |v n_x| (Z Psi + grad Psi . M grad Z) ds``.

    Added to the adjoint in ``"mirrored"`` mode.  The literal adjoint leaves
    ``-1/2 ||H Z||^2_{Gamma-}`` in ``a_h*(Z, Z)``; this term flips it to
    ``+1/2``.  It vanishes on any ``z`` with zero trace and gradient on
    ``Gamma-``, so consistency is unaffected for such ``z``.
    """
    M = np.asarray(p.M)
    tr = _boundary_traces(space)
    vnx = tr.points[..., 1] * tr.normals[:, 0][:, None]
    wt = tr.weights * np.maximum(-vnx, 0.0)
    local = np.einsum("fq,fqi,fqj->fij", wt, tr.phi_p, tr.phi_p)
    local += np.einsum("fq,fqia,ab,fqjb->fij", wt, tr.grad_p, M, tr.grad_p)
    return _scatter(space, local, tr.dofs)


def stabilisation_matrix(space, p, adjoint=False):
    out = transport_jump_matrix(space, p, adjoint) + penalty_matrix(space, p)
    if adjoint and p.adjoint_boundary == "mirrored":
        out = out + inflow_trace_matrix(space, p)
    return out


# -- operators ------------------------------------------------------------

def assemble_h_mass(space, M):
    """Unconstrained matrix of ``(w, phi) + (grad w, M grad phi)``."""
    M = np.asarray(M, dtype=float)
    rule = volume_rule(space)
    _, wdet, phi, G, _ = space.cell_geometry(rule)
    local = np.einsum("cq,qi,qj->cij", wdet, phi, phi)
    local += np.einsum("cq,cqia,cqja->cij", wdet, G @ M, G)
    return _scatter(space, local)


def primal_operator(space, p):
    """Unconstrained ``a_h + s_h``."""
    return volume_matrix(space, p) + stabilisation_matrix(space, p)


def adjoint_operator(space, p):
    """Unconstrained ``a_h* + s_h*``."""
    return volume_matrix(space, p, adjoint=True) + stabilisation_matrix(space, p, adjoint=True)


def assemble_primal(space, p):
    """``a_h + s_h`` restricted to the MinusSet space (unit diagonal on constrained DOFs)."""
    mask = space.free_mask(Constraint.MINUS)
    return restrict(primal_operator(space, p), mask)


def assemble_adjoint(space, p):
    """``a_h* + s_h*`` restricted to the PlusSet space."""
    mask = space.free_mask(Constraint.PLUS)
    return restrict(adjoint_operator(space, p), mask)


def _eval(g, x, v):
    val = np.asarray(g(x, v), dtype=float)
    grad_fn = getattr(g, "gradient", None)
    grad = np.zeros(x.shape + (2,)) if grad_fn is None else np.asarray(grad_fn(x, v), float)
    return np.broadcast_to(val, x.shape), np.broadcast_to(grad, x.shape + (2,))


def assemble_rhs_h(space, g, M, tag=Constraint.FREE):
    """Load vector ``b_i = int g phi_i + grad g . M grad phi_i``.

    ``g`` is called as ``g(x, v)``; an optional ``g.gradient(x, v)`` supplies
    the (a.e.) gradient, taken as zero when absent.  Entries at DOFs
    constrained by ``tag`` are zeroed.
    """
    M = np.asarray(M, dtype=float)
    rule = volume_rule(space)
    pts, wdet, phi, G, _ = space.cell_geometry(rule)
    val, grad = _eval(g, pts[..., 0], pts[..., 1])
    loc = np.einsum("cq,cq,qi->ci", wdet, val, phi)
    loc += np.einsum("cq,cqa,cqia->ci", wdet, grad @ M, G)
    b = np.zeros(space.n_dofs)
    np.add.at(b, space.cell_dofs, loc)
    b[space.constrained(tag)] = 0.0
    return b


def boundary_h_sq(space, coeffs, M, side, exact=None):
    """``int_side (W^2 + grad W . M grad W) |v| ds`` for ``W = U - exact``.

    ``side`` is ``FacetLabel.GAMMA_MINUS`` or ``FacetLabel.GAMMA_PLUS``; the
    inflow/outflow split is applied pointwise via the sign of ``v n_x``.
    ``exact`` (optional) is called as ``exact(x, v)`` and supplies
    ``exact.gradient(x, v)``.
    """
    side = FacetLabel(side)
    if side not in (FacetLabel.GAMMA_MINUS, FacetLabel.GAMMA_PLUS):
        raise ValueError(f"side must be GAMMA_MINUS or GAMMA_PLUS, got {side.name}")
    M = np.asarray(M, dtype=float)
    tr = _boundary_traces(space)
    c = np.asarray(coeffs)[tr.dofs]
    val = np.einsum("fqk,fk->fq", tr.phi_p, c)
    grad = np.einsum("fqka,fk->fqa", tr.grad_p, c)
    if exact is not None:
        x, v = tr.points[..., 0], tr.points[..., 1]
        val = val - exact(x, v)
        grad = grad - exact.gradient(x, v)
    vnx = tr.points[..., 1] * tr.normals[:, 0][:, None]
    wt = np.maximum(vnx, 0.0) if side is FacetLabel.GAMMA_PLUS else np.maximum(-vnx, 0.0)
    dens = val ** 2 + np.einsum("fqa,ab,fqb->fq", grad, M, grad)
    return float(np.sum(tr.weights * wt * dens))


def boundary_h_seminorm(field, M, side):
    """``(int_side (W^2 + |sqrt(M) grad W|^2) |v| ds)^(1/2)``."""
    return np.sqrt(boundary_h_sq(field.space, field.coeffs, M, side))


def interior_jump_sq(space, coeffs, p):
    """``sigma || sqrt(M) [grad W]_v ||^2`` over interior facets."""
    M = np.asarray(p.M)
    idx = space.mesh.interior_facets
    if len(idx) == 0:
        return 0.0
    tr = facet_traces(space, idx)
    c = np.asarray(coeffs)[tr.dofs]
    J = np.einsum("fqka,fk->fqa", tr.grad_jump(), c)
    sigma = p.C_sigma * space.degree ** 2 / tr.h
    return float(np.sum(tr.weights * sigma[:, None] * np.einsum("fqa,ab,fqb->fq", J, M, J)))
