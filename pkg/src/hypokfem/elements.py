"""Reference-element machinery: Lagrange bases, quadrature, 2x2 matrix helpers.

The reference triangle is ``{(xi, eta) : xi, eta >= 0, xi + eta <= 1}`` and
the reference edge is ``[0, 1]``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

SUPPORTED_DEGREES = (2, 3, 4)
MAX_EXACTNESS = 20


@dataclass(frozen=True)
class QuadRule:
    """Quadrature rule on a reference cell.

    ``points`` has shape ``(n, dim)``; ``weights`` sum to the reference measure.
    """

    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def __len__(self):
        return len(self.weights)


def _check_exactness(exactness):
    if int(exactness) != exactness or exactness < 0 or exactness > MAX_EXACTNESS:
        raise ValueError(
            f"unsupported quadrature exactness {exactness!r}; "
            f"expected an integer in [0, {MAX_EXACTNESS}]")
    return int(exactness)


@lru_cache(maxsize=None)
def triangle_rule(exactness):
    """Collapsed Gauss-Jacobi rule on the reference triangle.

    Tensor rule on the unit square pulled back through the Duffy map
    ``(s, t) -> (s (1 - t), t)``; all weights are positive and the rule is
    exact for every polynomial of total degree ``<= exactness``.
    """
    exactness = _check_exactness(exactness)
    n = max(1, (exactness + 2) // 2)
    xs, ws = roots_legendre(n)
    s = 0.5 * (xs + 1.0)
    ws = 0.5 * ws
    # weight (1 - x)^1 absorbs the Jacobian of the collapse
    xt, wt = roots_jacobi(n, 1.0, 0.0)
    t = 0.5 * (xt + 1.0)
    wt = 0.25 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([(S * (1.0 - T)).ravel(), T.ravel()])
    rule = QuadRule(pts, W.ravel(), exactness)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def edge_rule(exactness):
    """Gauss-Legendre rule on ``[0, 1]``."""
    exactness = _check_exactness(exactness)
    n = max(1, (exactness + 2) // 2)
    x, w = roots_legendre(n)
    rule = QuadRule((0.5 * (x + 1.0))[:, None], 0.5 * w, exactness)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def _monomial_exponents(r):
    return [(p, q) for p in range(r + 1) for q in range(r + 1 - p)]


def _falling(p, k):
    out = 1.0
    for i in range(k):
        out *= p - i
    return out


class LagrangeBasis:
    """Equispaced Lagrange basis of degree ``r`` on the reference triangle.

    Nodes are ordered lexicographically in the lattice indices ``(i, j)``
    with ``xi = i / r``, ``eta = j / r``.
    """

    def __init__(self, r):
        if r not in SUPPORTED_DEGREES:
            raise ValueError(f"degree must be one of {SUPPORTED_DEGREES}, got {r!r}")
        self.degree = r
        self.lattice = np.array([(i, j) for i in range(r + 1) for j in range(r + 1 - i)])
        self.nodes = self.lattice / r
        self._exps = _monomial_exponents(r)
        V = self._monomials(self.nodes, 0, 0)
        self._coeffs = np.linalg.solve(V, np.eye(len(self.nodes)))

    @property
    def dim(self):
        return len(self.nodes)

    def _monomials(self, pts, dx, dy):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        cols = []
        for p, q in self._exps:
            if p < dx or q < dy:
                cols.append(np.zeros_like(x))
            else:
                c = _falling(p, dx) * _falling(q, dy)
                cols.append(c * x ** (p - dx) * y ** (q - dy))
        return np.column_stack(cols)

    def tabulate(self, points):
        """Values, gradients and Hessians at reference points.

        Returns arrays of shape ``(P, n)``, ``(P, n, 2)`` and ``(P, n, 2, 2)``.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        C = self._coeffs
        val = self._monomials(pts, 0, 0) @ C
        gx = self._monomials(pts, 1, 0) @ C
        gy = self._monomials(pts, 0, 1) @ C
        hxx = self._monomials(pts, 2, 0) @ C
        hxy = self._monomials(pts, 1, 1) @ C
        hyy = self._monomials(pts, 0, 2) @ C
        grad = np.stack([gx, gy], axis=-1)
        hess = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
        return val, grad, hess


@lru_cache(maxsize=None)
def lagrange_basis(r):
    return LagrangeBasis(r)


def tabulate(basis, point):
    """Tabulate ``basis`` at a single point or an array of points."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    val, grad, hess = basis.tabulate(pts)
    if single:
        return val[0], grad[0], hess[0]
    return val, grad, hess


def eig_sym_2x2(A):
    """Eigenvalues ``(lam_min, lam_max)`` of a symmetric 2x2 matrix."""
    A = np.asarray(A, dtype=float)
    a, b, c = A[0, 0], 0.5 * (A[0, 1] + A[1, 0]), A[1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return mean - rad, mean + rad


def sqrt_psd_2x2(M, tol=1e-14):
    """Symmetric PSD square root of a symmetric 2x2 matrix.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything below ``-tol``
    is rejected.
    """
    M = np.asarray(M, dtype=float)
    a, b, c = M[0, 0], 0.5 * (M[0, 1] + M[1, 0]), M[1, 1]
    lo, hi = eig_sym_2x2(M)
    if lo < -tol:
        raise ValueError(f"matrix is not positive semi-definite (eigenvalue {lo:.3e})")
    lo, hi = max(lo, 0.0), max(hi, 0.0)
    if hi - lo <= 1e-15 * max(1.0, abs(hi)):
        return np.sqrt(hi) * np.eye(2)
    # eigenvector of hi from whichever row of (M - hi I) is better conditioned
    e1 = np.array([b, hi - a])
    e2 = np.array([hi - c, b])
    e = e1 if np.dot(e1, e1) >= np.dot(e2, e2) else e2
    e = e / np.linalg.norm(e)
    P = np.outer(e, e)
    return np.sqrt(hi) * P + np.sqrt(lo) * (np.eye(2) - P)
