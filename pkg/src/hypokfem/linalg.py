"""Sparse linear algebra on top of scipy.sparse: restriction, block assembly, solves."""

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DIRECT_LIMIT = 200_000
DEFAULT_TOL = 1e-10
MAX_REFINE = 4


class LinearSolveError(RuntimeError):
    pass


class SingularMatrixError(LinearSolveError):
    pass


class BreakdownError(LinearSolveError):
    pass


class MaxIterationsError(LinearSolveError):
    pass


@dataclass
class LinearSolveReport:
    method: str
    iterations: int
    residual: float
    elapsed: float


def _as_csr(A):
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    return A @ x


def block_compose(blocks):
    """CSR matrix from a 2-D grid of sparse blocks (``None`` for zero blocks)."""
    try:
        return _as_csr(sp.bmat(blocks, format="csr"))
    except ValueError as exc:
        raise ValueError(f"block dimensions do not conform: {exc}") from None


def restrict(A, row_mask, col_mask=None, unit_diagonal=True):
    """Zero constrained rows/columns; put 1 on the diagonal of constrained rows.

    ``row_mask``/``col_mask`` are boolean "free" masks.  The unit diagonal is
    placed only where a row and its matching column are both constrained.
    """
    col_mask = row_mask if col_mask is None else col_mask
    R = sp.diags(row_mask.astype(float))
    C = sp.diags(col_mask.astype(float))
    out = R @ A @ C
    if unit_diagonal and A.shape[0] == A.shape[1]:
        fixed = (~row_mask) & (~col_mask)
        out = out + sp.diags(fixed.astype(float))
    return _as_csr(out)


def rounding_floor(A, x, b):
    """Smallest relative residual a double-precision product ``A x`` can resolve."""
    nb = np.linalg.norm(b)
    scale = np.linalg.norm(abs(A) @ np.abs(x) + np.abs(b))
    return 10.0 * np.finfo(float).eps * scale / nb if nb > 0 else 0.0


def relative_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0 else r


class Factorization:
    """Sparse LU (SuperLU) of a square operator, reusable across right-hand sides."""

    def __init__(self, A):
        self.A = sp.csc_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"matrix must be square, got {self.A.shape}")
        try:
            self._lu = spla.splu(self.A)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from None

    def solve(self, b, trans=False):
        return self._lu.solve(np.asarray(b, float), trans="T" if trans else "N")


def solve(A, b, tol=DEFAULT_TOL, method="auto", maxiter=2000, restart=100):
    """Solve ``A x = b``; returns ``(x, LinearSolveReport)``.

    ``method`` is ``"direct"``, ``"krylov"`` or ``"auto"`` (direct below
    ``DIRECT_LIMIT`` unknowns).  A result whose relative residual exceeds
    ``tol`` is still accepted when the residual is at the rounding floor
    ``10 u || |A| |x| + |b| || / ||b||``: no double-precision solve can do
    better, and high-degree Hessian terms push that floor above 1e-10.
    """
    A = _as_csr(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.shape != (A.shape[0],):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({A.shape[0]},)")
    if tol < 1e-14:
        raise ValueError("tolerance below 1e-14 is not attainable")
    t0 = time.perf_counter()
    if not np.any(b):
        return np.zeros_like(b), LinearSolveReport("trivial", 0, 0.0, 0.0)
    if method == "auto":
        method = "direct" if A.shape[0] <= DIRECT_LIMIT else "krylov"
    if method == "direct":
        lu = Factorization(A)
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("factorisation produced non-finite values")
        res = relative_residual(A, x, b)
        iters = 1
        # iterative refinement with the same factors
        while res > tol and iters < 1 + MAX_REFINE and res > rounding_floor(A, x, b):
            x = x + lu.solve(b - A @ x)
            res = relative_residual(A, x, b)
            iters += 1
    elif method == "krylov":
        x, iters = _gmres_ilu(A, b, tol, maxiter, restart)
        res = relative_residual(A, x, b)
    else:
        raise ValueError(f"unknown method {method!r}")
    elapsed = time.perf_counter() - t0
    floor = rounding_floor(A, x, b)
    if tol < res <= floor:
        # the residual is at rounding level; it cannot be reduced further
        log.debug("residual %.2e is at the rounding floor %.2e (tol %.1e)", res, floor, tol)
    elif res > tol:
        raise LinearSolveError(f"{method} solve reached residual {res:.2e} > tol {tol:.1e}")
    return x, LinearSolveReport(method, iters, float(res), elapsed)


def _gmres_ilu(A, b, tol, maxiter, restart):
    try:
        ilu = spla.spilu(sp.csc_matrix(A), drop_tol=1e-5, fill_factor=20)
    except RuntimeError as exc:
        raise SingularMatrixError(f"incomplete factorisation failed: {exc}") from None
    P = spla.LinearOperator(A.shape, ilu.solve)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(A, b, rtol=tol, restart=restart, maxiter=maxiter, M=P,
                         callback=cb, callback_type="pr_norm")
    if info > 0:
        raise MaxIterationsError(f"GMRES did not converge in {maxiter} restarts")
    if info < 0:
        raise BreakdownError("GMRES breakdown")
    return x, count[0]


def write_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(path, sp.coo_matrix(A), comment=comment)


def read_matrix_market(path):
    return _as_csr(scipy.io.mmread(path))
