"""Norms, errors against exact fields, cost functionals, EOC and decay diagnostics."""

import csv
from dataclasses import dataclass, field, fields

import numpy as np

from .assembly import boundary_h_sq, interior_jump_sq, volume_rule
from .elements import eig_sym_2x2
from .mesh import FacetLabel

PRIMAL, DUAL = "primal", "dual"


def _cell_values(space, coeffs, order=1):
    rule = volume_rule(space)
    pts, wdet, phi, G, H = space.cell_geometry(rule)
    c = np.asarray(coeffs)[space.cell_dofs]
    val = np.einsum("qi,ci->cq", phi, c)
    grad = np.einsum("cqia,ci->cqa", G, c)
    hess = np.einsum("cqiab,ci->cqab", H, c) if order > 1 else None
    return pts, wdet, val, grad, hess


def _minus_exact(pts, val, grad, hess, exact):
    if exact is None:
        return val, grad, hess
    x, v = pts[..., 0], pts[..., 1]
    val = val - exact(x, v)
    grad = grad - exact.gradient(x, v)
    if hess is not None:
        hess = hess - exact.hess(x, v)
    return val, grad, hess


def h_norm(field, M, exact=None):
    """``||W||_H`` with ``W = field - exact``; ``exact`` provides ``__call__`` and ``gradient``."""
    M = np.asarray(M, dtype=float)
    pts, wdet, val, grad, _ = _cell_values(field.space, field.coeffs)
    val, grad, _ = _minus_exact(pts, val, grad, None, exact)
    dens = val ** 2 + np.einsum("cqa,ab,cqb->cq", grad, M, grad)
    return float(np.sqrt(np.sum(wdet * dens)))


def l2_norm(field, exact=None):
    pts, wdet, val, _, _ = _cell_values(field.space, field.coeffs)
    if exact is not None:
        val = val - exact(pts[..., 0], pts[..., 1])
    return float(np.sqrt(np.sum(wdet * val ** 2)))


def grad_l2_norm(field):
    _, wdet, _, grad, _ = _cell_values(field.space, field.coeffs)
    return float(np.sqrt(np.sum(wdet * np.sum(grad ** 2, axis=-1))))


def triple_norm(field, variant, p, exact=None):
    """Discrete hypocoercive norm (``variant="primal"``) or its dual.

    ``|||W|||^2 = ||H W||^2_{Gamma+} + sum_K (||grad W||^2 + ||grad W_v||^2)
    + sigma ||sqrt(M) [grad W]_v||^2_{E_int}``; the dual variant takes the
    boundary term on Gamma-.  With ``exact`` (which also needs ``hess``) the
    norm of ``field - exact`` is returned; the exact field is smooth, so it
    contributes nothing to the gradient jumps.
    """
    if variant not in (PRIMAL, DUAL):
        raise ValueError(f"variant must be {PRIMAL!r} or {DUAL!r}, got {variant!r}")
    space = field.space
    side = FacetLabel.GAMMA_PLUS if variant == PRIMAL else FacetLabel.GAMMA_MINUS
    pts, wdet, val, grad, hess = _cell_values(space, field.coeffs, order=2)
    _, grad, hess = _minus_exact(pts, val, grad, hess, exact)
    vol = np.sum(wdet * (np.sum(grad ** 2, axis=-1) + np.sum(hess[..., :, 1] ** 2, axis=-1)))
    bnd = boundary_h_sq(space, field.coeffs, p.M, side, exact)
    jump = interior_jump_sq(space, field.coeffs, p)
    return float(np.sqrt(bnd + vol + jump))


def cost(U, F, target, p):
    """``E(U, F) = 1/2 ||U - D||_H^2 + alpha/2 ||F||_H^2``."""
    return 0.5 * h_norm(U, p.M, target) ** 2 + 0.5 * p.alpha * h_norm(F, p.M) ** 2


def cost_trajectory(times, U, F, targets, p):
    """``J^T = int_0^T E(U(t), F(t)) dt`` by the trapezoid rule over the time grid."""
    E = np.array([cost(u, f, d, p) for u, f, d in zip(U, F, targets)])
    return float(np.trapezoid(E, times)) if hasattr(np, "trapezoid") else float(np.trapz(E, times))


def eoc(h, err):
    """Pairwise rates ``log(e1/e2) / log(h1/h2)`` for strictly decreasing ``h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.shape != err.shape or h.ndim != 1 or len(h) < 2:
        raise ValueError("need at least two (h, err) rows of matching length")
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(err < 0):
        raise ValueError("errors must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])


@dataclass(frozen=True)
class Constants:
    lam_minus_M: float
    lam_plus_M: float
    lam_minus_N: float
    lam_plus_N: float
    C_eq_plus: float
    delta_tilde: float

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def constants(p, x_max=None):
    """Eigenvalues of ``M`` and ``N``, ``C_eq+ = max(1, lambda+(M))`` and the decay surrogate.

    ``delta~ = (C_eq+)^-1 (4 pi^-2 (1 + x_max^2) + 1)^-1 lambda-(N)``, from the
    Poincare constant bound ``C_p <= diam / pi``.
    """
    x_max = p.x_max if x_max is None else x_max
    lmM, lpM = eig_sym_2x2(p.M)
    lmN, lpN = eig_sym_2x2(p.N)
    ceq = max(1.0, lpM)
    delta = lmN / (ceq * (4.0 * (1.0 + x_max ** 2) / np.pi ** 2 + 1.0))
    return Constants(float(lmM), float(lpM), float(lmN), float(lpN), float(ceq), float(delta))


def decay_report(times, norms, squared=False, tol=1e-12):
    """Monotonicity flag and fitted exponential rate of ``||U||_H^2``.

    ``norms`` are H-norms (or their squares with ``squared=True``).  The rate
    is minus the least-squares slope of ``log ||U||_H^2`` against time; the
    sequence counts as monotone when no step increases by more than ``tol``
    relative to the first sample.
    """
    t = np.asarray(times, dtype=float)
    sq = np.asarray(norms, dtype=float)
    if not squared:
        sq = sq ** 2
    if len(t) < 3 or t.shape != sq.shape:
        raise ValueError("need at least three (time, norm) samples")
    scale = max(sq[0], np.finfo(float).tiny)
    monotone = bool(np.all(np.diff(sq) <= tol * scale))
    pos = sq > 0
    if pos.sum() < 2:
        return monotone, float("inf")
    slope = np.polyfit(t[pos], np.log(sq[pos]), 1)[0]
    return monotone, float(-slope)


@dataclass
class ErrorReport:
    """One refinement level of a convergence study."""

    h: float
    dofs: int
    err_H: float
    err_triple: float
    err_triple_dual: float = float("nan")
    eoc_H: float = float("nan")
    eoc_triple: float = float("nan")
    extra: dict = field(default_factory=dict)


CSV_COLUMNS = ("h", "dofs", "err_H", "err_triple", "err_triple_dual", "eoc_H", "eoc_triple")


def fill_eoc(rows):
    """Set ``eoc_H``/``eoc_triple`` of each row from the previous one (in place)."""
    for a, b in zip(rows[:-1], rows[1:]):
        b.eoc_H = float(eoc([a.h, b.h], [a.err_H, b.err_H])[0])
        b.eoc_triple = float(eoc([a.h, b.h], [a.err_triple, b.err_triple])[0])
    return rows


def write_error_csv(path, rows, header=None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([f"{getattr(row, c)!r}" if isinstance(getattr(row, c), float)
                        else getattr(row, c) for c in CSV_COLUMNS])
