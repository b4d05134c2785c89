"""Drivers for the convergence studies and the control experiments.

Each driver returns plain data (error rows, solutions, summaries); writing
files is left to the command-line layer.
"""

import logging

import numpy as np

from . import analysis as an
from . import solvers
from .manufactured import ZERO, oc_manufactured, primal_case, sin4_benchmark, targets
from .mesh import build_structured
from .space import build_space

log = logging.getLogger(__name__)

DEFAULT_NS = (4, 8, 16, 32)
DEFAULT_RS = (2, 3, 4)


def primal_convergence(p, ns=DEFAULT_NS, rs=DEFAULT_RS, u_expr=sin4_benchmark, keep_fields=False):
    """Error table of the stationary primal problem for each degree.

    Returns ``{r: [ErrorReport, ...]}``; with ``keep_fields`` each row's
    ``extra["U"]`` holds the discrete solution.
    """
    out = {}
    for r in rs:
        q = p.with_(r=r)
        exact, f = primal_case(u_expr, q.eps)
        rows = []
        for n in ns:
            mesh = build_structured(n, n, q.x_max)
            U = solvers.solve_stationary_primal(mesh, q, f)
            row = an.ErrorReport(mesh.h, U.space.n_dofs, an.h_norm(U, q.M, exact),
                                 an.triple_norm(U, an.PRIMAL, q, exact))
            if keep_fields:
                row.extra["U"] = U
            rows.append(row)
            log.info("primal r=%d n=%d: H %.3e triple %.3e", r, n, row.err_H, row.err_triple)
        out[r] = an.fill_eoc(rows)
    return out


def oc_convergence(p, ns=DEFAULT_NS, rs=DEFAULT_RS, u_expr=sin4_benchmark, keep_fields=False):
    """Error table of the manufactured stationary optimal-control problem.

    ``err_H``/``err_triple`` measure ``u``; ``err_triple_dual`` measures
    ``z`` and its rate is stored in ``extra["eoc_dual"]``.
    """
    out = {}
    for r in rs:
        q = p.with_(r=r)
        case = oc_manufactured(u_expr, q.alpha, q.eps, q.M, x_max=q.x_max)
        rows = []
        for n in ns:
            mesh = build_structured(n, n, q.x_max)
            sol = solvers.solve_stationary_kkt(mesh, q, case.target)
            row = an.ErrorReport(mesh.h, 2 * sol.U.space.n_dofs, an.h_norm(sol.U, q.M, case.u),
                                 an.triple_norm(sol.U, an.PRIMAL, q, case.u),
                                 an.triple_norm(sol.Z, an.DUAL, q, case.z))
            row.extra["kkt_residuals"] = sol.residuals
            if keep_fields:
                row.extra["solution"] = sol
            rows.append(row)
            log.info("kkt r=%d n=%d: u %.3e z %.3e", r, n, row.err_triple, row.err_triple_dual)
        an.fill_eoc(rows)
        for a, b in zip(rows[:-1], rows[1:]):
            b.extra["eoc_dual"] = float(an.eoc([a.h, b.h], [a.err_triple_dual, b.err_triple_dual])[0])
        out[r] = rows
    return out


def control_snapshot(p, n, target_name):
    """Stationary optimal control for a named target on an ``n x n`` mesh."""
    D = targets()[target_name]
    sol = solvers.solve_stationary_kkt(build_structured(n, n, p.x_max), p, D)
    summary = {"cost": sol.cost, "U_H": an.h_norm(sol.U, p.M), "F_H": an.h_norm(sol.F, p.M),
               "mismatch_H": an.h_norm(sol.U, p.M, D), "F_min": float(sol.F.coeffs.min()),
               "F_max": float(sol.F.coeffs.max())}
    return sol, summary


def alpha_sweep(p, n, alphas, epss, target_names=("D1", "D2")):
    """Snapshots over ``alpha x eps x target``; yields ``(params, name, sol, summary)``."""
    for name in target_names:
        for eps in epss:
            for a in alphas:
                q = p.with_(eps=eps, alpha=a)
                sol, summary = control_snapshot(q, n, name)
                yield q, name, sol, summary


def m_sweep(p, n, ms, target_name="D2"):
    """Snapshots over the family parameter ``m``; yields ``(params, sol, summary)``."""
    for m in ms:
        q = p.with_(m=m)
        sol, summary = control_snapshot(q, n, target_name)
        yield q, sol, summary


def box_control(p, n, bounds, target_name="D2", omega=1e-3, tol=1e-10, max_iter=1_000_000):
    """Richardson box-constrained control; returns ``(KKTSolution, history)``."""
    D = targets()[target_name]
    mesh = build_structured(n, n, p.x_max)
    return solvers.solve_box_richardson(mesh, p, D, bounds=bounds, omega=omega, tol=tol,
                                        max_iter=max_iter)


def timedep_control(p, n, K, T=1.0, zero_target=False):
    """Time-dependent control towards the pulsing Gaussian (or the zero target)."""
    mesh = build_structured(n, n, p.x_max)
    D = (lambda t: ZERO) if zero_target else targets()["D_time"]
    return solvers.solve_timedep_kkt(mesh, p, D, T, K)


def pulse_correlation(sol):
    """Correlation of ``||U(t)||_L2`` with ``1 - cos(2 pi t)`` over the time grid."""
    l2 = sol.U.l2_norms()
    ref = 1.0 - np.cos(2.0 * np.pi * sol.U.times)
    if np.ptp(l2) == 0:
        return float("nan")
    return float(np.corrcoef(l2, ref)[0, 1])


def primal_decay(p, n=16, T=2.0, dt=0.01, theta=1.0):
    """Homogeneous primal run from the sin^4 interpolant; returns ``(Trajectory, monotone, rate)``."""
    mesh = build_structured(n, n, p.x_max)
    space = build_space(mesh, p.r)
    tr = solvers.solve_primal_timedep(space, p, sin4_benchmark, T, dt, theta=theta,
                                      project="interpolate")
    monotone, rate = an.decay_report(tr.times, tr.h_norms)
    return tr, monotone, rate
