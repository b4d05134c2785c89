"""Stationary, optimal-control, bound-constrained and time-dependent solvers."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import analysis
from .assembly import (adjoint_operator, assemble_adjoint, assemble_h_mass, assemble_primal,
                       assemble_rhs_h, primal_operator)
from .linalg import BreakdownError, Factorization, LinearSolveReport, MaxIterationsError, block_compose, restrict, solve
from .space import Constraint, DiscreteField, build_space

log = logging.getLogger(__name__)

DEFAULT_KN_CAP = 4_000_000
DIVERGENCE_LIMIT = 1e30


@dataclass
class Operators:
    """Everything a solver needs on one space: unconstrained and restricted operators."""

    space: object
    p: object
    A: object          # a_h + s_h, unconstrained
    A_star: object     # a_h* + s_h*, unconstrained
    M_H: object        # H-mass
    minus: np.ndarray  # free masks
    plus: np.ndarray

    @classmethod
    def build(cls, space, p):
        return cls(space, p, primal_operator(space, p), adjoint_operator(space, p),
                   assemble_h_mass(space, p.M), space.free_mask(Constraint.MINUS),
                   space.free_mask(Constraint.PLUS))

    @property
    def A_r(self):
        return restrict(self.A, self.minus)

    @property
    def A_star_r(self):
        return restrict(self.A_star, self.plus)


def _space(mesh_or_space, p):
    if hasattr(mesh_or_space, "cell_dofs"):
        return mesh_or_space
    return build_space(mesh_or_space, p.r)


def solve_stationary_primal(mesh, p, f, tol=1e-10):
    """``U`` in the MinusSet space with ``a_h(U, Phi) + s_h(U, Phi) = (f, Phi)_H``."""
    space = _space(mesh, p)
    b = assemble_rhs_h(space, f, p.M, Constraint.MINUS)
    c, _ = solve(assemble_primal(space, p), b, tol=tol)
    c[space.minus_dofs] = 0.0
    return DiscreteField(space, c, Constraint.MINUS)


@dataclass
class KKTSolution:
    U: DiscreteField
    Z: DiscreteField
    F: DiscreteField
    cost: float
    report: object = None
    residuals: dict = field(default_factory=dict)
    log: list = field(default_factory=list)


def kkt_residuals(ops, U, Z, F, b_D):
    """Relative residuals of the primal, dual and control equations."""
    A, As, M = ops.A, ops.A_star, ops.M_H
    mi, pl = ops.minus, ops.plus
    MF = M @ F.coeffs
    r1 = (A @ U.coeffs - MF)[mi]
    r2 = (As @ Z.coeffs + M @ U.coeffs - b_D)[pl]
    r3 = M @ (ops.p.alpha * F.coeffs - Z.coeffs)

    def rel(r, ref):
        n = np.linalg.norm(ref)
        return float(np.linalg.norm(r) / n) if n > 0 else float(np.linalg.norm(r))

    return {"primal": rel(r1, MF[mi]), "dual": rel(r2, b_D[pl]),
            "control": rel(r3, M @ Z.coeffs)}


def solve_stationary_kkt(mesh, p, target, tol=1e-10, ops=None):
    """Unconstrained optimal control via the reduced two-field system.

    Eliminating ``F = Z / alpha`` gives
    ``[[alpha A, -M_H], [M_H, A*]] [U; Z] = [0; b_D]``, with MinusSet rows and
    columns for ``U``, PlusSet ones for ``Z``.
    """
    if getattr(target, "grad", 1) is None:
        log.warning("target has no gradient data; using the zero a.e. gradient")
    space = _space(mesh, p)
    ops = ops or Operators.build(space, p)
    mi, pl = ops.minus, ops.plus
    b_D = assemble_rhs_h(space, target, p.M)
    K = block_compose([
        [p.alpha * ops.A_r, -restrict(ops.M_H, mi, pl, unit_diagonal=False)],
        [restrict(ops.M_H, pl, mi, unit_diagonal=False), ops.A_star_r],
    ])
    rhs = np.concatenate([np.zeros(space.n_dofs), np.where(pl, b_D, 0.0)])
    x, report = solve(K, rhs, tol=tol)
    N = space.n_dofs
    u, z = x[:N].copy(), x[N:].copy()
    u[~mi] = 0.0
    z[~pl] = 0.0
    U = DiscreteField(space, u, Constraint.MINUS)
    Z = DiscreteField(space, z, Constraint.PLUS)
    F = DiscreteField(space, z / p.alpha, Constraint.FREE)
    sol = KKTSolution(U, Z, F, analysis.cost(U, F, target, p), report)
    sol.residuals = kkt_residuals(ops, U, Z, F, b_D)
    return sol


def solve_box_richardson(mesh, p, target, bounds=(-np.inf, np.inf), omega=1e-3, tol=1e-10,
                         max_iter=1_000_000, log_every=1000, ops=None, callback=None):
    """Bound-constrained control by the relaxed Richardson iteration.

    Each sweep solves the dual equation with ``U^{n-1}``, then the primal one
    with ``F^n = P_B(Z^n / alpha)``; it stops once
    ``||Z^n - Z^{n-1}||^2_{L2} < tol``.  The linear part of the sweep
    contracts only when ``omega / alpha`` times the largest eigenvalue of
    ``A^-1 M_H A*^-1 M_H`` stays below 2; a blow-up raises BreakdownError.  Returns ``(KKTSolution, log)`` where
    the log holds ``(iteration, increment)`` pairs.
    """
    lo, hi = bounds
    if not 0 < omega <= 1:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    if lo > hi:
        raise ValueError(f"empty box [{lo}, {hi}]")
    space = _space(mesh, p)
    ops = ops or Operators.build(space, p)
    from .space import mass_matrix

    M_L2 = mass_matrix(space)
    A_r, As_r = ops.A_r, ops.A_star_r
    lu, lu_s = Factorization(A_r), Factorization(As_r)
    mi, pl = ops.minus, ops.plus
    b_D = np.where(pl, assemble_rhs_h(space, target, p.M), 0.0)
    u = np.zeros(space.n_dofs)
    z = np.zeros(space.n_dofs)
    history = []
    t0 = time.perf_counter()
    for it in range(1, max_iter + 1):
        z_new = lu_s.solve(np.where(pl, b_D - ops.M_H @ u, 0.0))
        f = np.clip(z_new / p.alpha, lo, hi)
        rhs = omega * (ops.M_H @ f) + (1.0 - omega) * (A_r @ u)
        u = lu.solve(np.where(mi, rhs, 0.0))
        dz = z_new - z
        inc = float(dz @ (M_L2 @ dz))
        z = z_new
        history.append((it, inc))
        if callback is not None:
            callback(it, inc)
        if log_every and it % log_every == 0:
            log.info("richardson iteration %d: increment %.3e", it, inc)
        if inc < tol:
            break
        if not np.isfinite(inc) or inc > DIVERGENCE_LIMIT:
            raise BreakdownError(f"Richardson diverged at iteration {it} (increment {inc:.3e}); "
                                 "omega is too large for this alpha")
    else:
        raise MaxIterationsError(
            f"Richardson did not converge in {max_iter} iterations (last increment {inc:.3e})")
    u[~mi] = 0.0
    z[~pl] = 0.0
    U = DiscreteField(space, u, Constraint.MINUS)
    Z = DiscreteField(space, z, Constraint.PLUS)
    F = DiscreteField(space, np.clip(z / p.alpha, lo, hi), Constraint.FREE)
    report = LinearSolveReport("richardson", it, inc, time.perf_counter() - t0)
    sol = KKTSolution(U, Z, F, analysis.cost(U, F, target, p), report, log=history)
    return sol, history


# -- time dependence ----------------------------------------------------------

@dataclass
class Trajectory:
    """Fields on a time grid with their H-norms."""

    times: np.ndarray
    fields: list
    h_norms: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.fields):
            raise ValueError("one field per time level is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if self.h_norms is None:
            self.h_norms = np.full(len(self.fields), np.nan)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, k):
        return self.fields[k]

    def with_h_norms(self, M):
        self.h_norms = np.array([analysis.h_norm(f, M) for f in self.fields])
        return self

    def l2_norms(self):
        return np.array([analysis.l2_norm(f) for f in self.fields])


@dataclass
class PrimalState:
    """Current time, coefficients and the cached theta-scheme factorisation."""

    space: object
    p: object
    t: float
    U: DiscreteField
    _cache: dict = field(default_factory=dict, repr=False)


def _rhs_at(space, p, f, t):
    if f is None:
        return np.zeros(space.n_dofs)
    g = f(t) if not hasattr(f, "gradient") else f
    return assemble_rhs_h(space, g, p.M, Constraint.MINUS)


def advance_primal_theta(state, dt, theta, f=None):
    """One theta-scheme step of ``M_H U' + A U = b(t)``.

    Solves ``(M_H + theta dt A) U^{n+1} = (M_H - (1 - theta) dt A) U^n
    + dt (theta b^{n+1} + (1 - theta) b^n)``.  ``f(t)`` returns a forcing
    evaluator (or ``f`` is one, time independent); ``None`` means zero.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    space, p = state.space, state.p
    key = (float(dt), float(theta))
    if key not in state._cache:
        if "ops" not in state._cache:
            state._cache["ops"] = (primal_operator(space, p), assemble_h_mass(space, p.M))
        A, M = state._cache["ops"]
        mask = space.free_mask(Constraint.MINUS)
        lhs = restrict(M + theta * dt * A, mask)
        state._cache[key] = (Factorization(lhs), M - (1.0 - theta) * dt * A, mask)
    lu, rhs_op, mask = state._cache[key]
    t0, t1 = state.t, state.t + dt
    b = rhs_op @ state.U.coeffs
    if f is not None:
        b = b + dt * (theta * _rhs_at(space, p, f, t1) + (1.0 - theta) * _rhs_at(space, p, f, t0))
    u = lu.solve(np.where(mask, b, 0.0))
    u[~mask] = 0.0
    return PrimalState(space, p, t1, DiscreteField(space, u, Constraint.MINUS), state._cache)


def solve_primal_timedep(mesh, p, u0, T, dt, theta=1.0, f=None, project="l2"):
    """Integrate the primal equation from ``U(0) = Pi u0`` to ``T``; returns a Trajectory.

    ``Pi`` is the H-free L2 projection (``project="l2"``) or nodal
    interpolation (``"interpolate"``), followed by the MinusSet constraint.
    """
    from .space import l2_project

    if project not in ("l2", "interpolate"):
        raise ValueError(f"project must be 'l2' or 'interpolate', got {project!r}")
    space = _space(mesh, p)
    K = int(round(T / dt))
    if K < 1 or abs(K * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T = {T} is not a positive multiple of dt = {dt}")
    if isinstance(u0, DiscreteField):
        U0 = u0
    elif project == "l2":
        U0 = l2_project(space, u0, Constraint.MINUS)
    else:
        U0 = space.interpolate(u0, Constraint.MINUS)
    state = PrimalState(space, p, 0.0, U0)
    fields = [U0]
    for _ in range(K):
        state = advance_primal_theta(state, dt, theta, f)
        fields.append(state.U)
    return Trajectory(np.arange(K + 1) * dt, fields).with_h_norms(p.M)


@dataclass
class TimeDepSolution:
    U: Trajectory
    Z: Trajectory
    F: Trajectory
    J: float
    report: object = None
    residual: float = float("nan")

    def stability_functional(self, p):
        """``alpha ||U(T)||_H^2 + ||Z(0)||_H^2``."""
        return p.alpha * analysis.h_norm(self.U[-1], p.M) ** 2 + analysis.h_norm(self.Z[0], p.M) ** 2


def solve_timedep_kkt(mesh, p, target, T, K, u0=None, kn_cap=DEFAULT_KN_CAP, tol=1e-9):
    """All-at-once implicit-Euler optimality system on ``[0, T]`` with ``K`` steps.

    Unknowns are ``U^1..U^K`` and ``Z^0..Z^{K-1}`` (``U^0 = Pi u0``, ``Z^K = 0``):

    * forward  ``M (U^n - U^{n-1}) / dt + A U^n = M Z^{n-1} / alpha``
    * backward ``-M (Z^{n+1} - Z^n) / dt + A* Z^n = M (D^{n+1} - U^{n+1})``

    The backward time coupling is the transpose of the forward one, so the
    only gap to the optimality system of the discretised cost is the spatial
    one (``A*`` is not ``A^T`` on the boundary).  ``target``
    maps ``t`` to an evaluator.  ``F^n = Z^n / alpha``; ``J^T`` is the
    trapezoid rule over ``E(U^n, F^n)``.
    """
    from .space import l2_project

    if K < 2:
        raise ValueError(f"need K >= 2 time steps, got {K}")
    space = _space(mesh, p)
    N = space.n_dofs
    if K * N > kn_cap:
        raise MemoryError(f"K*N = {K}*{N} = {K * N} exceeds the cap {kn_cap}; "
                          "reduce K or the mesh, or raise kn_cap")
    dt = T / K
    ops = Operators.build(space, p)
    mi, pl = ops.minus, ops.plus
    M = ops.M_H
    R = lambda X, r, c, unit=False: restrict(X, r, c, unit_diagonal=unit)
    Af = R(M / dt + ops.A, mi, mi, True)
    Mf = R(M / dt, mi, mi)
    Cz = R(M, mi, pl) / p.alpha
    Ab = R(M / dt + ops.A_star, pl, pl, True)
    Mb = R(M / dt, pl, pl)
    Cu = R(M, pl, mi)
    I = sp.identity(K, format="csr")
    L = sp.eye(K, k=-1, format="csr")
    Up = sp.eye(K, k=1, format="csr")
    big = block_compose([
        [sp.kron(I, Af) - sp.kron(L, Mf), -sp.kron(I, Cz)],
        [sp.kron(I, Cu), sp.kron(I, Ab) - sp.kron(Up, Mb)],
    ])
    times = np.linspace(0.0, T, K + 1)
    if u0 is None:
        U0 = space.zeros(Constraint.MINUS)
    elif isinstance(u0, DiscreteField):
        U0 = u0
    else:
        U0 = l2_project(space, u0, Constraint.MINUS)
    rhs = np.zeros(2 * K * N)
    rhs[:N] = np.where(mi, M @ U0.coeffs / dt, 0.0)
    targets = [target(t) for t in times]
    for n in range(K):
        rhs[(K + n) * N:(K + n + 1) * N] = np.where(pl, assemble_rhs_h(space, targets[n + 1], p.M), 0.0)
    x, report = solve(big, rhs, tol=tol)
    res = float(np.linalg.norm(big @ x - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))
    u = x[:K * N].reshape(K, N)
    z = x[K * N:].reshape(K, N)
    Ufields = [U0] + [DiscreteField(space, np.where(mi, u[k], 0.0), Constraint.MINUS) for k in range(K)]
    Zfields = [DiscreteField(space, np.where(pl, z[k], 0.0), Constraint.PLUS) for k in range(K)]
    Zfields.append(space.zeros(Constraint.PLUS))
    Ffields = [DiscreteField(space, zf.coeffs / p.alpha, Constraint.FREE) for zf in Zfields]
    J = analysis.cost_trajectory(times, Ufields, Ffields, targets, p)
    return TimeDepSolution(Trajectory(times, Ufields).with_h_norms(p.M),
                           Trajectory(times, Zfields).with_h_norms(p.M),
                           Trajectory(times, Ffields).with_h_norms(p.M), J, report, res)
