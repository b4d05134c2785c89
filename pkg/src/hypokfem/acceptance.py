"""The acceptance suite: nine pass/fail criteria with fixed tolerances.

Every criterion returns a :class:`Verdict`; failures are verdicts, not
exceptions.  ``run_all`` prints one line per criterion and is shared by the
``hypokfem check`` command and ``tests/test_acceptance.py``.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import analysis as an
from . import experiments as ex
from . import solvers
from .assembly import volume_matrix
from .linalg import LinearSolveError, solve
from .manufactured import eval_jet, kolmogorov, oc_manufactured, sin4_benchmark
from .mesh import build_structured
from .params import HParams
from .space import Constraint, DiscreteField, build_space

# criteria that rely on a positive definite N
HYPOCOERCIVE_ONLY = (4, 5)

RATE_BELOW, RATE_ABOVE = 0.25, 0.6


@dataclass
class Verdict:
    number: int
    name: str
    status: str        # "PASS", "FAIL" or "SKIP"
    detail: str = ""
    elapsed: float = 0.0

    @property
    def passed(self):
        return self.status == "PASS"

    def line(self):
        return f"[{self.status}] {self.number}. {self.name}: {self.detail} ({self.elapsed:.1f} s)"


def _window(r):
    return r - 1 - RATE_BELOW, r - 1 + RATE_ABOVE


def _in_window(rate, r):
    lo, hi = _window(r)
    return bool(np.isfinite(rate) and lo <= rate <= hi)


def _fmt(x):
    return f"{x:.3g}"


# -- the criteria --------------------------------------------------------

def judge_primal(table):
    """Finest-pair EOC in both norms against the window ``[r - 1.25, r - 0.4]``."""
    ok, parts = True, []
    for r, rows in table.items():
        last = rows[-1]
        good = _in_window(last.eoc_triple, r) and _in_window(last.eoc_H, r)
        ok &= good
        parts.append(f"r={r} triple {_fmt(last.eoc_triple)} H {_fmt(last.eoc_H)}"
                     f" in [{_window(r)[0]:.2f}, {_window(r)[1]:.2f}]{'' if good else ' NO'}")
    return ok, "; ".join(parts)


def primal_convergence(p, expensive=False):
    ns = ex.DEFAULT_NS + ((64,) if expensive else ())
    return judge_primal(ex.primal_convergence(p, ns))


def judge_oc(table):
    """Finest-pair EOC of ``u`` (primal triple norm) and ``z`` (dual triple norm)."""
    ok, parts = True, []
    for r, rows in table.items():
        last = rows[-1]
        ez = last.extra["eoc_dual"]
        good = _in_window(last.eoc_triple, r) and _in_window(ez, r)
        ok &= good
        parts.append(f"r={r} u {_fmt(last.eoc_triple)} z {_fmt(ez)}{'' if good else ' NO'}")
    return ok, "; ".join(parts)


def oc_convergence(p, expensive=False):
    return judge_oc(ex.oc_convergence(p.with_(alpha=1.0)))


def adjoint_identity(p, expensive=False):
    q = p.with_(r=2)
    space = build_space(build_structured(8, 8, q.x_max), q.r)
    A = volume_matrix(space, q)
    As = volume_matrix(space, q, adjoint=True)
    diff = abs(As - A.T).max()
    scale = abs(A).max()
    return bool(diff <= 1e-12 * scale), f"max|A*_vol - A_vol^T| = {diff:.2e}, 1e-12 |A_vol| = {1e-12 * scale:.2e}"


def coercivity(p, expensive=False, samples=100, seed=0):
    q = p.with_(r=2)
    space = build_space(build_structured(8, 8, q.x_max), q.r)
    ops = solvers.Operators.build(space, q)
    rng = np.random.default_rng(seed)
    worst = {}
    for name, A, mask in (("primal", ops.A, ops.minus), ("adjoint", ops.A_star, ops.plus)):
        W = rng.standard_normal((samples, space.n_dofs)) * mask
        quad = np.einsum("si,si->s", W, (A @ W.T).T)
        worst[name] = float(np.min(quad / np.einsum("si,si->s", W, W)))
    ok = worst["primal"] > 0 and worst["adjoint"] > 0
    return ok, (f"min W^T A W / |W|^2 = {worst['primal']:.3g}, "
                f"min Z^T A* Z / |Z|^2 = {worst['adjoint']:.3g} over {samples} vectors")


def decay(p, expensive=False):
    q = p.with_(r=2)
    _, monotone, rate = ex.primal_decay(q, n=16, T=2.0, dt=0.01)
    delta = an.constants(q).delta_tilde
    ok = monotone and rate >= delta
    return ok, f"monotone {monotone}, fitted rate {rate:.4g} vs delta~ {delta:.4g}"


def richardson(p, expensive=False):
    """Example-5 setup: D2, alpha = 1e-3, m = 0.35, omega = 1e-3, tol = 1e-10."""
    q = p.with_(alpha=1e-3, r=2)
    n = 90 if expensive else 24
    ok, parts = True, []
    for lo, hi in ((0.0, np.inf), (0.0, 1.0)):
        try:
            sol, hist = ex.box_control(q, n, (lo, hi))
            c = sol.F.coeffs
            inside = bool(np.all(c >= lo) and np.all(c <= hi))
            ok &= inside
            parts.append(f"[{lo:g}, {hi:g}] converged in {len(hist)} its, bounds exact {inside}")
        except LinearSolveError as exc:
            ok = False
            parts.append(f"[{lo:g}, {hi:g}] failed: {exc}")
    try:
        sol, hist = ex.box_control(q, n, (-np.inf, np.inf))
        ref = solvers.solve_stationary_kkt(build_structured(n, n, q.x_max), q, _target("D2"))
        gap = an.h_norm(sol.U - ref.U, q.M) + an.h_norm(sol.F - ref.F, q.M)
        ok &= gap <= 1e-6
        parts.append(f"unbounded: {len(hist)} its, H-gap to direct KKT {gap:.2e}")
    except LinearSolveError as exc:
        ok = False
        parts.append(f"unbounded failed: {exc}")
    return ok, "; ".join(parts)


def jet_oracle(p, expensive=False, points=50, seed=0, step=1e-3):
    """Jets of ``u = sin^4`` and ``z = alpha K u`` against 4th-order central differences.

    Each partial of total order ``k <= 4`` is differenced from the partial of
    order ``k - 1`` (in ``x`` when it has an ``x`` index, else in ``v``).  The
    error is relative to the largest magnitude of that partial over the points.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.9, 0.9, points)
    v = rng.uniform(-0.9, 0.9, points)
    fields = {"u": lambda X, V, k: eval_jet(sin4_benchmark, X, V, k),
              "z": lambda X, V, k: p.alpha * kolmogorov(eval_jet(sin4_benchmark, X, V, k + 2), p.eps)}
    worst = 0.0
    for name, jet in fields.items():
        J = jet(x, v, 4)
        for k in range(1, 5):
            for a in range(k + 1):
                b = k - a
                lower = (a - 1, b) if a else (a, b - 1)
                dx, dv = (1.0, 0.0) if a else (0.0, 1.0)

                def g(s):
                    return jet(x + s * dx, v + s * dv, 3).partial(*lower)

                fd = (-g(2 * step) + 8 * g(step) - 8 * g(-step) + g(-2 * step)) / (12 * step)
                exact = J.partial(a, b)
                scale = max(np.abs(exact).max(), 1e-300)
                worst = max(worst, float(np.abs(fd - exact).max() / scale))
    return worst <= 1e-6, f"worst relative mismatch {worst:.2e} over {points} points (tol 1e-6)"


def timedep(p, expensive=False):
    """Example-6 setup scaled to n = 8, K = 32, T = 1 with alpha = 1e-2."""
    q = p.with_(alpha=1e-2, r=2)
    n = 16 if expensive else 8
    zero = ex.timedep_control(q, n, 32, zero_target=True)
    zmax = max(max(np.abs(f.coeffs).max() for f in tr.fields) for tr in (zero.U, zero.Z, zero.F))
    sol = ex.timedep_control(q, n, 32)
    corr = ex.pulse_correlation(sol)
    ok = zmax == 0.0 and zero.J == 0.0 and corr >= 0.9 and sol.residual <= 1e-9
    return ok, (f"zero target max|.| = {zmax:.1e}, J = {zero.J:.1e}; corr = {corr:.4f} (>= 0.9), "
                f"residual {sol.residual:.1e}")


def minimiser(p, expensive=False, samples=10, seed=0):
    """Unit H-norm feasible perturbations ``F + G``, ``U + A^-1 M_H G`` of the Example-2 optimum."""
    q = p.with_(alpha=1.0, r=2)
    case = oc_manufactured(sin4_benchmark, q.alpha, q.eps, q.M, x_max=q.x_max)
    mesh = build_structured(8, 8, q.x_max)
    sol = solvers.solve_stationary_kkt(mesh, q, case.target)
    space = sol.U.space
    ops = solvers.Operators.build(space, q)
    rng = np.random.default_rng(seed)
    gains = []
    for _ in range(samples):
        g = rng.standard_normal(space.n_dofs)
        g /= an.h_norm(DiscreteField(space, g), q.M)
        du, _ = solve(ops.A_r, np.where(ops.minus, ops.M_H @ g, 0.0))
        U = DiscreteField(space, sol.U.coeffs + du, Constraint.MINUS)
        F = DiscreteField(space, sol.F.coeffs + g)
        gains.append(an.cost(U, F, case.target, q) - sol.cost)
    return min(gains) > 0, f"min cost increase {min(gains):.4g} over {samples} perturbations"


def _target(name):
    from .manufactured import targets

    return targets()[name]


CRITERIA = (
    (1, "primal convergence", primal_convergence),
    (2, "optimal-control convergence", oc_convergence),
    (3, "adjoint identity", adjoint_identity),
    (4, "coercivity positivity", coercivity),
    (5, "decay", decay),
    (6, "Richardson box control", richardson),
    (7, "derivative oracle", jet_oracle),
    (8, "time-dependent KKT", timedep),
    (9, "KKT minimiser property", minimiser),
)


def run_criterion(number, p=None, expensive=False):
    p = p or HParams()
    _, name, fn = CRITERIA[number - 1]
    if number in HYPOCOERCIVE_ONLY and not p.hypocoercive:
        return Verdict(number, name, "SKIP", "non-hypocoercive mode (N not positive definite)")
    t0 = time.perf_counter()
    try:
        ok, detail = fn(p, expensive)
    except (LinearSolveError, ValueError, MemoryError) as exc:
        ok, detail = False, f"raised {type(exc).__name__}: {exc}"
    return Verdict(number, name, "PASS" if ok else "FAIL", detail, time.perf_counter() - t0)


def run_all(p=None, expensive=False, only=None, echo=print):
    """Run the selected criteria (all by default) and print one line each."""
    p = p or HParams()
    if not p.hypocoercive:
        echo(f"non-hypocoercive mode (m = {p.m:g}): skipping criteria "
             f"{', '.join(map(str, HYPOCOERCIVE_ONLY))}")
    verdicts = []
    for number, _, _ in CRITERIA:
        if only and number not in only:
            continue
        v = run_criterion(number, p, expensive)
        if echo:
            echo(v.line())
        verdicts.append(v)
    return verdicts
