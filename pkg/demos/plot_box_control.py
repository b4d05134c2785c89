"""
Box-constrained control by Richardson iteration
================================================

The nodal projection onto ``[lo, hi]`` turns the optimality system into a
fixed-point problem.  Each sweep solves the dual equation, clamps the
control ``F = Z / alpha`` into the box, and relaxes the primal state with
weight ``omega``.

The linear part of the sweep contracts only when ``omega / alpha`` times
the largest eigenvalue of ``A^-1 M_H A*^-1 M_H`` (about 4.3 here) stays
below 2.  It also needs that operator to have no negative eigenvalues,
which the literal adjoint boundary term does not guarantee.  We compare
the literal and mirrored adjoint treatments.
"""

import numpy as np

from hypokfem import HParams
from hypokfem.experiments import box_control
from hypokfem.linalg import LinearSolveError

from _common import plt, save, tripcolor

n = 16
histories = {}

# %%
# Literal and mirrored adjoints, one- and two-sided boxes
# -------------------------------------------------------

for mode in ("literal", "mirrored"):
    p = HParams(alpha=1e-3, adjoint_boundary=mode)
    for bounds in ((0.0, np.inf), (0.0, 1.0)):
        try:
            sol, hist = box_control(p, n, bounds)
        except LinearSolveError as exc:
            print(f"{mode:8s} {bounds}: {exc}")
            continue
        histories[mode, bounds] = hist
        c = sol.F.coeffs
        print(f"{mode:8s} {bounds}: {len(hist)} iterations, F in [{c.min():.3f}, {c.max():.3f}]")
        last = sol

# %%
# Increment history: the stopping test is on ``||Z^n - Z^(n-1)||^2``.

fig, ax = plt.subplots(figsize=(6, 3.5))
for (mode, bounds), hist in histories.items():
    it, inc = np.array(hist).T
    ax.semilogy(it, inc, label=f"{mode}, {bounds}")
ax.set_xlabel("iteration")
ax.set_ylabel("increment")
ax.legend()
save(fig, "box_history.png")

fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
tripcolor(axes[0], last.U, "state U")
tripcolor(axes[1], last.F, "control F in [0, 1]")
save(fig, "box_solution.png")
