"""
Convergence of the primal and optimal-control solvers
======================================================

The manufactured solution ``u = sin^4(pi x) sin^4(pi v)`` vanishes with its
gradient on the whole boundary, so it is admissible both for the primal
problem and, through ``z = alpha (v u_x - eps u_vv)``, for the optimality
system.  We measure errors in the H-norm and in the hypocoercive triple
norm and read off the rates, which should approach ``r - 1``.
"""

import numpy as np

from hypokfem import HParams
from hypokfem.experiments import oc_convergence, primal_convergence

from _common import plt, save

p = HParams()
ns = (4, 8, 16)

# %%
# Primal problem
# --------------
# One table per degree; ``eoc_*`` compares each row with the one before.

primal = primal_convergence(p, ns)
for r, rows in primal.items():
    print(f"r = {r}")
    for row in rows:
        print(f"  h = {row.h:.4f}  H {row.err_H:.3e} ({row.eoc_H:5.2f})"
              f"  triple {row.err_triple:.3e} ({row.eoc_triple:5.2f})")

# %%
# Optimality system
# -----------------
# The primal and dual errors come from the same coupled solve; the KKT
# residuals confirm the linear system itself is solved to tolerance.

oc = oc_convergence(p, ns)
for r, rows in oc.items():
    last = rows[-1]
    print(f"r = {r}: u rate {last.eoc_triple:.2f}, z rate {last.extra['eoc_dual']:.2f}, "
          f"worst KKT residual {max(last.extra['kkt_residuals'].values()):.1e}")

# %%
# At eps = 0.1 the cubic elements are still preasymptotic on these meshes
# and the literal adjoint boundary term costs the quartic optimality system
# its rate; rerunning with ``p.with_(adjoint_boundary="mirrored")`` or a
# larger ``eps`` shows the difference.

fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
for r in primal:
    h = [row.h for row in primal[r]]
    axes[0].loglog(h, [row.err_triple for row in primal[r]], "o-", label=f"r={r}")
    axes[1].loglog(h, [row.err_triple_dual for row in oc[r]], "s-", label=f"r={r}")
for ax, title in zip(axes, ("primal u, triple norm", "dual z, triple norm")):
    ax.set_xlabel("h")
    ax.set_title(title)
    ax.legend()
save(fig, "convergence.png")
