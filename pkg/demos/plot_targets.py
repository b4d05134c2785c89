"""
Tracking the ellipse and disc targets
======================================

Stationary optimal control towards the continuous ellipse bump ``D1`` and
the discontinuous disc indicator ``D2``.  Smaller ``alpha`` makes the
control cheaper, so the state follows the target more closely at the price
of a larger control.  The second sweep varies the family parameter ``m``
of the regularisation matrix ``M = eps [[m^3, m^2], [m^2, m]]``.
"""

from hypokfem import HParams
from hypokfem.experiments import alpha_sweep, m_sweep

from _common import plt, save, tripcolor

p = HParams()
n = 16

# %%
# Sweep over alpha and eps
# ------------------------

snapshots = {}
for q, name, sol, s in alpha_sweep(p, n, alphas=(1e-1, 1e-2, 1e-3), epss=(1e-1, 1e-4)):
    print(f"{name} eps={q.eps:g} alpha={q.alpha:g}: mismatch {s['mismatch_H']:.3f}, "
          f"|F|_H {s['F_H']:.2f}, cost {s['cost']:.4f}")
    snapshots[name, q.eps, q.alpha] = sol

# %%
# The states for the smallest alpha at both diffusion strengths.  With
# eps = 1e-4 transport dominates and the state is sheared along ``x``.

fig, axes = plt.subplots(2, 2, figsize=(8, 7))
for ax, key in zip(axes.ravel(), [("D1", 0.1, 1e-3), ("D1", 1e-4, 1e-3),
                                  ("D2", 0.1, 1e-3), ("D2", 1e-4, 1e-3)]):
    tripcolor(ax, snapshots[key].U, f"{key[0]}, eps={key[1]:g}")
save(fig, "targets_states.png")

# %%
# Sweep over m
# ------------
# ``m = 0`` would drop the H-regularisation altogether; each positive value
# gives a hypocoercive pair ``(M, N)``.

for q, sol, s in m_sweep(p.with_(alpha=1e-3), n, ms=(0.1, 10 ** -0.5, 1.0, 10 ** 0.5)):
    print(f"m={q.m:.3f} hypocoercive={q.hypocoercive}: mismatch {s['mismatch_H']:.3f}, "
          f"F in [{s['F_min']:.2f}, {s['F_max']:.2f}]")
