"""
Hypocoercive decay of the free evolution
=========================================

Without forcing, ``||U(t)||_H^2`` decays exponentially at least at the
rate ``delta~ = lambda-(N) / (C_eq+ (4 pi^-2 (1 + x_max^2) + 1))``.  The
bound is far from sharp: the observed rate is much larger, but the bound
is the only fully computable one.
"""

import numpy as np

from hypokfem import HParams
from hypokfem.analysis import constants
from hypokfem.experiments import primal_decay

from _common import plt, save

p = HParams()
c = constants(p)
print("constants:", {k: round(v, 6) for k, v in c.as_dict().items()})

fig, ax = plt.subplots(figsize=(6, 3.5))
for theta in (0.5, 1.0):
    tr, monotone, rate = primal_decay(p, n=12, T=2.0, dt=0.02, theta=theta)
    print(f"theta={theta}: monotone {monotone}, fitted rate {rate:.3f} (bound {c.delta_tilde:.4f})")
    ax.semilogy(tr.times, tr.h_norms ** 2, label=f"theta={theta}")
t = tr.times
ax.semilogy(t, tr.h_norms[0] ** 2 * np.exp(-c.delta_tilde * t), "k:", label="delta~ bound")
ax.set_xlabel("t")
ax.set_ylabel("||U||_H^2")
ax.legend()
save(fig, "decay.png")
