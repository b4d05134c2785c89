"""Parameter set shared by assembly, solvers and analysis."""

from dataclasses import dataclass, field, replace

import numpy as np

from .elements import eig_sym_2x2

ADJOINT_BOUNDARY = ("literal", "mirrored")


def regularisation_matrix(eps, m):
    """``eps * [[m^3, m^2], [m^2, m]]``."""
    return eps * np.array([[m ** 3, m ** 2], [m ** 2, m]])


def coupling_matrix(M, eps):
    """``[[M12, M22/2], [M22/2, eps]]``; its smallest eigenvalue drives decay."""
    return np.array([[M[0, 1], 0.5 * M[1, 1]], [0.5 * M[1, 1], eps]])


@dataclass(frozen=True)
class HParams:
    """Discretisation and problem parameters.

    ``M`` defaults to the one-parameter family ``eps [[m^3, m^2], [m^2, m]]``;
    pass an explicit ``M`` to override it.  ``adjoint_boundary`` selects the
    boundary treatment of the adjoint form: ``"literal"`` (the transposed
    primal form with outflow transport jumps) or ``"mirrored"`` (an inflow
    trace term replaces the outflow jumps, so the dual energy mirrors the
    primal one).
    """

    eps: float = 0.1
    m: float = 0.35
    C_sigma: float = 10.0
    r: int = 2
    alpha: float = 1.0
    x_max: float = 1.0
    adjoint_boundary: str = "literal"
    M: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.C_sigma < 0:
            raise ValueError(f"C_sigma must be non-negative, got {self.C_sigma}")
        if self.adjoint_boundary not in ADJOINT_BOUNDARY:
            raise ValueError(f"adjoint_boundary must be one of {ADJOINT_BOUNDARY}, "
                             f"got {self.adjoint_boundary!r}")
        M = regularisation_matrix(self.eps, self.m) if self.M is None else np.asarray(self.M, float)
        if M.shape != (2, 2) or not np.allclose(M, M.T, atol=0, rtol=1e-14):
            raise ValueError("M must be a symmetric 2x2 matrix")
        if eig_sym_2x2(M)[0] < -1e-14:
            raise ValueError("M must be positive semi-definite")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @property
    def N(self):
        return coupling_matrix(self.M, self.eps)

    @property
    def hypocoercive(self):
        """True when ``4 eps M12 > M22^2``, i.e. ``N`` is positive definite."""
        return 4.0 * self.eps * self.M[0, 1] > self.M[1, 1] ** 2

    def with_(self, **changes):
        if "m" in changes or "eps" in changes:
            changes.setdefault("M", None)
        elif "M" not in changes:
            changes["M"] = self.M
        return replace(self, **changes)

    def as_dict(self):
        return {"eps": self.eps, "m": self.m, "C_sigma": self.C_sigma, "r": self.r,
                "alpha": self.alpha, "x_max": self.x_max,
                "adjoint_boundary": self.adjoint_boundary, "M": self.M.tolist()}
