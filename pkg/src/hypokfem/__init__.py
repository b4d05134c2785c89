"""Hypocoercivity-preserving finite elements for the Kolmogorov equation and its optimal control."""

__version__ = "0.1.0"

from .mesh import Mesh, build_structured
from .params import HParams
from .space import Constraint, DiscreteField, build_space

__all__ = ["HParams", "Mesh", "build_structured", "build_space", "Constraint", "DiscreteField",
           "__version__"]
