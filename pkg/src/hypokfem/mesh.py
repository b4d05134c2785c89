"""Structured triangulations of the phase-space rectangle (-x_max, x_max) x (-1, 1).

Facets carry a boundary label: ``GAMMA_MINUS`` (inflow, ``v n_x < 0``),
``GAMMA_PLUS`` (outflow, ``v n_x > 0``) and ``GAMMA_ZERO`` (the walls
``v = +-1``).
"""

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property

import numpy as np


class FacetLabel(IntEnum):
    INTERIOR = 0
    GAMMA_MINUS = 1
    GAMMA_PLUS = 2
    GAMMA_ZERO = 3


@dataclass(frozen=True)
class Facet:
    vertices: tuple
    cells: tuple
    normal: np.ndarray
    n_v: float
    length: float
    h_e: float
    label: FacetLabel


def classify_boundary_facet(midpoint, x_max):
    """Label of a boundary facet from its midpoint ``(x, v)``."""
    x, v = float(midpoint[0]), float(midpoint[1])
    tol = 1e-12 * x_max
    on_side = abs(abs(x) - x_max) <= tol
    on_lid = abs(abs(v) - 1.0) <= tol
    if not (on_side or on_lid) or abs(x) > x_max + tol or abs(v) > 1.0 + tol:
        raise ValueError(f"point ({x}, {v}) is not on the boundary of the domain")
    if on_lid:
        return FacetLabel.GAMMA_ZERO
    # a side facet straddling v = 0 (odd n_v) is treated as inflow; assembly
    # resolves the inflow/outflow split pointwise anyway
    inflow = (x < 0 and v >= 0) or (x > 0 and v <= 0)
    return FacetLabel.GAMMA_MINUS if inflow else FacetLabel.GAMMA_PLUS


def facet_penalty(facet, C_sigma, r):
    """Interior-penalty weight ``C_sigma r^2 / h_e``."""
    h_e = facet.h_e if isinstance(facet, Facet) else float(facet)
    if h_e <= 0:
        raise ValueError("facet size must be positive")
    return C_sigma * r * r / h_e


class Mesh:
    """Immutable triangulation with facet topology.

    Facet data lives in flat arrays (``facet_vertices``, ``facet_cells``,
    ``facet_normals`` ...); ``facets`` gives the per-facet record view.
    ``facet_cells[:, 1]`` is ``-1`` on the boundary and normals point out of
    ``facet_cells[:, 0]``.
    """

    def __init__(self, vertices, cells, x_max, n_x=None, n_v=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        self.x_max = float(x_max)
        self.n_x, self.n_v = n_x, n_v
        self._build_facets()
        for arr in (self.vertices, self.cells, self.facet_vertices, self.facet_cells,
                    self.facet_normals, self.facet_lengths, self.facet_h,
                    self.facet_labels, self.cell_diameters):
            arr.setflags(write=False)

    def _build_facets(self):
        X, C = self.vertices, self.cells
        nc = len(C)
        e = np.concatenate([C[:, [0, 1]], C[:, [1, 2]], C[:, [2, 0]]])
        owner = np.tile(np.arange(nc), 3)
        key = np.sort(e, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if counts.max() > 2:
            raise ValueError("non-manifold mesh: a facet is shared by more than two cells")
        nf = len(uniq)
        fc = -np.ones((nf, 2), dtype=np.int64)
        fv = np.zeros((nf, 2), dtype=np.int64)
        order = np.lexsort((owner, inv))
        seen = np.zeros(nf, dtype=bool)
        for k in order:
            f = inv[k]
            if not seen[f]:
                fc[f, 0] = owner[k]
                fv[f] = e[k]
                seen[f] = True
            else:
                fc[f, 1] = owner[k]
        self.facet_vertices = fv
        self.facet_cells = fc

        edge_len = np.linalg.norm(X[C[:, [1, 2, 0]]] - X[C], axis=2)
        self.cell_diameters = edge_len.max(axis=1)

        t = X[fv[:, 1]] - X[fv[:, 0]]
        length = np.linalg.norm(t, axis=1)
        n = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
        # orient outward from the first cell: the opposite vertex lies behind n
        centroid = X[C[fc[:, 0]]].mean(axis=1)
        mid = 0.5 * (X[fv[:, 0]] + X[fv[:, 1]])
        flip = np.einsum("ij,ij->i", centroid - mid, n) > 0
        n[flip] *= -1
        self.facet_normals = n
        self.facet_lengths = length

        interior = fc[:, 1] >= 0
        h = self.cell_diameters[fc[:, 0]].copy()
        h[interior] = 0.5 * (h[interior] + self.cell_diameters[fc[interior, 1]])
        self.facet_h = h

        labels = np.zeros(nf, dtype=np.int64)
        for f in np.flatnonzero(~interior):
            labels[f] = classify_boundary_facet(mid[f], self.x_max)
        self.facet_labels = labels
        self.facet_midpoints = mid

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_facets(self):
        return len(self.facet_vertices)

    @cached_property
    def cell_areas(self):
        X = self.vertices[self.cells]
        d1, d2 = X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def interior_facets(self):
        return np.flatnonzero(self.facet_cells[:, 1] >= 0)

    @property
    def boundary_facets(self):
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    def facet(self, i):
        fc = self.facet_cells[i]
        cells = (int(fc[0]),) if fc[1] < 0 else (int(fc[0]), int(fc[1]))
        n = self.facet_normals[i]
        return Facet(tuple(int(k) for k in self.facet_vertices[i]), cells, n.copy(),
                     float(n[1]), float(self.facet_lengths[i]), float(self.facet_h[i]),
                     FacetLabel(int(self.facet_labels[i])))

    @cached_property
    def facets(self):
        return [self.facet(i) for i in range(self.n_facets)]

    @property
    def h(self):
        """Largest cell diameter."""
        return float(self.cell_diameters.max())

    def write(self, path):
        """Plain-text dump: ``v x y``, ``c i j k`` and ``f i j label`` lines."""
        with open(path, "w") as fh:
            for x, y in self.vertices:
                fh.write(f"v {x:.17g} {y:.17g}\n")
            for i, j, k in self.cells:
                fh.write(f"c {i} {j} {k}\n")
            for (i, j), lab in zip(self.facet_vertices, self.facet_labels):
                fh.write(f"f {i} {j} {FacetLabel(int(lab)).name}\n")


def build_structured(n_x, n_v, x_max=1.0):
    """Uniform grid of ``n_x`` by ``n_v`` quads, each split bottom-left to top-right."""
    if int(n_x) != n_x or int(n_v) != n_v or n_x < 1 or n_v < 1:
        raise ValueError(f"cell counts must be positive integers, got ({n_x}, {n_v})")
    if not x_max > 0:
        raise ValueError(f"x_max must be positive, got {x_max}")
    n_x, n_v = int(n_x), int(n_v)
    xs = np.linspace(-x_max, x_max, n_x + 1)
    vs = np.linspace(-1.0, 1.0, n_v + 1)
    X, V = np.meshgrid(xs, vs, indexing="xy")
    vertices = np.column_stack([X.ravel(), V.ravel()])
    i, j = np.meshgrid(np.arange(n_x), np.arange(n_v), indexing="xy")
    p00 = (i + (n_x + 1) * j).ravel()
    p10, p01 = p00 + 1, p00 + n_x + 1
    p11 = p01 + 1
    cells = np.concatenate([np.column_stack([p00, p10, p11]),
                            np.column_stack([p00, p11, p01])])
    return Mesh(vertices, cells, x_max, n_x, n_v)
