"""Shared helpers for the demo scripts: output directory and a headless pyplot."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "_output")
os.makedirs(OUT, exist_ok=True)


def save(fig, name):
    path = os.path.join(OUT, name)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    print(f"saved {path}")


def tripcolor(ax, field, title):
    """Plot a field on the Lagrange-node sub-triangulation."""
    xy = field.space.dof_coords
    im = ax.tripcolor(xy[:, 0], xy[:, 1], field.space.sub_triangles(), field.coeffs,
                      shading="gouraud")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("v")
    ax.set_title(title)
    return im
