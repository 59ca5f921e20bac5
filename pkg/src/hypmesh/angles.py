"""Angle structures: corner angles, per-vertex angle sums and holonomies.

An angle structure is an ``(F, 3)`` float array; ``A[f, c]`` is the corner
angle of face ``f`` at its ``c``-th vertex. Flattened (row-major) it is the
optimisation variable of length ``3F``.

Holonomy sign convention: for a CCW face ``(i, j, k)`` the contribution to
vertex ``i`` is ``ln sin A[k] - ln sin A[j]``. With this choice a boundary
vertex of an embedded mesh has holonomy ``ln(l_out / l_in)``, where
``l_out`` / ``l_in`` are the lengths of its outgoing / incoming boundary
edges along the loop direction stored in the topology.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegeneracyError, SingularityError
from .mesh import AREA_EPS

__all__ = [
    "ConstraintSpec",
    "induce_angles",
    "angle_sum",
    "angle_sums",
    "holonomy",
    "holonomies",
    "holonomy_jacobian",
    "derive_targets",
    "boundary_log_ratios",
]


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Per-vertex targets: angle sums ``theta`` and holonomies ``holonomy_target``."""

    theta: np.ndarray
    holonomy_target: np.ndarray


def induce_angles(mesh):
    """Corner angles of every face of an embedded mesh.

    Uses atan2(|cross|, dot) per corner, which stays accurate for needle
    triangles where the law-of-cosines ratio loses digits.
    """
    p = mesh.coords[mesh.faces]
    if len(p) == 0:
        return np.zeros((0, 3))
    used = mesh.coords[np.unique(mesh.faces)]
    diag2 = float(np.sum((used.max(axis=0) - used.min(axis=0)) ** 2))
    out = np.empty((len(p), 3))
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        v = p[:, (c + 2) % 3] - p[:, c]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        dot = np.einsum("ij,ij->i", u, v)
        if c == 0:
            area = 0.5 * np.abs(cross)
            bad = np.flatnonzero(area <= AREA_EPS * diag2)
            if len(bad):
                raise DegeneracyError(f"face {int(bad[0])} is degenerate", face=int(bad[0]))
        out[:, c] = np.arctan2(np.abs(cross), dot)
    return out


def angle_sums(A, topo):
    """Theta(i, A) for every vertex."""
    A = np.asarray(A).reshape(-1, 3)
    return np.bincount(topo.faces.ravel(), weights=A.ravel(), minlength=topo.n_vertices)


def angle_sum(i, A, topo):
    return float(angle_sums(A, topo)[i])


def _log_sin(A):
    if np.any(A <= 0.0) or np.any(A >= np.pi):
        raise SingularityError("holonomy needs every angle strictly inside (0, pi)")
    return np.log(np.sin(A))


def holonomies(A, topo):
    """H(i, A) for every vertex."""
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    ls = _log_sin(A)
    # corner c of face f contributes  ls[f, c+2] - ls[f, c+1]  to vertex faces[f, c]
    contrib = ls[:, [2, 0, 1]] - ls[:, [1, 2, 0]]
    return np.bincount(topo.faces.ravel(), weights=contrib.ravel(), minlength=topo.n_vertices)


def holonomy(i, A, topo):
    return float(holonomies(A, topo)[i])


def holonomy_jacobian(A, topo):
    """Sparse ``(V, 3F)`` Jacobian of the holonomy vector.

    The angle at corner d of a face enters the holonomy of the vertex at
    corner d+1 with ``+cot`` and of the vertex at corner d+2 with ``-cot``.
    """
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    if np.any(A <= 0.0) or np.any(A >= np.pi):
        raise SingularityError("holonomy needs every angle strictly inside (0, pi)")
    F = len(A)
    cot = (np.cos(A) / np.sin(A)).ravel()
    cols = np.arange(3 * F)
    faces = topo.faces
    plus_rows = faces[:, [1, 2, 0]].ravel()
    minus_rows = faces[:, [2, 0, 1]].ravel()
    rows = np.concatenate([plus_rows, minus_rows])
    data = np.concatenate([cot, -cot])
    return sp.csr_matrix((data, (rows, np.concatenate([cols, cols]))),
                         shape=(topo.n_vertices, 3 * F))


def derive_targets(mesh):
    """Angle-sum and holonomy targets read off the input embedding."""
    A = induce_angles(mesh)
    return ConstraintSpec(angle_sums(A, mesh.topology), holonomies(A, mesh.topology))


def boundary_log_ratios(mesh):
    """``{v: ln(l_out / l_in)}`` for every boundary vertex, from coordinates."""
    out = {}
    xy = mesh.coords
    for loop in mesh.topology.boundary_loops:
        m = len(loop)
        for t, v in enumerate(loop):
            nxt, prv = loop[(t + 1) % m], loop[t - 1]
            l_out = np.linalg.norm(xy[nxt] - xy[v])
            l_in = np.linalg.norm(xy[v] - xy[prv])
            out[v] = float(np.log(l_out / l_in))
    return out
