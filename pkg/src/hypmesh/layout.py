"""Re-embed a mesh from an angle structure.

Boundary vertices are pinned; every other vertex is placed by breadth-first
traversal over faces, constructing each triangle's third vertex from a
placed edge with the law of sines. A vertex reached through several faces
keeps its first placement; later placements only feed ``max_conflict``.
"""

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError

__all__ = ["LayoutResult", "place_third_vertex", "layout_mesh", "boundary_self_intersections"]

# sin of the angle opposite the base below this is treated as degenerate
SIN_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class LayoutResult:
    coords: np.ndarray
    max_conflict: float
    unreached_count: int


def place_third_vertex(p_a, p_b, angle_a, angle_b, angle_c):
    """Apex ``c`` of the CCW triangle ``(a, b, c)`` with the given corner angles."""
    s = np.sin(angle_c)
    if not s >= SIN_EPS:
        raise DegeneracyError(f"angle opposite the base is degenerate (sin = {s:.3g})")
    p_a = np.asarray(p_a, dtype=float)
    d = np.asarray(p_b, dtype=float) - p_a
    L = np.hypot(d[0], d[1])
    if L == 0.0:
        raise DegeneracyError("base edge has zero length")
    r = np.sin(angle_b) / s
    ca, sa = np.cos(angle_a), np.sin(angle_a)
    return p_a + r * np.array([ca * d[0] - sa * d[1], sa * d[0] + ca * d[1]])


def _pinned(topo, boundary_coords):
    bnd = np.flatnonzero(topo.boundary_mask)
    if isinstance(boundary_coords, dict):
        missing = [int(v) for v in bnd if int(v) not in boundary_coords]
        if missing:
            raise ValueError(f"no coordinates for boundary vertex {missing[0]}")
        return bnd, np.array([boundary_coords[int(v)] for v in bnd], dtype=float).reshape(-1, 2)
    xy = np.asarray(boundary_coords, dtype=float)
    if xy.shape != (topo.n_vertices, 2):
        raise ValueError("boundary_coords must be a dict or an (n_vertices, 2) array")
    return bnd, xy[bnd]


def layout_mesh(topo, A, boundary_coords):
    """Lay out every vertex from angles ``A`` with the boundary pinned.

    ``boundary_coords`` is either ``{vertex: (x, y)}`` or an ``(n, 2)`` array
    of which only the boundary rows are read. Faces owning a boundary edge
    seed the queue in ascending face order, each built on that edge.
    """
    A = np.asarray(A, dtype=float).reshape(-1, 3)
    faces = topo.faces.tolist()
    he = topo.halfedge_face
    coords = np.full((topo.n_vertices, 2), np.nan)
    placed = np.zeros(topo.n_vertices, dtype=bool)
    bnd, xy = _pinned(topo, boundary_coords)
    coords[bnd] = xy
    placed[bnd] = True

    marked = np.zeros(len(faces), dtype=bool)
    queue = deque()
    for f, tri in enumerate(faces):
        for c in range(3):
            if (tri[(c + 1) % 3], tri[c]) not in he:
                queue.append((f, c))
                marked[f] = True
                break

    conflict = 0.0
    while queue:
        f, c = queue.popleft()
        tri = faces[f]
        a, b, k = tri[c], tri[(c + 1) % 3], tri[(c + 2) % 3]
        pk = place_third_vertex(coords[a], coords[b], A[f, c], A[f, (c + 1) % 3], A[f, (c + 2) % 3])
        if placed[k]:
            conflict = max(conflict, float(np.hypot(*(pk - coords[k]))))
        else:
            coords[k] = pk
            placed[k] = True
        for d in range(3):
            u, v = tri[d], tri[(d + 1) % 3]
            g = he.get((v, u))
            if g is not None and not marked[g]:
                marked[g] = True
                queue.append((g, faces[g].index(v)))

    unreached = int(np.count_nonzero(topo.used_mask & ~placed))
    hits = boundary_self_intersections(topo, coords)
    if hits:
        warnings.warn(f"layout boundary crosses itself at {len(hits)} edge pair(s)", RuntimeWarning)
    return LayoutResult(coords, conflict, unreached)


def _segments_cross(p, q, r, s):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p, q, r), orient(p, q, s)
    d3, d4 = orient(r, s, p), orient(r, s, q)
    return d1 * d2 < 0 and d3 * d4 < 0


def boundary_self_intersections(topo, coords):
    """Pairs of non-adjacent boundary edges that properly cross.

    Uses a sort-and-sweep on x extents, so typical cost is near linear.
    """
    segs = []
    for loop in topo.boundary_loops:
        m = len(loop)
        segs.extend((loop[t], loop[(t + 1) % m]) for t in range(m))
    if not segs or not np.all(np.isfinite(coords[[u for u, _ in segs]])):
        return []
    P = np.array([coords[u] for u, _ in segs])
    Q = np.array([coords[v] for _, v in segs])
    lo, hi = np.minimum(P[:, 0], Q[:, 0]), np.maximum(P[:, 0], Q[:, 0])
    order = np.argsort(lo, kind="stable")
    hits = []
    active = []
    for i in order.tolist():
        active = [j for j in active if hi[j] >= lo[i]]
        for j in active:
            if set(segs[i]) & set(segs[j]):
                continue
            if _segments_cross(P[i], Q[i], P[j], Q[j]):
                hits.append((min(i, j), max(i, j)))
        active.append(i)
    return sorted(hits)
