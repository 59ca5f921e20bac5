"""Synthetic planar test meshes.

Grid-based regions (square, annulus, plate with holes, H and L shapes) are
built from square cells with rectangular blocks of cells removed. Each cell
is split along the diagonal giving the larger minimum angle, which mimics a
Delaunay triangulation once interior vertices are jittered.
"""

import numpy as np

from .mesh import EmbeddedMesh, build_topology

__all__ = [
    "grid_region",
    "square",
    "annulus",
    "holes_plate",
    "h_shape",
    "l_shape",
    "equilateral_patch",
    "fan",
    "small_annulus",
    "MODELS",
]


def _min_angle(p, q, r):
    def ang(a, b, c):
        u, v = b - a, c - a
        return np.arctan2(abs(u[0] * v[1] - u[1] * v[0]), u @ v)

    return min(ang(p, q, r), ang(q, r, p), ang(r, p, q))


def _area(p, q, r):
    return 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))


def grid_region(nx, ny, h=1.0, removed=(), jitter=0.0, seed=0):
    """Triangulated union of ``nx * ny`` cells minus ``removed`` blocks.

    ``removed`` holds ``(i0, i1, j0, j1)`` half-open cell ranges. Vertices not
    on the region boundary are moved by uniform noise in
    ``[-jitter*h, jitter*h]`` per coordinate; draws that would flip or flatten
    a triangle are redrawn.
    """
    keep = np.ones((nx, ny), dtype=bool)
    for i0, i1, j0, j1 in removed:
        keep[i0:i1, j0:j1] = False

    vid = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    n_cells_touching = np.zeros((nx + 1, ny + 1), dtype=np.int64)
    for di in (0, 1):
        for dj in (0, 1):
            n_cells_touching[di:nx + di, dj:ny + dj] += keep
    used = n_cells_touching > 0
    # column-major numbering: j fastest
    vid[used] = np.arange(int(used.sum()))
    ij = np.argwhere(used)
    base = ij.astype(float) * h
    movable = n_cells_touching[used] == 4

    rng = np.random.default_rng(seed)
    offsets = np.zeros_like(base)
    if jitter > 0:
        offsets[movable] = rng.uniform(-jitter * h, jitter * h, size=(int(movable.sum()), 2))

    cells = np.argwhere(keep)
    for _attempt in range(200):
        xy = base + offsets
        faces = []
        bad_vertices = set()
        for i, j in cells.tolist():
            v00, v10, v11, v01 = vid[i, j], vid[i + 1, j], vid[i + 1, j + 1], vid[i, j + 1]
            opts = [((v00, v10, v11), (v00, v11, v01)), ((v00, v10, v01), (v10, v11, v01))]
            scores = []
            for tris in opts:
                ok = all(_area(*xy[list(t)]) > 1e-3 * h * h for t in tris)
                q = min(_min_angle(*xy[list(t)]) for t in tris)
                scores.append((ok, round(q, 12)))
            # ties (unjittered grid) alternate to give a union-jack pattern
            if scores[0] == scores[1]:
                pick = (i + j) % 2
            else:
                pick = 0 if scores[0] > scores[1] else 1
            if not scores[pick][0]:
                bad_vertices.update([v00, v10, v11, v01])
            faces.extend(opts[pick])
        bad = [v for v in sorted(bad_vertices) if movable[v]]
        if not bad_vertices:
            break
        if not bad:
            raise RuntimeError("grid cell is degenerate without jitter")
        offsets[bad] = rng.uniform(-jitter * h, jitter * h, size=(len(bad), 2))
    else:
        raise RuntimeError("could not draw a valid jitter")

    faces = np.array(faces, dtype=np.int64)
    return EmbeddedMesh(build_topology(faces, len(xy)), xy)


def square(n=20, jitter=0.0, seed=0):
    """Unit square split into ``n * n`` cells."""
    return grid_region(n, n, 1.0 / n, jitter=jitter, seed=seed)


def annulus(n=24, hole=8, jitter=0.0, seed=0):
    """Square plate with one centred square hole of ``hole * hole`` cells."""
    a = (n - hole) // 2
    return grid_region(n, n, 1.0 / n, removed=[(a, a + hole, a, a + hole)],
                       jitter=jitter, seed=seed)


def holes_plate(n=30, jitter=0.0, seed=0):
    """Square plate with three rectangular holes."""
    k = n / 30.0
    r = lambda *v: tuple(int(round(t * k)) for t in v)  # noqa: E731
    removed = [r(4, 11, 4, 10), r(17, 25, 6, 12), r(9, 17, 18, 25)]
    return grid_region(n, n, 1.0 / n, removed=removed, jitter=jitter, seed=seed)


def h_shape(k=8, jitter=0.0, seed=0):
    """Letter H from a ``3k * 3k`` grid with notches top and bottom."""
    n = 3 * k
    removed = [(k, 2 * k, 0, k), (k, 2 * k, 2 * k, n)]
    return grid_region(n, n, 1.0 / n, removed=removed, jitter=jitter, seed=seed)


def l_shape(k=10, jitter=0.0, seed=0):
    n = 2 * k
    return grid_region(n, n, 1.0 / n, removed=[(k, n, k, n)], jitter=jitter, seed=seed)


def equilateral_patch(m=4):
    """Parallelogram of ``2 m^2`` equilateral triangles (unit edges)."""
    s = np.sqrt(3.0) / 2.0
    idx = {}
    pts = []
    for j in range(m + 1):
        for i in range(m + 1):
            idx[i, j] = len(pts)
            pts.append((i + 0.5 * j, s * j))
    faces = []
    for j in range(m):
        for i in range(m):
            faces.append((idx[i, j], idx[i + 1, j], idx[i, j + 1]))
            faces.append((idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    pts = np.array(pts)
    return EmbeddedMesh(build_topology(np.array(faces), len(pts)), pts)


def fan(k=6, radius=1.0):
    """Centre vertex 0 joined to a regular ``k``-gon."""
    t = 2 * np.pi * np.arange(k) / k
    pts = np.vstack([[0.0, 0.0], np.column_stack([radius * np.cos(t), radius * np.sin(t)])])
    faces = [(0, 1 + i, 1 + (i + 1) % k) for i in range(k)]
    return EmbeddedMesh(build_topology(np.array(faces), len(pts)), pts)


def small_annulus():
    """8 vertices: outer square 0-3, inner square 4-7, 8 faces."""
    pts = np.array([
        [-2.0, -2.0], [2.0, -2.0], [2.0, 2.0], [-2.0, 2.0],
        [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
    ])
    faces = []
    for a in range(4):
        b = (a + 1) % 4
        faces.append((a, b, 4 + b))
        faces.append((a, 4 + b, 4 + a))
    return EmbeddedMesh(build_topology(np.array(faces), 8), pts)


MODELS = {
    "square": square,
    "annulus": annulus,
    "hole3": holes_plate,
    "h": h_shape,
    "l": l_shape,
}
