"""Cut a multiply-connected planar mesh into a topological disk.

Boundary components are joined greedily: every round runs a multi-source
Dijkstra from all boundary vertices, takes the shortest path bridging two
different components, and cuts the mesh open along it. ``k`` components take
``k - 1`` rounds, which matches building a minimum spanning tree over the
components one edge at a time.
"""

import heapq

import numpy as np

from .errors import ConnectivityError, PreconditionError, TopologyError
from .mesh import CutMap, EmbeddedMesh, build_topology

__all__ = [
    "label_nearest_component",
    "shortest_bridge_path",
    "cut_along_path",
    "cut_to_disk",
]


def _edge_lengths(mesh):
    e = mesh.topology.edges
    return np.linalg.norm(mesh.coords[e[:, 0]] - mesh.coords[e[:, 1]], axis=1)


def _adjacency(mesh):
    topo = mesh.topology
    adj = [[] for _ in range(topo.n_vertices)]
    for (a, b), w in zip(topo.edges.tolist(), _edge_lengths(mesh).tolist()):
        adj[a].append((b, w))
        adj[b].append((a, w))
    for lst in adj:
        lst.sort()
    return adj


def label_nearest_component(mesh):
    """Multi-source Dijkstra from every boundary vertex.

    Returns ``(labels, dists, preds)``: the index of the nearest boundary
    loop, the graph distance to it, and the predecessor on the shortest path
    (boundary vertices are their own predecessor). Equal distances go to the
    lower loop index.
    """
    topo = mesh.topology
    loops = topo.boundary_loops
    if not loops:
        raise TopologyError("mesh has no boundary")
    n = topo.n_vertices
    dist = np.full(n, np.inf)
    label = np.full(n, -1, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    heap = []
    for k, loop in enumerate(loops):
        for v in loop:
            dist[v] = 0.0
            label[v] = k
            pred[v] = v
            heap.append((0.0, k, v))
    heapq.heapify(heap)
    adj = _adjacency(mesh)
    done = np.zeros(n, dtype=bool)
    while heap:
        d, k, v = heapq.heappop(heap)
        if done[v] or d != dist[v] or k != label[v]:
            continue
        done[v] = True
        for w, length in adj[v]:
            if done[w]:
                continue
            nd = d + length
            if nd < dist[w] or (nd == dist[w] and k < label[w]):
                dist[w] = nd
                label[w] = k
                pred[w] = v
                heapq.heappush(heap, (nd, k, w))
    missing = np.flatnonzero(topo.used_mask & ~done)
    if len(missing):
        raise ConnectivityError(f"vertex {int(missing[0])} is not connected to any boundary")
    return label, dist, pred


def _chain(v, pred):
    out = [v]
    while pred[v] != v:
        v = int(pred[v])
        out.append(v)
    return out


def shortest_bridge_path(labels, dists, preds, mesh):
    """Shortest vertex path joining two different boundary components.

    Returns ``(i, j, path)`` with ``i < j``; ``path`` starts on loop ``i``
    and ends on loop ``j``.
    """
    e = mesh.topology.edges
    la, lb = labels[e[:, 0]], labels[e[:, 1]]
    cross = np.flatnonzero(la != lb)
    if len(cross) == 0:
        raise TopologyError("no edge joins two different boundary components")
    w = _edge_lengths(mesh)
    best = None
    for idx in cross.tolist():
        a, b = int(e[idx, 0]), int(e[idx, 1])
        u, v = (a, b) if labels[a] < labels[b] else (b, a)
        key = (float(dists[u] + w[idx] + dists[v]), int(labels[u]), int(labels[v]), u, v)
        if best is None or key < best:
            best = key
    _, i, j, u, v = best
    path = _chain(u, preds)[::-1] + _chain(v, preds)
    return i, j, path


def _loop_of(topo):
    out = {}
    for k, loop in enumerate(topo.boundary_loops):
        for v in loop:
            out[v] = k
    return out


def _sweep(v, start_face, faces, he, stop_at=None, clockwise=False):
    """Faces around ``v`` from ``start_face``, rotating until ``stop_at`` or the boundary.

    Counterclockwise, face (v, a, b) is followed by the face holding the
    halfedge (v, b); ``stop_at`` ends the sweep at the face whose third
    vertex (after v, a) is ``stop_at``.
    """
    out = []
    f = start_face
    while f is not None:
        out.append(f)
        tri = faces[f]
        c = tri.index(v)
        a, b = tri[(c + 1) % 3], tri[(c + 2) % 3]
        if clockwise:
            f = he.get((a, v))
        else:
            if stop_at is not None and b == stop_at:
                break
            f = he.get((v, b))
        if f == start_face:
            raise PreconditionError(f"sweep around vertex {v} closed without a stop")
    return out


def cut_along_path(mesh, path):
    """Duplicate the vertices and edges of ``path`` and reconnect the left side.

    Faces on the left of the directed path switch to the copies, so the two
    boundary loops at the path ends merge into one.
    """
    topo = mesh.topology
    path = [int(v) for v in path]
    if len(path) < 2:
        raise PreconditionError("path needs at least two vertices")
    if len(set(path)) != len(path):
        raise PreconditionError("path is not simple")
    loop_of = _loop_of(topo)
    first, last = path[0], path[-1]
    if first not in loop_of or last not in loop_of:
        raise PreconditionError("path endpoints must lie on the boundary")
    if loop_of[first] == loop_of[last]:
        raise PreconditionError("path endpoints lie on the same boundary loop")
    for v in path[1:-1]:
        if v in loop_of:
            raise PreconditionError(f"path vertex {v} touches a boundary loop")
    he = topo.halfedge_face
    for a, b in zip(path, path[1:]):
        if (a, b) not in he or (b, a) not in he:
            raise PreconditionError(f"({a}, {b}) is not an interior mesh edge")

    faces = topo.faces.tolist()
    n = topo.n_vertices
    L = len(path) - 1
    copy_of = {v: n + m for m, v in enumerate(path)}
    left = {}
    for m, v in enumerate(path):
        if m == 0:
            fs = _sweep(v, he[(v, path[1])], faces, he)
        elif m == L:
            fs = _sweep(v, he[(path[m - 1], v)], faces, he, clockwise=True)
        else:
            fs = _sweep(v, he[(v, path[m + 1])], faces, he, stop_at=path[m - 1])
        for f in fs:
            left.setdefault(f, set()).add(v)

    new_faces = [list(t) for t in faces]
    for f, vs in left.items():
        new_faces[f] = [copy_of[v] if v in vs else v for v in new_faces[f]]
    coords = np.vstack([mesh.coords, mesh.coords[path]])
    origin = np.concatenate([np.arange(n), np.array(path, dtype=np.int64)])
    new_topo = build_topology(np.array(new_faces, dtype=np.int64), n + len(path))
    cut = EmbeddedMesh(new_topo, coords, mesh.index_base, None)
    return cut, CutMap(origin, (tuple(path),))


def cut_to_disk(mesh):
    """Repeatedly cut along shortest bridges until one boundary loop remains.

    Returns ``(disk, cutmap)``; ``cutmap.paths`` lists the cut paths in
    input-mesh numbering.
    """
    cmap = CutMap.identity(mesh.n_vertices)
    current = mesh
    while len(current.topology.boundary_loops) > 1:
        labels, dists, preds = label_nearest_component(current)
        _, _, path = shortest_bridge_path(labels, dists, preds, current)
        current, step = cut_along_path(current, path)
        cmap = cmap.compose(step)
    return current, cmap
