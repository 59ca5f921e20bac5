"""Mesh combinatorics, planar embeddings and file I/O.

Faces are stored as an ``(F, 3)`` integer array. After
:func:`normalize_orientation` every face is counterclockwise, and every
other module assumes that convention.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ConnectivityError,
    DegeneracyError,
    MeshParseError,
    NonManifoldError,
    TopologyError,
)

log = logging.getLogger(__name__)

# faces with |area| below this fraction of bbox_diag^2 count as degenerate
AREA_EPS = 1e-14


@dataclass(frozen=True, eq=False)
class MeshTopology:
    n_vertices: int
    faces: np.ndarray
    edges: np.ndarray
    boundary_loops: tuple
    interior: np.ndarray
    warnings: tuple = ()

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    @cached_property
    def boundary_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        for loop in self.boundary_loops:
            mask[list(loop)] = True
        return mask

    @cached_property
    def used_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.faces.ravel()] = True
        return mask

    @cached_property
    def halfedge_face(self):
        """Map directed edge ``(a, b)`` to the face that contains it."""
        out = {}
        for f, (a, b, c) in enumerate(self.faces.tolist()):
            out[(a, b)] = f
            out[(b, c)] = f
            out[(c, a)] = f
        return out

    @cached_property
    def vertex_neighbors(self):
        nbrs = [[] for _ in range(self.n_vertices)]
        for a, b in self.edges.tolist():
            nbrs[a].append(b)
            nbrs[b].append(a)
        return [sorted(x) for x in nbrs]

    def same_as(self, other):
        return (
            self.n_vertices == other.n_vertices
            and np.array_equal(self.faces, other.faces)
            and np.array_equal(self.edges, other.edges)
            and self.boundary_loops == other.boundary_loops
        )


@dataclass(frozen=True, eq=False)
class EmbeddedMesh:
    topology: MeshTopology
    coords: np.ndarray
    # 0 or 1; remembered so .node/.ele output uses the input's numbering
    index_base: int = 0
    markers: np.ndarray | None = field(default=None)

    @property
    def faces(self):
        return self.topology.faces

    @property
    def n_vertices(self):
        return self.topology.n_vertices

    @property
    def n_faces(self):
        return self.topology.n_faces

    def with_coords(self, coords):
        return EmbeddedMesh(self.topology, np.asarray(coords, dtype=float),
                            self.index_base, self.markers)

    def bbox_diagonal(self):
        used = self.coords[self.topology.used_mask] if self.n_faces else self.coords
        if len(used) == 0:
            return 0.0
        return float(np.linalg.norm(used.max(axis=0) - used.min(axis=0)))


@dataclass(frozen=True, eq=False)
class CutMap:
    """``origin[v]`` is the input-mesh vertex that cut-mesh vertex ``v`` copies.

    ``paths`` holds the vertex paths cut so far, in input-mesh numbering.
    """

    origin: np.ndarray
    paths: tuple = ()

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    def compose(self, later):
        """Map for applying ``self`` first and then ``later``."""
        moved = tuple(tuple(int(self.origin[v]) for v in p) for p in later.paths)
        return CutMap(self.origin[later.origin], self.paths + moved)


def signed_areas(coords, faces):
    p = coords[faces]
    u = p[:, 1] - p[:, 0]
    v = p[:, 2] - p[:, 0]
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def build_topology(faces, n):
    """Derive edges, boundary loops and interior flags from a face list.

    Raises NonManifoldError when an edge is shared by three or more faces or
    a vertex is pinched between two boundary fans. Unreferenced vertices are
    kept and noted in ``warnings``.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= n):
        raise TopologyError("face references a vertex index outside [0, n)")
    if np.any((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
              | (faces[:, 0] == faces[:, 2])):
        bad = int(np.flatnonzero((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                                 | (faces[:, 0] == faces[:, 2]))[0])
        raise TopologyError(f"face {bad} repeats a vertex")

    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    und = np.sort(he, axis=1)
    edges, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        e = edges[np.argmax(counts > 2)]
        raise NonManifoldError(f"edge ({e[0]}, {e[1]}) is shared by {counts.max()} faces")

    boundary_he = he[counts[inverse] == 1]
    succ = {}
    pred_count = {}
    adjacency = {}
    for a, b in boundary_he.tolist():
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
        succ[a] = b
        pred_count[b] = pred_count.get(b, 0) + 1
    for v, nb in adjacency.items():
        if len(nb) != 2:
            raise NonManifoldError(f"vertex {v} lies on {len(nb)} boundary edges")
    directed = set(map(tuple, boundary_he.tolist()))

    loops = []
    seen = set()
    for start in sorted(adjacency):
        if start in seen:
            continue
        # walk undirected, then fix direction from the face halfedge
        a, b = adjacency[start]
        nxt = a if (start, a) in directed else b
        loop = [start]
        prev, cur = start, nxt
        seen.add(start)
        while cur != start:
            if cur in seen:
                raise NonManifoldError(f"boundary walk revisits vertex {cur}")
            loop.append(cur)
            seen.add(cur)
            n0, n1 = adjacency[cur]
            prev, cur = cur, (n1 if n0 == prev else n0)
        loops.append(tuple(loop))

    interior = np.zeros(n, dtype=bool)
    used = np.zeros(n, dtype=bool)
    used[faces.ravel()] = True
    interior[used] = True
    interior[list(adjacency)] = False

    warnings = []
    isolated = np.flatnonzero(~used)
    if len(isolated):
        msg = f"{len(isolated)} isolated vertices retained (first: {int(isolated[0])})"
        log.warning(msg)
        warnings.append(msg)
    return MeshTopology(n, faces, edges, tuple(loops), interior, tuple(warnings))


def euler_characteristic(topo):
    return topo.n_vertices - topo.n_edges + topo.n_faces


def _degenerate_threshold(coords, faces):
    if len(faces) == 0:
        return 0.0
    used = coords[np.unique(faces)]
    diag2 = float(np.sum((used.max(axis=0) - used.min(axis=0)) ** 2))
    return AREA_EPS * diag2


def normalize_orientation(mesh):
    """Reorder each face so that its signed area is positive."""
    faces = mesh.faces.copy()
    area = signed_areas(mesh.coords, faces)
    tiny = _degenerate_threshold(mesh.coords, faces)
    flat = np.flatnonzero(np.abs(area) <= tiny)
    if len(flat):
        raise DegeneracyError(f"face {int(flat[0])} has (near) zero area", face=int(flat[0]))
    neg = area < 0
    faces[neg] = faces[neg][:, [0, 2, 1]]
    topo = build_topology(faces, mesh.n_vertices)
    return EmbeddedMesh(topo, mesh.coords.copy(), mesh.index_base, mesh.markers)


def check_planar_region(mesh):
    """Reject inputs the pipeline cannot handle.

    Requires a single connected piece whose Euler characteristic equals
    2 - (number of boundary loops), i.e. a disk with holes.
    """
    topo = mesh.topology
    if topo.n_faces == 0:
        raise TopologyError("mesh has no faces")
    if not topo.boundary_loops:
        raise TopologyError("closed mesh: a planar region needs at least one boundary loop")
    # consistent orientation: each interior edge seen once in each direction
    if len(topo.halfedge_face) != 3 * topo.n_faces:
        raise TopologyError("faces are not consistently oriented (folded embedding)")
    n_used = int(topo.used_mask.sum())
    chi = n_used - topo.n_edges + topo.n_faces
    b = len(topo.boundary_loops)
    if not is_connected(topo):
        raise ConnectivityError("mesh has more than one connected piece")
    if chi != 2 - b:
        raise TopologyError(
            f"Euler characteristic {chi} with {b} boundary loops: not a planar region")


def is_connected(topo):
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components

    used = np.flatnonzero(topo.used_mask)
    if len(used) == 0:
        return True
    n = topo.n_vertices
    e = topo.edges
    g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return len(np.unique(labels[used])) == 1


# ---------------------------------------------------------------- file I/O

def _content_lines(text):
    """Yield (line_number, tokens) for non-empty lines, '#' comments removed."""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _num(tok, kind, no, source):
    try:
        return kind(tok)
    except ValueError:
        raise MeshParseError(f"expected {kind.__name__}, got {tok!r}", no, source) from None


def parse_node_ele(node_text, ele_text):
    """Read Triangle-style ``.node`` / ``.ele`` texts.

    Indexing base (0 or 1) is taken from the first node index; the ``.ele``
    file must use the same base.
    """
    lines = _content_lines(node_text)
    try:
        no, head = next(lines)
    except StopIteration:
        raise MeshParseError("empty .node file", source=".node") from None
    if len(head) < 2:
        raise MeshParseError("header needs '<#points> <dim> [<#attrs> <#markers>]'", no, ".node")
    npts = _num(head[0], int, no, ".node")
    dim = _num(head[1], int, no, ".node")
    nattr = _num(head[2], int, no, ".node") if len(head) > 2 else 0
    nmark = _num(head[3], int, no, ".node") if len(head) > 3 else 0
    if dim != 2:
        raise MeshParseError(f"dimension must be 2, got {dim}", no, ".node")
    if npts < 0 or nattr < 0 or nmark not in (0, 1):
        raise MeshParseError("invalid counts in header", no, ".node")

    coords = np.empty((npts, 2))
    markers = np.zeros(npts, dtype=np.int64) if nmark else None
    base = None
    for i in range(npts):
        try:
            no, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {npts} points, found {i}", source=".node") from None
        if len(tok) < 3 + nattr + nmark:
            raise MeshParseError("too few fields on point line", no, ".node")
        idx = _num(tok[0], int, no, ".node")
        if base is None:
            if idx not in (0, 1):
                raise MeshParseError(f"first point index must be 0 or 1, got {idx}", no, ".node")
            base = idx
        if idx != base + i:
            raise MeshParseError(f"point index {idx} out of sequence", no, ".node")
        coords[i] = (_num(tok[1], float, no, ".node"), _num(tok[2], float, no, ".node"))
        if nmark:
            markers[i] = _num(tok[3 + nattr], int, no, ".node")
    if base is None:
        base = 0

    lines = _content_lines(ele_text)
    try:
        no, head = next(lines)
    except StopIteration:
        raise MeshParseError("empty .ele file", source=".ele") from None
    if len(head) < 2:
        raise MeshParseError("header needs '<#triangles> <nodes-per-tri> [<#attrs>]'", no, ".ele")
    ntri = _num(head[0], int, no, ".ele")
    per = _num(head[1], int, no, ".ele")
    if per != 3:
        raise MeshParseError(f"only 3-node triangles are supported, got {per}", no, ".ele")
    faces = np.empty((ntri, 3), dtype=np.int64)
    for i in range(ntri):
        try:
            no, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {ntri} triangles, found {i}", source=".ele") from None
        if len(tok) < 4:
            raise MeshParseError("too few fields on triangle line", no, ".ele")
        vs = [_num(t, int, no, ".ele") - base for t in tok[1:4]]
        for v in vs:
            if not 0 <= v < npts:
                raise MeshParseError(f"node {v + base} out of range (have {npts} points)",
                                     no, ".ele")
        faces[i] = vs
    try:
        topo = build_topology(faces, npts)
    except TopologyError as exc:
        # repeated vertices inside a triangle are a file problem
        if isinstance(exc, NonManifoldError):
            raise
        raise MeshParseError(str(exc), source=".ele") from exc
    return EmbeddedMesh(topo, coords, base, markers)


def parse_off(text):
    """Read an ASCII OFF file holding a planar triangle mesh (z == 0)."""
    lines = _content_lines(text)
    try:
        no, tok = next(lines)
    except StopIteration:
        raise MeshParseError("empty OFF file", source="OFF") from None
    if not tok[0].upper().endswith("OFF"):
        raise MeshParseError("missing OFF header", no, "OFF")
    counts = tok[1:]
    if not counts:
        try:
            no, counts = next(lines)
        except StopIteration:
            raise MeshParseError("missing counts line", source="OFF") from None
    if len(counts) < 2:
        raise MeshParseError("counts line needs '<#vertices> <#faces> [<#edges>]'", no, "OFF")
    nv = _num(counts[0], int, no, "OFF")
    nf = _num(counts[1], int, no, "OFF")
    coords = np.empty((nv, 2))
    for i in range(nv):
        try:
            no, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {nv} vertices, found {i}", source="OFF") from None
        if len(tok) < 2:
            raise MeshParseError("vertex line needs at least x y", no, "OFF")
        coords[i] = (_num(tok[0], float, no, "OFF"), _num(tok[1], float, no, "OFF"))
        if len(tok) > 2 and abs(_num(tok[2], float, no, "OFF")) > 1e-12:
            raise MeshParseError("nonzero z coordinate: only planar meshes are supported",
                                 no, "OFF")
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        try:
            no, tok = next(lines)
        except StopIteration:
            raise MeshParseError(f"expected {nf} faces, found {i}", source="OFF") from None
        k = _num(tok[0], int, no, "OFF")
        if k != 3:
            raise MeshParseError(f"face with {k} vertices: only triangles are supported",
                                 no, "OFF")
        if len(tok) < 4:
            raise MeshParseError("truncated face line", no, "OFF")
        vs = [_num(t, int, no, "OFF") for t in tok[1:4]]
        for v in vs:
            if not 0 <= v < nv:
                raise MeshParseError(f"vertex {v} out of range", no, "OFF")
        faces[i] = vs
    return EmbeddedMesh(build_topology(faces, nv), coords)


def _fmt(x):
    return repr(float(x))


def format_node_ele(mesh):
    """Return ``(node_text, ele_text)``; round-trips through parse_node_ele."""
    base = mesh.index_base
    nmark = 1 if mesh.markers is not None else 0
    out = [f"{mesh.n_vertices} 2 0 {nmark}"]
    for i, (x, y) in enumerate(mesh.coords):
        row = f"{i + base} {_fmt(x)} {_fmt(y)}"
        if nmark:
            row += f" {int(mesh.markers[i])}"
        out.append(row)
    node = "\n".join(out) + "\n"
    out = [f"{mesh.n_faces} 3 0"]
    for i, (a, b, c) in enumerate(mesh.faces.tolist()):
        out.append(f"{i + base} {a + base} {b + base} {c + base}")
    ele = "\n".join(out) + "\n"
    return node, ele


def format_off(mesh):
    out = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    for x, y in mesh.coords:
        out.append(f"{_fmt(x)} {_fmt(y)} 0.0")
    for a, b, c in mesh.faces.tolist():
        out.append(f"3 {a} {b} {c}")
    return "\n".join(out) + "\n"


def mesh_from_arrays(coords, faces):
    """Convenience constructor; faces are used as given (no reorientation)."""
    coords = np.asarray(coords, dtype=float)
    return EmbeddedMesh(build_topology(faces, len(coords)), coords)
