"""End-to-end mesh improvement: cut, optimise angles, lay out, merge, write.

:func:`improve_mesh` works on in-memory meshes; :func:`run_pipeline` adds
file input/output and maps failures to process exit codes.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .angles import derive_targets, induce_angles
from .cut import cut_to_disk
from .errors import DegeneracyError, MeshParseError, TopologyError
from .layout import layout_mesh
from .mesh import (
    check_planar_region,
    format_node_ele,
    format_off,
    normalize_orientation,
    parse_node_ele,
    parse_off,
    signed_areas,
)
from .optimizer import SolverConfig, argmax, argmax_relaxed
from .quality import quality_report

log = logging.getLogger(__name__)

__all__ = [
    "EXIT_OK",
    "EXIT_PARSE",
    "EXIT_TOPOLOGY",
    "EXIT_NONCONVERGENCE",
    "EXIT_LAYOUT",
    "EXIT_IO",
    "PipelineConfig",
    "PipelineResult",
    "improve_mesh",
    "run_pipeline",
    "read_mesh",
    "write_mesh",
    "write_svg",
    "write_report",
]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_TOPOLOGY = 3
EXIT_NONCONVERGENCE = 4
EXIT_LAYOUT = 5
EXIT_IO = 6

# layout tearing above this fraction of the bbox diagonal fails the run
CONFLICT_LIMIT = 1e-3

STRATEGIES = ("standard", "relaxed")


@dataclass(frozen=True)
class PipelineConfig:
    """Inputs, outputs and solver settings for one run.

    Give either ``node`` and ``ele`` or ``off``. ``out_format`` is
    ``"node"`` or ``"off"``; ``None`` keeps the input format. For node/ele
    output, ``out`` is the path stem and gets ``.node`` / ``.ele`` suffixes.
    """

    out: Path
    node: Path | None = None
    ele: Path | None = None
    off: Path | None = None
    out_format: str | None = None
    strategy: str = "standard"
    solver: SolverConfig = field(default_factory=SolverConfig)
    svg: Path | None = None
    report: Path | None = None
    trace: Path | None = None

    def __post_init__(self):
        has_ne = self.node is not None or self.ele is not None
        if has_ne == (self.off is not None):
            raise ValueError("give either node+ele or off as input")
        if has_ne and (self.node is None or self.ele is None):
            raise ValueError("node and ele inputs go together")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.out_format not in (None, "node", "off"):
            raise ValueError("out_format must be 'node' or 'off'")

    @property
    def input_format(self):
        return "off" if self.off is not None else "node"


@dataclass(eq=False)
class PipelineResult:
    """Outcome of :func:`improve_mesh`.

    ``mesh`` is the improved mesh, or the input echoed back when
    ``exit_code`` is nonzero. ``diagnostic`` explains a failure.
    """

    exit_code: int
    mesh: object
    before: object = None
    after: object = None
    trace: object = None
    max_conflict: float = float("nan")
    cut_paths: tuple = ()
    diagnostic: dict | None = None


def _failure(code, kind, message, mesh, **extra):
    diag = {"error": kind, "message": message, "exit_code": code}
    diag.update(extra)
    return PipelineResult(code, mesh, diagnostic=diag)


def improve_mesh(mesh, strategy="standard", solver=None):
    """Run the angle-based improvement on an in-memory mesh.

    The returned mesh has the input's topology and face lists; only
    coordinates of interior vertices move.
    """
    solver = solver or SolverConfig()
    try:
        oriented = normalize_orientation(mesh)
        check_planar_region(oriented)
    except (TopologyError, DegeneracyError) as exc:
        return _failure(EXIT_TOPOLOGY, type(exc).__name__, str(exc), mesh)

    before = quality_report(oriented)
    disk, cmap = cut_to_disk(oriented)
    log.info("cut %d path(s); disk has %d vertices", len(cmap.paths), disk.n_vertices)
    A0 = induce_angles(disk)
    spec = derive_targets(disk)
    solve = argmax if strategy == "standard" else argmax_relaxed
    A, trace = solve(disk.topology, A0, spec, solver)
    log.info("solver iterations %s, converged %s", trace.iterations, trace.converged)
    if not trace.ok:
        res = _failure(EXIT_NONCONVERGENCE, "NonConvergence",
                       "angle optimisation did not converge", mesh,
                       iterations=dict(trace.iterations), converged=dict(trace.converged))
        res.before, res.trace, res.cut_paths = before, trace, cmap.paths
        return res

    n = mesh.n_vertices
    lay = layout_mesh(disk.topology, A, disk.coords)
    copies = np.arange(n, disk.n_vertices)
    seam = lay.coords[copies] - lay.coords[cmap.origin[copies]]
    seam_gap = float(np.max(np.hypot(seam[:, 0], seam[:, 1]))) if len(copies) else 0.0
    conflict = max(lay.max_conflict, seam_gap)

    # every copy has index >= n, so vertex v itself is the kept copy
    coords = mesh.coords.copy()
    used = oriented.topology.used_mask
    coords[used] = lay.coords[:n][used]
    out = mesh.with_coords(coords)
    diag = oriented.bbox_diagonal()
    inverted = np.flatnonzero(~(signed_areas(coords, oriented.faces) > 0))

    base = dict(max_conflict=conflict, iterations=dict(trace.iterations))
    if lay.unreached_count:
        res = _failure(EXIT_LAYOUT, "LayoutConflict",
                       f"{lay.unreached_count} vertices unreachable in layout", mesh, **base)
    elif not conflict <= CONFLICT_LIMIT * diag:
        res = _failure(EXIT_LAYOUT, "LayoutConflict",
                       f"layout conflict {conflict:.3g} exceeds {CONFLICT_LIMIT:g} x bbox", mesh,
                       **base)
    elif len(inverted):
        res = _failure(EXIT_LAYOUT, "LayoutConflict",
                       f"{len(inverted)} inverted face(s) in layout, first {int(inverted[0])}",
                       mesh, **base)
    else:
        res = PipelineResult(EXIT_OK, out, after=quality_report(out))
    res.before, res.trace, res.max_conflict, res.cut_paths = before, trace, conflict, cmap.paths
    if res.after is None:
        res.after = before
    return res


# --------------------------------------------------------------------- I/O

def read_mesh(cfg):
    if cfg.off is not None:
        return parse_off(Path(cfg.off).read_text())
    return parse_node_ele(Path(cfg.node).read_text(), Path(cfg.ele).read_text())


def write_mesh(mesh, out, fmt):
    """Write ``mesh``; returns the list of files written."""
    out = Path(out)
    if fmt == "off":
        if not out.suffix:
            out = out.with_suffix(".off")
        out.write_text(format_off(mesh))
        return [out]
    node, ele = format_node_ele(mesh)
    stem = out.with_suffix("") if out.suffix in (".node", ".ele") else out
    paths = [stem.with_name(stem.name + ".node"), stem.with_name(stem.name + ".ele")]
    paths[0].write_text(node)
    paths[1].write_text(ele)
    return paths


def _num(x):
    return f"{x:.9g}"


def write_svg(mesh, path, stroke=None):
    """Stroke-only SVG with one ``<polygon>`` per face, y axis pointing up."""
    if mesh.n_faces == 0:
        raise ValueError("cannot draw a mesh without faces")
    p = mesh.coords[np.unique(mesh.faces)]
    lo, hi = p.min(axis=0), p.max(axis=0)
    size = float(max(hi - lo))
    if not size > 0:
        raise ValueError("mesh has zero extent")
    m = 0.02 * size
    w, h = hi - lo + 2 * m
    width = stroke if stroke is not None else 0.002 * size
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="0 0 {_num(w)} {_num(h)}">',
        f'<g fill="none" stroke="black" stroke-width="{_num(width)}" stroke-linejoin="round">',
    ]
    for tri in mesh.faces.tolist():
        q = mesh.coords[tri]
        pts = " ".join(f"{_num(x - lo[0] + m)},{_num(hi[1] - y + m)}" for x, y in q)
        lines.append(f'<polygon points="{pts}"/>')
    lines += ["</g>", "</svg>"]
    Path(path).write_text("\n".join(lines) + "\n")


def _clean(obj):
    """Replace non-finite floats with None so the JSON is strict."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    return obj


def write_report(before, after, trace, path, extra=None):
    """JSON report comparing two :class:`QualityReport` objects.

    ``extra`` entries (e.g. ``max_conflict``, ``cut_paths``) are merged into
    the top level.
    """
    b, a = before.to_dict(), after.to_dict()
    info = trace.info if trace is not None else {}
    doc = {
        "face_count": before.face_count,
        "min_angle": {"before": b["angle"]["min"], "after": a["angle"]["min"]},
        "max_angle": {"before": b["angle"]["max"], "after": a["angle"]["max"]},
        "min_aspect": {"before": b["aspect"]["min"], "after": a["aspect"]["min"]},
        "max_aspect": {"before": b["aspect"]["max"], "after": a["aspect"]["max"]},
        "histograms": {
            "angle": {"before": b["angle"]["histogram"], "after": a["angle"]["histogram"]},
            "aspect": {"before": b["aspect"]["histogram"], "after": a["aspect"]["histogram"]},
        },
        "solver": {
            "strategy": info.get("strategy"),
            "iterations": dict(trace.iterations) if trace is not None else {},
            "converged": dict(trace.converged) if trace is not None else {},
            "E_initial": info.get("E_initial"),
            "E_final": info.get("E_final"),
            "D_final": info.get("D_final"),
            "max_holonomy_residual": info.get("max_holonomy_residual"),
        },
        "degenerate_faces": {"before": b["degenerate_faces"], "after": a["degenerate_faces"]},
        "per_face": {"before": b["per_face"], "after": a["per_face"]},
    }
    doc.update(extra or {})
    Path(path).write_text(json.dumps(_clean(doc), indent=1) + "\n")


def run_pipeline(cfg):
    """Read, improve and write according to ``cfg``.

    Returns ``(exit_code, diagnostic)``; ``diagnostic`` is None on success.
    On solver or layout failure the input mesh is written unchanged.
    """
    try:
        mesh = read_mesh(cfg)
    except MeshParseError as exc:
        return EXIT_PARSE, {"error": "MeshParseError", "message": str(exc),
                            "line": exc.line, "exit_code": EXIT_PARSE}
    except TopologyError as exc:
        return EXIT_TOPOLOGY, {"error": type(exc).__name__, "message": str(exc),
                               "exit_code": EXIT_TOPOLOGY}
    except OSError as exc:
        return EXIT_IO, {"error": "IOError", "message": str(exc), "exit_code": EXIT_IO}

    res = improve_mesh(mesh, cfg.strategy, cfg.solver)
    if res.exit_code == EXIT_TOPOLOGY:
        return res.exit_code, res.diagnostic
    try:
        write_mesh(res.mesh, cfg.out, cfg.out_format or cfg.input_format)
        if cfg.svg is not None:
            write_svg(res.mesh, cfg.svg)
        if cfg.report is not None and res.before is not None:
            extra = {
                "exit_code": res.exit_code,
                "max_conflict": res.max_conflict,
                "cut_paths": [list(p) for p in res.cut_paths],
            }
            write_report(res.before, res.after, res.trace, cfg.report, extra)
        if cfg.trace is not None and res.trace is not None:
            Path(cfg.trace).write_text(json.dumps(_clean(res.trace.to_dict()), indent=1) + "\n")
    except OSError as exc:
        return EXIT_IO, {"error": "IOError", "message": str(exc), "exit_code": EXIT_IO}
    return res.exit_code, res.diagnostic


def with_overrides(cfg, **kw):
    """Copy of a :class:`SolverConfig` with the non-None entries of ``kw`` applied."""
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
