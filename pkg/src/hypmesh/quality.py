"""Per-face shape measures and their histograms.

Aspect ratio is circumradius over shortest edge: ``1/sqrt(3)`` for an
equilateral triangle and unbounded for slivers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError
from .mesh import AREA_EPS

__all__ = [
    "ANGLE_BINS",
    "ASPECT_BINS",
    "ASPECT_RANGE",
    "QualityReport",
    "aspect_ratio",
    "face_measures",
    "histogram",
    "quality_report",
]

ANGLE_BINS = 36
ASPECT_BINS = 40
ASPECT_RANGE = (0.5, 2.5)
# values within this fraction of a bin width below an edge count in the upper bin,
# so e.g. pi/3 lands in the bin that starts at 60 degrees
_EDGE_SNAP = 1e-9


def aspect_ratio(p_a, p_b, p_c):
    """Circumradius divided by the shortest side of triangle ``abc``."""
    p = np.array([p_a, p_b, p_c], dtype=float)
    ratio, area = _ratios(p[None])
    scale = float(np.max(np.linalg.norm(p - p.mean(axis=0), axis=1))) ** 2
    if not area[0] > AREA_EPS * max(scale, np.finfo(float).tiny):
        raise DegeneracyError("triangle is degenerate")
    return float(ratio[0])


def _ratios(p):
    """Aspect ratios and areas for a stack of ``(F, 3, 2)`` triangles."""
    e = np.linalg.norm(p[:, [1, 2, 0]] - p[:, [2, 0, 1]], axis=2)
    u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.prod(e, axis=1) / (4.0 * area)
        return R / e.min(axis=1), area


def face_measures(coords, faces):
    """``(angles (F, 3), aspect (F,), area (F,))`` for every face."""
    p = np.asarray(coords, dtype=float)[np.asarray(faces)]
    angles = np.empty((len(p), 3))
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        v = p[:, (c + 2) % 3] - p[:, c]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        angles[:, c] = np.arctan2(np.abs(cross), np.einsum("ij,ij->i", u, v))
    aspect, area = _ratios(p)
    return angles, aspect, area


def histogram(values, lo, hi, bins, overflow=False):
    """Counts over half-open bins ``[lo + k w, lo + (k+1) w)``.

    Values at or above ``hi`` go to an extra overflow count when requested,
    otherwise into the last bin.
    """
    values = np.asarray(values, dtype=float).ravel()
    w = (hi - lo) / bins
    idx = np.floor((values - lo) / w + _EDGE_SNAP).astype(np.int64)
    idx = np.clip(idx, 0, bins if overflow else bins - 1)
    return np.bincount(idx, minlength=bins + (1 if overflow else 0))


@dataclass(frozen=True, eq=False)
class QualityReport:
    """Shape statistics of one mesh; arrays are per face in face order."""

    face_count: int
    min_angle: np.ndarray
    max_angle: np.ndarray
    aspect: np.ndarray
    angle_histogram: np.ndarray
    aspect_histogram: np.ndarray
    aspect_overflow: int
    degenerate_faces: tuple

    @property
    def global_min_angle(self):
        return float(np.min(self.min_angle[self._ok])) if self._ok.any() else float("nan")

    @property
    def global_max_angle(self):
        return float(np.max(self.max_angle[self._ok])) if self._ok.any() else float("nan")

    @property
    def global_min_aspect(self):
        return float(np.min(self.aspect[self._ok])) if self._ok.any() else float("nan")

    @property
    def global_max_aspect(self):
        return float(np.max(self.aspect[self._ok])) if self._ok.any() else float("nan")

    @property
    def _ok(self):
        ok = np.ones(self.face_count, dtype=bool)
        ok[list(self.degenerate_faces)] = False
        return ok

    def to_dict(self):
        """Plain ``dict``/``list`` form for JSON output."""
        return {
            "face_count": self.face_count,
            "degenerate_faces": list(self.degenerate_faces),
            "angle": {
                "min": self.global_min_angle,
                "max": self.global_max_angle,
                "histogram": {"lo": 0.0, "hi": float(np.pi),
                              "counts": self.angle_histogram.tolist()},
            },
            "aspect": {
                "min": self.global_min_aspect,
                "max": self.global_max_aspect,
                "histogram": {"lo": ASPECT_RANGE[0], "hi": ASPECT_RANGE[1],
                              "counts": self.aspect_histogram.tolist(),
                              "overflow": self.aspect_overflow},
            },
            "per_face": {
                "min_angle": self.min_angle.tolist(),
                "max_angle": self.max_angle.tolist(),
                "aspect": self.aspect.tolist(),
            },
        }


def quality_report(mesh):
    """Angles and aspect ratios of every face of ``mesh``.

    Degenerate faces (area below the mesh-scaled threshold) are listed and
    left out of the histograms and extrema.
    """
    angles, aspect, area = face_measures(mesh.coords, mesh.faces)
    diag = mesh.bbox_diagonal()
    bad = np.flatnonzero(~(area > AREA_EPS * diag * diag))
    ok = np.ones(len(area), dtype=bool)
    ok[bad] = False
    ahist = histogram(angles[ok], 0.0, np.pi, ANGLE_BINS)
    shist = histogram(aspect[ok], *ASPECT_RANGE, ASPECT_BINS, overflow=True)
    return QualityReport(
        face_count=len(area),
        min_angle=angles.min(axis=1),
        max_angle=angles.max(axis=1),
        aspect=aspect,
        angle_histogram=ahist,
        aspect_histogram=shist[:ASPECT_BINS],
        aspect_overflow=int(shist[ASPECT_BINS]),
        degenerate_faces=tuple(int(f) for f in bad),
    )
