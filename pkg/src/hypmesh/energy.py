"""Volume energy E, holonomy defect D, and the linear angle constraints."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .angles import holonomies, holonomy_jacobian
from .errors import SingularityError
from .lobachevsky import lob, lob_deriv, lob_second

__all__ = [
    "EnergyEvaluation",
    "LinearConstraints",
    "energy_E",
    "energy_D",
    "holonomy_residual",
    "build_linear_constraints",
]


@dataclass(frozen=True, eq=False)
class EnergyEvaluation:
    value: float
    gradient: np.ndarray
    hessian: sp.spmatrix


@dataclass(frozen=True, eq=False)
class LinearConstraints:
    """Rows over the flattened angle vector: F face rows, then V vertex rows.

    ``independent`` indexes a maximal linearly independent subset of rows
    (used for KKT solves); ``rank`` is its size.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    independent: np.ndarray

    @property
    def rank(self):
        return len(self.independent)

    def residual(self, x):
        return self.matrix @ np.ravel(x) - self.rhs

    def reduced(self):
        return self.matrix[self.independent], self.rhs[self.independent]


def _check_open(A):
    if np.any(A <= 0.0) or np.any(A >= np.pi):
        raise SingularityError("energy needs every angle strictly inside (0, pi)")


def energy_E(A):
    """Sum of Lobachevsky values over all corner angles (with derivatives)."""
    x = np.asarray(A, dtype=float).ravel()
    _check_open(x)
    return EnergyEvaluation(
        value=float(np.sum(lob(x))),
        gradient=lob_deriv(x),
        hessian=sp.diags(lob_second(x), format="csr"),
    )


def holonomy_residual(A, spec, topo):
    return holonomies(A, topo) - spec.holonomy_target


def energy_D(A, spec, topo):
    """Sum of squared holonomy residuals; Hessian is Gauss-Newton ``2 J^T J``."""
    x = np.asarray(A, dtype=float).ravel()
    _check_open(x)
    r = holonomy_residual(x, spec, topo)
    J = holonomy_jacobian(x, topo)
    return EnergyEvaluation(
        value=float(r @ r),
        gradient=2.0 * (J.T @ r),
        hessian=(2.0 * (J.T @ J)).tocsr(),
    )


def build_linear_constraints(topo, spec=None):
    """Face rows (sum = pi) and, unless ``spec`` is None, vertex rows (sum = theta)."""
    F, V = topo.n_faces, topo.n_vertices
    cols = np.arange(3 * F)
    face_rows = np.repeat(np.arange(F), 3)
    face = sp.csr_matrix((np.ones(3 * F), (face_rows, cols)), shape=(F, 3 * F))
    if spec is None:
        return LinearConstraints(face, np.full(F, np.pi), np.arange(F))
    vert = sp.csr_matrix((np.ones(3 * F), (topo.faces.ravel(), cols)), shape=(V, 3 * F))
    matrix = sp.vstack([face, vert], format="csr")
    rhs = np.concatenate([np.full(F, np.pi), np.asarray(spec.theta, dtype=float)])
    # all face rows sum to the same vector as all vertex rows; unreferenced
    # vertices give empty rows
    used = np.flatnonzero(topo.used_mask)
    independent = np.concatenate([np.arange(F), F + used[:-1]])
    return LinearConstraints(matrix, rhs, independent)
