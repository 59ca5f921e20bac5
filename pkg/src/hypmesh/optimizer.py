"""Angle optimisation: maximise E over the angle-sum set, then drive the
holonomy defect D to zero inside the same set.

Every step is computed in the null space of the linear constraints by
solving a sparse saddle-point (KKT) system, so iterates stay feasible.

* Phase 1 (:func:`maximize_E`) is a primal log-barrier interior-point
  method. The E Hessian is diagonal in the 3F angle variables, so the KKT
  matrix is a diagonal block bordered by the constraint rows.
* Phase 2 (:func:`minimize_D`) is Levenberg-Marquardt on the holonomy
  residual vector with steps restricted to the constraint null space.
* :func:`argmax_relaxed` alternates maximising E over ``{D < delta}`` and
  reducing D, halving ``delta`` each round.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .angles import holonomies, holonomy_jacobian
from .energy import build_linear_constraints
from .errors import FeasibilityError
from .lobachevsky import lob, lob_deriv

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SolveTrace",
    "maximize_E",
    "minimize_D",
    "argmax",
    "argmax_relaxed",
]

# saddle-point systems above this order are solved iteratively
ITERATIVE_THRESHOLD = 200_000
# closest an iterate angle may get to 0 or pi
ANGLE_MARGIN = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 500
    kkt_tolerance: float = 1e-9
    constraint_tolerance: float = 1e-10
    holonomy_tolerance: float = 1e-6
    barrier_initial: float = 1e-2
    barrier_shrink: float = 0.2
    fraction_to_boundary: float = 0.995
    lm_damping_initial: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("kkt_tolerance", "constraint_tolerance", "holonomy_tolerance",
                     "barrier_initial", "lm_damping_initial"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.barrier_shrink < 1:
            raise ValueError("barrier_shrink must lie in (0, 1)")
        if not 0 < self.fraction_to_boundary < 1:
            raise ValueError("fraction_to_boundary must lie in (0, 1)")


@dataclass
class SolveTrace:
    """Accepted iterates of one or more optimisation phases.

    Each record is a dict with keys ``phase``, ``iteration``, ``E``, ``D``,
    ``mu`` (barrier parameter, LM damping or delta depending on phase),
    ``step_norm`` and ``residual`` (max linear-constraint violation).
    """

    records: list = field(default_factory=list)
    iterations: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def add(self, phase, E, D, mu, step_norm, residual):
        self.records.append({
            "phase": phase,
            "iteration": self.iterations.get(phase, 0),
            "E": float(E),
            "D": float(D),
            "mu": float(mu),
            "step_norm": float(step_norm),
            "residual": float(residual),
        })

    def bump(self, phase, n=1):
        self.iterations[phase] = self.iterations.get(phase, 0) + n

    def extend(self, other):
        self.records.extend(other.records)
        for k, v in other.iterations.items():
            self.iterations[k] = self.iterations.get(k, 0) + v
        self.converged.update(other.converged)
        self.info.update(other.info)
        return self

    def phase_records(self, phase):
        return [r for r in self.records if r["phase"] == phase]

    @property
    def ok(self):
        return all(self.converged.values())

    @property
    def total_iterations(self):
        return sum(self.iterations.values())

    def to_dict(self):
        return asdict(self)


# ------------------------------------------------------------ linear algebra

def _solver(K):
    """Return ``solve(rhs)`` for the symmetric saddle-point matrix ``K``."""
    K = K.tocsc()
    if K.shape[0] <= ITERATIVE_THRESHOLD:
        lu = spla.splu(K, permc_spec="COLAMD")
        return lu.solve
    d = np.abs(K.diagonal())
    d[d < 1e-12] = 1.0
    M = sp.diags(1.0 / d)

    def solve(rhs):
        x, info = spla.minres(K, rhs, M=M, rtol=1e-13, maxiter=20 * K.shape[0])
        if info != 0:
            log.warning("MINRES did not converge (info=%d)", info)
        return x

    return solve


class _NullSpace:
    """Orthogonal projection onto ``{dx : C dx = 0}`` and feasibility repair."""

    def __init__(self, C, b):
        self.C = C.tocsr()
        self.b = b
        self.n = C.shape[1]
        self.m = C.shape[0]
        K = sp.bmat([[sp.identity(self.n), self.C.T], [self.C, None]])
        self._solve = _solver(K)

    def project(self, g):
        if self.m == 0:
            return g.copy()
        return self._solve(np.concatenate([g, np.zeros(self.m)]))[: self.n]

    def residual(self, x):
        return self.C @ x - self.b

    def repair(self, x):
        """Smallest correction putting ``x`` back on ``C x = b``."""
        r = self.residual(x)
        if not np.any(r):
            return x
        dx = self._solve(np.concatenate([np.zeros(self.n), -r]))[: self.n]
        return x + dx

    @property
    def dimension(self):
        return self.n - self.m


def _max_step(x, dx, frac):
    """Largest t <= 1 keeping x + t dx within (0, pi) by fraction ``frac``."""
    t = 1.0
    neg = dx < 0
    if np.any(neg):
        t = min(t, frac * float(np.min((x[neg] - ANGLE_MARGIN) / -dx[neg])))
    pos = dx > 0
    if np.any(pos):
        t = min(t, frac * float(np.min((np.pi - ANGLE_MARGIN - x[pos]) / dx[pos])))
    return max(t, 0.0)


def _energy(x):
    return float(np.sum(lob(x)))


def _defect(x, topo, target):
    r = holonomies(x, topo) - target
    return float(r @ r), r


def _setup(topo, A0, spec, cfg):
    lc = build_linear_constraints(topo, spec)
    x = np.array(A0, dtype=float).ravel()
    if x.shape != (3 * topo.n_faces,):
        raise FeasibilityError(f"expected {3 * topo.n_faces} angles, got {x.size}")
    if np.any(x <= 0) or np.any(x >= np.pi) or not np.all(np.isfinite(x)):
        raise FeasibilityError("starting angles must lie strictly inside (0, pi)")
    res = float(np.max(np.abs(lc.residual(x)))) if lc.matrix.shape[0] else 0.0
    if res > cfg.constraint_tolerance:
        raise FeasibilityError(f"starting angles violate the linear constraints by {res:.3e}")
    C, b = lc.reduced()
    return x, _NullSpace(C, b), lc


# ------------------------------------------------------------------ phase 1

def maximize_E(topo, A0, spec, cfg=None, trace=None):
    """Maximise E over the angle structures with the angle sums of ``spec``.

    ``spec=None`` keeps only the per-face sums. Returns ``(A1, trace)``;
    ``trace.converged["maximize_E"]`` is False if the iteration limit hit.
    """
    cfg = cfg or SolverConfig()
    trace = trace if trace is not None else SolveTrace()
    phase = "maximize_E"
    x, ns, lc = _setup(topo, A0, spec, cfg)
    shape = np.shape(A0)
    trace.iterations.setdefault(phase, 0)
    E = _energy(x)
    target = None if spec is None else spec.holonomy_target
    D = _defect(x, topo, target)[0] if target is not None else 0.0
    trace.add(phase, E, D, 0.0, 0.0, _res(lc, x))

    if ns.dimension == 0:
        trace.converged[phase] = True
        return x.reshape(shape), trace

    g = lob_deriv(x)
    mu_min = 1e-3 * cfg.kkt_tolerance
    mu = max(cfg.barrier_initial * float(np.mean(np.abs(ns.project(g)))), mu_min)
    converged = False
    while trace.iterations[phase] < cfg.max_iterations:
        g = lob_deriv(x)
        gphi = g + mu / x
        pnorm = float(np.linalg.norm(ns.project(gphi)))
        inner_tol = cfg.kkt_tolerance if mu <= mu_min else max(cfg.kkt_tolerance, 10.0 * mu)
        if pnorm <= inner_tol:
            if mu <= mu_min:
                converged = True
                break
            mu = max(mu * cfg.barrier_shrink, mu_min)
            continue

        h = -np.cos(x) / np.sin(x) - mu / x**2
        K = sp.bmat([[sp.diags(h), ns.C.T], [ns.C, None]])
        dx = _solver(K)(np.concatenate([-gphi, np.zeros(ns.m)]))[: ns.n]
        slope_E = float(g @ dx)
        slope_phi = float(gphi @ dx)
        if slope_E <= 0 and mu > mu_min:
            # barrier dominates the ascent direction: weaken it first
            mu = max(mu * cfg.barrier_shrink, mu_min)
            continue

        trace.bump(phase)
        phi = E + mu * float(np.sum(np.log(x)))
        t = _max_step(x, dx, cfg.fraction_to_boundary)
        noise = 1e-13 * max(1.0, abs(phi))
        accepted = False
        while t > 1e-14:
            xn = x + t * dx
            En = _energy(xn)
            phin = En + mu * float(np.sum(np.log(xn)))
            if phin >= phi + 1e-4 * t * slope_phi and En >= E:
                accepted = True
                break
            if t * slope_phi < noise:
                # below floating-point resolution of phi: the Newton step is
                # trusted as is (quadratic-convergence regime)
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if mu > mu_min:
                mu = max(mu * cfg.barrier_shrink, mu_min)
                continue
            log.debug("maximize_E: line search stalled at |Pg|=%.3e", pnorm)
            break
        xn = ns.repair(xn)
        step = float(np.linalg.norm(xn - x))
        x = xn
        E = _energy(x)
        if target is not None:
            D = _defect(x, topo, target)[0]
        trace.add(phase, E, D, mu, step, _res(lc, x))

    if not converged:
        # the last accepted iterate is also the best one (E never decreases)
        log.warning("maximize_E stopped after %d iterations without converging",
                    trace.iterations[phase])
    trace.converged[phase] = converged
    return x.reshape(shape), trace


def _res(lc, x):
    if lc.matrix.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(lc.residual(x))))


# ------------------------------------------------------------------ phase 2

def _lm_step(ns, J, r, lam, metric):
    V = J.shape[0]
    K = sp.bmat([
        [lam * sp.diags(metric), J.T, ns.C.T],
        [J, -sp.identity(V), None],
        [ns.C, None, None],
    ])
    rhs = np.concatenate([np.zeros(ns.n), -r, np.zeros(ns.m)])
    return _solver(K)(rhs)[: ns.n]


def minimize_D(topo, A1, spec, cfg=None, trace=None, stop_at=None, phase="minimize_D"):
    """Drive the holonomy residuals to zero, keeping the angle sums fixed.

    ``stop_at`` (used by the relaxed strategy) ends the solve as soon as
    D <= stop_at instead of at the holonomy tolerance.
    """
    cfg = cfg or SolverConfig()
    trace = trace if trace is not None else SolveTrace()
    x, ns, lc = _setup(topo, A1, spec, cfg)
    shape = np.shape(A1)
    target = spec.holonomy_target
    trace.iterations.setdefault(phase, 0)
    D, r = _defect(x, topo, target)
    E = _energy(x)
    trace.add(phase, E, D, cfg.lm_damping_initial, 0.0, _res(lc, x))

    tol = cfg.holonomy_tolerance

    def done(D, r):
        if stop_at is not None:
            return D <= stop_at
        return float(np.max(np.abs(r))) <= 1e-3 * tol

    if done(D, r) or ns.dimension == 0:
        trace.converged[phase] = float(np.max(np.abs(r))) <= tol or done(D, r)
        return x.reshape(shape), trace

    lam = cfg.lm_damping_initial
    history = [D]
    converged = False
    while trace.iterations[phase] < cfg.max_iterations:
        trace.bump(phase)
        J = holonomy_jacobian(x, topo)
        dx = _lm_step(ns, J, r, lam, np.cos(x) / np.sin(x))
        t = _max_step(x, dx, cfg.fraction_to_boundary)
        xn = x + t * dx
        Dn, rn = _defect(xn, topo, target)
        if Dn < D:
            xn = ns.repair(xn)
            Dn, rn = _defect(xn, topo, target)
            step = float(np.linalg.norm(xn - x))
            ratio = Dn / D if D > 0 else 0.0
            x, D, r = xn, Dn, rn
            lam = max(lam / 3.0, 1e-20)
            E = _energy(x)
            trace.add(phase, E, D, lam, step, _res(lc, x))
            if done(D, r):
                converged = True
                break
            if stop_at is None and float(np.max(np.abs(r))) <= tol and ratio > 0.5:
                # at the precision floor
                converged = True
                break
        else:
            lam *= 2.0
        history.append(D)
        if len(history) > 20 and history[-21] - D < 1e-16:
            if float(np.max(np.abs(r))) <= tol and stop_at is None:
                converged = True
            else:
                log.warning("minimize_D stagnated at D=%.3e", D)
            break

    trace.converged[phase] = converged
    return x.reshape(shape), trace


# ------------------------------------------------------------ full solves

def argmax(topo, A0, spec, cfg=None):
    """Phase 1 followed by phase 2."""
    cfg = cfg or SolverConfig()
    trace = SolveTrace()
    E0 = _energy(np.ravel(A0))
    A1, trace = maximize_E(topo, A0, spec, cfg, trace)
    A2, trace = minimize_D(topo, A1, spec, cfg, trace)
    _finish(trace, topo, A2, spec, E0, "standard")
    return A2, trace


def _finish(trace, topo, A, spec, E0, strategy):
    x = np.ravel(A)
    E = _energy(x)
    D, r = _defect(x, topo, spec.holonomy_target)
    trace.info.update({
        "strategy": strategy,
        "E_initial": E0,
        "E_final": E,
        "D_final": D,
        "max_holonomy_residual": float(np.max(np.abs(r))) if len(r) else 0.0,
        # phase 2 may lower E; recorded, not enforced
        "E_not_below_initial": bool(E >= E0 - 1e-9),
    })


def _defect_curvature(x, topo, r):
    """Diagonal part of the exact D Hessian, ``2 sum_i r_i Hess(H_i)``.

    Each ln-sin term has second derivative ``-1/sin^2``; an angle enters the
    holonomy of the vertex one corner ahead with + and two corners ahead with -.
    """
    faces = topo.faces
    rp = r[faces[:, [1, 2, 0]]].ravel()
    rm = r[faces[:, [2, 0, 1]]].ravel()
    return -2.0 * (rp - rm) / np.sin(x) ** 2


def _maximize_E_within(x, ns, topo, target, delta, cfg, trace, phase):
    """Barrier method for max E subject to D(x) < delta on the constraint set.

    Newton steps use the exact D Hessian (Gauss-Newton part plus its
    diagonal curvature term); when the resulting model is not concave on the
    null space a diagonal shift is added until the step is an ascent step.
    """
    mu_min = 1e-3 * cfg.kkt_tolerance
    g = lob_deriv(x)
    mu = max(cfg.barrier_initial * float(np.mean(np.abs(ns.project(g)))), mu_min)
    E = _energy(x)
    D, r = _defect(x, topo, target)
    shift = 0.0
    it = 0
    while it < cfg.max_iterations:
        g = lob_deriv(x)
        J = holonomy_jacobian(x, topo)
        gD = 2.0 * (J.T @ r)
        slack = delta - D
        gphi = g + mu / x - (mu / slack) * gD
        h = -np.cos(x) / np.sin(x) - mu / x**2 - (mu / slack) * _defect_curvature(x, topo, r)
        c1 = slack / (2.0 * mu)
        c2 = slack**2 / mu
        V = J.shape[0]
        rhs = np.concatenate([-gphi, np.zeros(V + 1 + ns.m)])
        while True:
            K = sp.bmat([
                [sp.diags(h - shift), J.T, sp.csr_matrix(gD[:, None]), ns.C.T],
                [J, c1 * sp.identity(V), None, None],
                [sp.csr_matrix(gD[None, :]), None, sp.csr_matrix([[c2]]), None],
                [ns.C, None, None, None],
            ])
            dx = _solver(K)(rhs)[: ns.n]
            decrement = float(gphi @ dx)
            if decrement > 0 or shift > 1e8:
                break
            shift = max(10.0 * shift, 1e-4)
        shift /= 3.0 if shift > 1e-4 else np.inf
        if decrement <= max(cfg.kkt_tolerance**2, 1e-14 * max(1.0, abs(E))):
            if mu <= mu_min:
                return x, E, D, r
            mu = max(mu * cfg.barrier_shrink, mu_min)
            continue
        it += 1
        trace.bump(phase)
        phi = E + mu * float(np.sum(np.log(x))) + mu * np.log(slack)
        t = _max_step(x, dx, cfg.fraction_to_boundary)
        accepted = False
        while t > 1e-14:
            xn = x + t * dx
            Dn, rn = _defect(xn, topo, target)
            if Dn < delta:
                En = _energy(xn)
                phin = En + mu * float(np.sum(np.log(xn))) + mu * np.log(delta - Dn)
                if phin >= phi + 1e-4 * t * decrement:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if mu <= mu_min:
                return x, E, D, r
            mu = max(mu * cfg.barrier_shrink, mu_min)
            continue
        log.debug("relaxed max: mu=%.2e dec=%.2e t=%.2e slack=%.2e", mu, decrement, t, delta - Dn)
        xr = ns.repair(xn)
        Dr, rr = _defect(xr, topo, target)
        if Dr < delta:
            xn, Dn, rn = xr, Dr, rr
        step = float(np.linalg.norm(xn - x))
        x, D, r = xn, Dn, rn
        E = _energy(x)
        trace.add(phase, E, D, delta, step, float(np.max(np.abs(ns.residual(x)))))
    return x, E, D, r


def _descend_D(x, ns, topo, target, goal, cfg, trace, phase, max_steps=100):
    """Steepest descent of D inside the constraint set until D <= goal."""
    D, r = _defect(x, topo, target)
    steps = 0
    while D > goal and steps < max_steps:
        steps += 1
        trace.bump(phase)
        J = holonomy_jacobian(x, topo)
        pg = ns.project(2.0 * (J.T @ r))
        gg = float(pg @ pg)
        if gg == 0.0:
            break
        Jp = J @ pg
        # minimiser of the Gauss-Newton model along -pg
        t = gg / (2.0 * float(Jp @ Jp)) if np.any(Jp) else 1.0
        t = min(t, _max_step(x, -pg, cfg.fraction_to_boundary))
        accepted = False
        while t > 1e-16:
            xn = x - t * pg
            Dn, rn = _defect(xn, topo, target)
            if Dn <= D - 1e-4 * t * gg:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        xn = ns.repair(xn)
        Dn, rn = _defect(xn, topo, target)
        step = float(np.linalg.norm(xn - x))
        x, D, r = xn, Dn, rn
        trace.add(phase, _energy(x), D, goal, step, float(np.max(np.abs(ns.residual(x)))))
    return x, D, r


def argmax_relaxed(topo, A0, spec, cfg=None, delta0=1e-2):
    """Maximise E over ``{D < delta}``, reduce D to ``delta / 4``, halve delta.

    Stops once ``delta < holonomy_tolerance**2``.
    """
    if not delta0 > 0:
        raise ValueError("delta0 must be > 0")
    cfg = cfg or SolverConfig()
    trace = SolveTrace()
    x, ns, lc = _setup(topo, A0, spec, cfg)
    shape = np.shape(A0)
    target = spec.holonomy_target
    E0 = _energy(x)
    p_max, p_red = "relaxed_maximize_E", "relaxed_reduce_D"
    trace.iterations.setdefault(p_max, 0)
    trace.iterations.setdefault(p_red, 0)
    trace.info["deltas"] = []
    D, r = _defect(x, topo, target)
    trace.add(p_max, E0, D, delta0, 0.0, _res(lc, x))

    if ns.dimension == 0:
        trace.converged[p_max] = trace.converged[p_red] = True
        _finish(trace, topo, x, spec, E0, "relaxed")
        return x.reshape(shape), trace

    delta = delta0
    ok = True
    while delta >= cfg.holonomy_tolerance**2:
        trace.info["deltas"].append(delta)
        if D >= delta:
            x, D, r = _descend_D(x, ns, topo, target, delta / 4, cfg, trace, p_red)
        if D < delta:
            x, _, D, r = _maximize_E_within(x, ns, topo, target, delta, cfg, trace, p_max)
        x, D, r = _descend_D(x, ns, topo, target, delta / 4, cfg, trace, p_red)
        if D > delta / 4:
            # steepest descent too slow on this round: finish with LM
            sub = SolveTrace()
            A, sub = minimize_D(topo, x, spec, cfg, sub, stop_at=delta / 4, phase=p_red)
            trace.extend(sub)
            x = np.ravel(A)
            D, r = _defect(x, topo, target)
            if D > delta / 4:
                ok = False
                break
        if max(trace.iterations[p_max], trace.iterations[p_red]) >= cfg.max_iterations * 50:
            ok = False
            break
        delta /= 2.0
    trace.converged[p_max] = ok
    trace.converged[p_red] = ok and float(np.max(np.abs(r))) <= cfg.holonomy_tolerance
    _finish(trace, topo, x, spec, E0, "relaxed")
    return x.reshape(shape), trace
