"""Fixed points of the Poincare map, i.e. T-periodic solutions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from ..errors import NoConvergence, PreconditionError, RefineNeeded, SplitFailure, ZeroVector, JacobianSingular
from ..field_model import PhasePoint, PlanarField
from ..integrator import Escaped, IntegratorOptions, Trajectory, flow_dense, poincare_map
from ..rotation import Finite, UndefinedOriginHit, default_eps_origin, rotation
from .curves import PolyCurve, split_curve
from .degree import DisplacementSampler, sample_winding

__all__ = ["PeriodicOrbit", "find_periodic", "find_periodic_in", "attach_rotation"]


@dataclass
class PeriodicOrbit:
    z_star: PhasePoint
    residual: float
    rho: float
    trajectory: Trajectory
    field_label: str
    iterations: int = 0
    warnings: list = dc_field(default_factory=list)
    # rotation about a base orbit, set by multiplicity_search
    rho_relative: Optional[float] = None
    # |F| at the working tolerance, and |phi_fine(z) - phi(z)| against a 100x tighter run
    newton_residual: Optional[float] = None
    integration_error: Optional[float] = None

    def x(self, t: float) -> float:
        T = self.trajectory.t_end
        return self.trajectory(t % T if t != T else T)[0]

    def to_dict(self, samples: int = 64) -> dict:
        T = self.trajectory.t_end
        ts = np.linspace(0.0, T, samples + 1)
        path = [[float(s), *map(float, self.trajectory(float(s)))] for s in ts]
        d = {
            "field": self.field_label,
            "z_star": [self.z_star.x, self.z_star.y],
            "residual": self.residual,
            "rho": self.rho,
            "iterations": self.iterations,
            "warnings": list(self.warnings),
            "trajectory": path,
        }
        if self.rho_relative is not None:
            d["rho_relative"] = self.rho_relative
        if self.newton_residual is not None:
            d["newton_residual"] = self.newton_residual
            d["integration_error"] = self.integration_error
        return d


def _residual(field, z, opts):
    out = poincare_map(field, z, opts)
    if isinstance(out, Escaped):
        return None
    return np.array([out.z.x - z[0], out.z.y - z[1]])


def attach_rotation(field: PlanarField, z: PhasePoint, opts: IntegratorOptions, warnings: list) -> float:
    """rho(T; 0, z); for an equilibrium at the origin, the rotation of a nearby start."""
    if abs(z) <= default_eps_origin(z):
        warnings.append("orbit sits at the origin; rho taken from a start 1e-6 away")
        z = PhasePoint(z.x + 1e-6, z.y)
    out = rotation(field, 0.0, field.T, z, opts)
    if isinstance(out, Finite):
        return out.rho
    if isinstance(out, UndefinedOriginHit):
        warnings.append(f"orbit passes through the origin at t={out.t_hit:.6g}; rho undefined")
    return math.nan


def find_periodic(field: PlanarField, seed, opts: IntegratorOptions = IntegratorOptions(),
                  tol: float = 1e-9, max_iters: int = 50, fd_step: float = 1e-6,
                  max_halvings: int = 30, max_polish: int = 3) -> PeriodicOrbit:
    """Damped Newton iteration on F(z) = phi(T, z) - z from ``seed``."""
    z = np.array(tuple(PhasePoint.of(seed)), dtype=float)
    F = _residual(field, z, opts)
    if F is None:
        raise NoConvergence(f"the solution from the seed {tuple(z)} escapes before T")
    r = float(np.hypot(*F))
    warnings = []
    polish = 0
    for it in range(max_iters + 1):
        if r < tol * (1.0 + float(np.hypot(*z))):
            # a few extra full steps while they still pay off; integration noise ends this quickly
            if polish >= max_polish or r == 0.0:
                break
            polish += 1
        elif it == max_iters:
            raise NoConvergence(f"residual {r:.3e} after {max_iters} Newton iterations at {tuple(z)}")
        if it == max_iters:
            break
        h = fd_step * (1.0 + float(np.hypot(*z)))
        J = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            Fp, Fm = _residual(field, z + e, opts), _residual(field, z - e, opts)
            if Fp is None or Fm is None:
                raise NoConvergence(f"escape while differencing near {tuple(z)}")
            J[:, i] = (Fp - Fm) / (2 * h)
        if not np.all(np.isfinite(J)):
            raise JacobianSingular(f"non-finite Jacobian at {tuple(z)}")
        if np.linalg.cond(J) > 1e10:
            if "JacobianSingular" not in warnings:
                warnings.append("JacobianSingular")
            step = -np.linalg.lstsq(J, F, rcond=1e-10)[0]
        else:
            step = -np.linalg.solve(J, F)
        if polish:
            z_try = z + step
            F_try = _residual(field, z_try, opts)
            if F_try is None or float(np.hypot(*F_try)) >= 0.5 * r:
                break
            z, F, r = z_try, F_try, float(np.hypot(*F_try))
            continue
        lam = 1.0
        for _ in range(max_halvings):
            z_try = z + lam * step
            F_try = _residual(field, z_try, opts)
            if F_try is not None:
                r_try = float(np.hypot(*F_try))
                if r_try < r:
                    z, F, r = z_try, F_try, r_try
                    break
            lam *= 0.5
        else:
            raise NoConvergence(f"line search stalled at residual {r:.3e} near {tuple(z)}")
    z_star = PhasePoint(float(z[0]), float(z[1]))
    # Newton can push |F| below the integrator's own accuracy; the reported residual
    # never claims more than a much tighter integration of the same map supports
    fine = _residual(field, z, opts.tightened(100))
    noise = math.inf if fine is None else float(np.hypot(*(fine - F)))
    rho = attach_rotation(field, z_star, opts, warnings)
    traj = flow_dense(field, 0.0, field.T, z_star, opts)
    return PeriodicOrbit(z_star, max(r, noise), rho, traj, field.label, it, warnings,
                         newton_residual=r, integration_error=noise)


_OFFSETS = (0.0137, -0.0291, 0.0613, -0.1049, 0.1571)


def _distance(curve: PolyCurve, p) -> float:
    from shapely.geometry import Point, Polygon

    return Polygon([tuple(v) for v in curve.vertices]).distance(Point(p))


def _split_windings(current, deg, axis, at, sampler):
    """Pieces of a cut with their windings; the last one follows from additivity."""
    pieces = split_curve(current, axis, at)
    if len(pieces) < 2:
        raise RefineNeeded(f"cut at {axis}={at:.6g} produced {len(pieces)} piece(s)")
    out = []
    remaining = deg
    for k, piece in enumerate(pieces):
        if k == len(pieces) - 1:
            w = remaining
        else:
            w = sample_winding(piece, sampler)[0]
            remaining -= w
        out.append((piece, w))
    return out


def find_periodic_in(field: PlanarField, curve: PolyCurve, opts: IntegratorOptions = IntegratorOptions(),
                     newton_basin: float = 1e-2, threads: Optional[int] = None,
                     tol: float = 1e-9, sampler: Optional[DisplacementSampler] = None,
                     anchor=(0.0, 0.0)) -> PeriodicOrbit:
    """Shrink the region by degree-preserving cuts, then polish with Newton.

    Each cut runs across the longer side of the bounding box, near its middle
    (at a few fixed offsets).  A nonzero-winding piece containing ``anchor``
    is preferred, trying every offset before giving that up; otherwise the
    nonzero piece closest to ``anchor`` under the first workable offset wins.
    """
    if sampler is None:
        sampler = DisplacementSampler(field, opts, with_rotation=False, threads=threads)
    current = curve.ccw()
    try:
        deg = sample_winding(current, sampler)[0]
    except ZeroVector as exc:
        return find_periodic(field, exc.point, opts, tol=tol)
    if deg == 0:
        raise PreconditionError("the curve has degree 0; no fixed point is guaranteed inside")
    cuts = 0
    while current.diameter >= newton_basin:
        xs = [v.x for v in current.vertices]
        ys = [v.y for v in current.vertices]
        wx, wy = max(xs) - min(xs), max(ys) - min(ys)
        axis = "x" if wx >= wy else "y"
        lo, width = (min(xs), wx) if axis == "x" else (min(ys), wy)
        chosen = fallback = None
        failures = []
        for off in _OFFSETS:
            try:
                pieces = _split_windings(current, deg, axis, lo + (0.5 + off) * width, sampler)
            except ZeroVector as exc:
                # a fixed point sits on the cut: Newton from there
                return find_periodic(field, exc.point, opts, tol=tol)
            except RefineNeeded as exc:
                failures.append(str(exc))
                continue
            nonzero = sorted((p for p in pieces if p[1] != 0), key=lambda p: _distance(p[0], anchor))
            if not nonzero:
                failures.append("no piece with nonzero winding")
                continue
            if _distance(nonzero[0][0], anchor) == 0.0:
                chosen = nonzero[0]
                break
            if fallback is None:
                fallback = nonzero[0]
        chosen = chosen or fallback
        if chosen is None:
            raise SplitFailure(f"no piece with nonzero winding; diameter {current.diameter:.3g}; "
                               f"attempts: {failures}")
        current, deg = chosen
        cuts += 1
    orbit = find_periodic(field, current.centroid, opts, tol=tol)
    orbit.warnings.append(f"bisection: {cuts} cuts, final diameter {current.diameter:.3g}")
    return orbit
