"""Brouwer degree of the Poincare displacement via winding along a curve."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional

from .. import _parallel
from ..errors import BoundaryEscape, InternalInconsistency, RefineNeeded, ZeroVector
from ..field_model import PhasePoint, PlanarField
from ..integrator import Escaped, IntegratorOptions, poincare_map
from ..rotation import Finite, PlusInfinity, rotation
from .curves import PolyCurve, winding_number

__all__ = ["DegreeReport", "DisplacementSampler", "degree_fixed_point", "sample_winding"]


@dataclass(frozen=True)
class DegreeReport:
    degree: int
    min_rotation_on_boundary: float
    max_rotation_on_boundary: float
    boundary_int_free: bool
    samples_used: int
    margin: float

    def as_dict(self):
        return {
            "degree": self.degree,
            "min_rotation_on_boundary": self.min_rotation_on_boundary,
            "max_rotation_on_boundary": self.max_rotation_on_boundary,
            "boundary_int_free": self.boundary_int_free,
            "margin": self.margin,
            "samples_used": self.samples_used,
        }


def _displacement_task(z, field, opts, with_rotation):
    x, y = z
    if with_rotation:
        out = rotation(field, 0.0, field.T, z, opts) if math.hypot(x, y) > 0 else None
        if isinstance(out, Finite):
            return (out.terminal.x - x, out.terminal.y - y, out.rho)
        if isinstance(out, PlusInfinity):
            return ("escaped", out.t_max_estimate)
    res = poincare_map(field, z, opts)
    if isinstance(res, Escaped):
        return ("escaped", res.t_escape)
    return (res.z.x - x, res.z.y - y, None)


class DisplacementSampler:
    """Cached evaluations of v(z) = phi(T, z) - z (and optionally rho)."""

    def __init__(self, field: PlanarField, opts: IntegratorOptions = IntegratorOptions(),
                 with_rotation: bool = False, threads: Optional[int] = None,
                 zero_tol: float = 1e-8):
        self.field = field
        self.opts = opts
        self.with_rotation = with_rotation
        self.threads = threads
        self.zero_tol = zero_tol
        self.cache = {}

    def evaluate(self, points):
        todo = [p for p in dict.fromkeys(points) if p not in self.cache]
        task = partial(_displacement_task, field=self.field, opts=self.opts,
                       with_rotation=self.with_rotation)
        for p, val in zip(todo, _parallel.parallel_map(task, todo, self.threads)):
            self.cache[p] = val
        out = []
        for p in points:
            val = self.cache[p]
            if val[0] == "escaped":
                raise BoundaryEscape(f"solution from {p} escaped at t={val[1]:.6g}")
            if math.hypot(val[0], val[1]) <= self.zero_tol * (1.0 + math.hypot(*p)):
                raise ZeroVector(f"displacement vanishes at {p}: a periodic point lies on the curve", p)
            out.append(val)
        return out


def _initial_points(curve: PolyCurve, spacing: float):
    pts = []
    for (x0, y0), (x1, y1) in curve.edges():
        n = max(1, math.ceil(math.hypot(x1 - x0, y1 - y0) / spacing))
        for k in range(n):
            s = k / n
            pts.append((x0 + s * (x1 - x0), y0 + s * (y1 - y0)))
    return pts


def _turn(a, b):
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


def sample_winding(curve: PolyCurve, sampler: DisplacementSampler, max_angle: float = math.pi / 3,
                   initial_samples: int = 32, max_rounds: int = 40):
    """Refine samples until consecutive displacements turn by < max_angle.

    Returns ``(winding, points, values)``.
    """
    curve = curve.ccw()
    diam = curve.diameter
    pts = _initial_points(curve, max(diam, 1e-300) / initial_samples)
    min_len = 1e-9 * max(diam, 1e-12)
    for _ in range(max_rounds):
        vals = sampler.evaluate(pts)
        new_pts = []
        refined = False
        n = len(pts)
        for k in range(n):
            a, b = pts[k], pts[(k + 1) % n]
            new_pts.append(a)
            if abs(_turn(vals[k], vals[(k + 1) % n])) >= max_angle:
                if math.hypot(b[0] - a[0], b[1] - a[1]) < min_len:
                    raise RefineNeeded(f"cannot resolve displacement turning between {a} and {b}")
                new_pts.append((0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])))
                refined = True
        if not refined:
            return winding_number([v[:2] for v in vals]), pts, vals
        pts = new_pts
    raise RefineNeeded(f"no certified winding after {max_rounds} refinement rounds")


def degree_fixed_point(field: PlanarField, curve: PolyCurve, opts: IntegratorOptions = IntegratorOptions(),
                       threads: Optional[int] = None, max_angle: float = math.pi / 3,
                       sampler: Optional[DisplacementSampler] = None) -> DegreeReport:
    """Degree of phi(T, .) - I on the region bounded by ``curve``."""
    if sampler is None:
        sampler = DisplacementSampler(field, opts, with_rotation=True, threads=threads)
    deg, pts, vals = sample_winding(curve, sampler, max_angle)
    rhos = [v[2] for v in vals]
    finite = [r for r in rhos if r is not None]
    lo = min(finite) if finite else math.nan
    hi = max(finite) if finite else math.nan
    int_free = bool(finite) and len(finite) == len(rhos) and math.floor(lo) == math.floor(hi) \
        and lo != math.floor(lo)
    margin = min(lo - math.floor(lo), math.ceil(hi) - hi) if int_free else 0.0
    # the certificate is about regions around the origin; elsewhere the degree is just reported
    if int_free and deg != 1 and curve.contains((0.0, 0.0)):
        raise InternalInconsistency(
            f"boundary rotations in [{lo}, {hi}] avoid integers but the winding is {deg}")
    return DegreeReport(deg, lo, hi, int_free, len(pts), margin)
