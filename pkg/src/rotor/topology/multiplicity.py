"""Periodic solutions with prescribed rotation about a known one (p = 0 only).

On the shell where rho(T; 0, z) = k the Poincare map sends z to a positive
multiple of itself, so a fixed point is a shell point with |phi(z)| = |z|.
The search finds the shell along radial rays, looks for sign changes of
|phi(z)| - |z| between neighbouring rays, narrows the angle, and hands the
best point to Newton.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import partial
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .. import _parallel
from ..errors import NoConvergence, JacobianSingular
from ..field_model import PhasePoint, PlanarField, recenter_field
from ..integrator import IntegratorOptions
from ..rotation import Finite, PlusInfinity, rotation
from .periodic import PeriodicOrbit, find_periodic

__all__ = ["MultiplicityResult", "multiplicity_search"]


@dataclass
class MultiplicityResult:
    orbits: list = dc_field(default_factory=list)
    by_k: dict = dc_field(default_factory=dict)
    not_found: dict = dc_field(default_factory=dict)


def _rho(field, z, opts):
    out = rotation(field, 0.0, field.T, z, opts)
    if isinstance(out, Finite):
        return out.rho, out.terminal
    if isinstance(out, PlusInfinity):
        return math.inf, None
    return math.nan, None


def _ray_scan(angle, field, opts, radii):
    c, s = math.cos(angle), math.sin(angle)
    return [_rho(field, (r * c, r * s), opts)[0] for r in radii]


def _shell_radius(field, opts, angle, k, r_lo, r_hi, limits=None):
    """Radius where rho crosses k along a ray; widens [r_lo, r_hi] within ``limits`` if needed."""
    c, s = math.cos(angle), math.sin(angle)

    def g(r):
        v = _rho(field, (r * c, r * s), opts)[0]
        if math.isnan(v):
            return -1.0
        return min(v - k, 1.0)

    lo_lim, hi_lim = limits if limits is not None else (r_lo, r_hi)
    g_lo, g_hi = g(r_lo), g(r_hi)
    while g_lo >= 0 and r_lo > lo_lim:
        r_lo = max(lo_lim, r_lo / 1.5)
        g_lo = g(r_lo)
    while g_hi <= 0 and r_hi < hi_lim:
        r_hi = min(hi_lim, r_hi * 1.5)
        g_hi = g(r_hi)
    if g_lo >= 0 or g_hi <= 0:
        raise ValueError(f"rho = {k} not bracketed on the ray at angle {angle:.6g}")
    return brentq(g, r_lo, r_hi, xtol=1e-12, rtol=1e-12, maxiter=100)


def _bracket(radii, rhos, k):
    for a in range(len(radii) - 1):
        ra, rb = rhos[a], rhos[a + 1]
        if not (math.isnan(ra) or math.isnan(rb)) and ra < k <= rb:
            return radii[a], radii[a + 1]
    return None


def _shell_point(angle, field, opts, k, bracket, limits=None):
    r = _shell_radius(field, opts, angle, k, *bracket, limits=limits)
    z = (r * math.cos(angle), r * math.sin(angle))
    rho, term = _rho(field, z, opts)
    gap = math.hypot(term.x, term.y) - r if term is not None else math.nan
    return z, gap


def multiplicity_search(field: PlanarField, base: PeriodicOrbit, k_list: Sequence[int],
                        annulus_hint=(0.05, 8.0), opts: IntegratorOptions = IntegratorOptions(),
                        rays: int = 16, radial_samples: int = 28, rho_tol: float = 0.05,
                        angle_refinements: int = 6, max_seeds: int = 6, threads: Optional[int] = None,
                        tol: float = 1e-9) -> MultiplicityResult:
    """Periodic orbits winding k times about ``base``, one search per k."""
    rec = recenter_field(field, base)
    same_frame = rec is field
    zb = base.z_star
    r_min, r_max = annulus_hint
    radii = list(np.geomspace(r_min, r_max, radial_samples))
    angles = [2 * math.pi * (m + 0.5) / rays for m in range(rays)]
    scans = _parallel.parallel_map(partial(_ray_scan, field=rec, opts=opts, radii=radii), angles, threads)
    result = MultiplicityResult()

    for k in k_list:
        brackets = [_bracket(radii, rhos, k) for rhos in scans]
        usable = [(a, b) for a, b in zip(angles, brackets) if b is not None]
        if not usable:
            reached = max((r for rhos in scans for r, v in zip(radii, rhos) if math.isfinite(v)), default=0.0)
            result.not_found[k] = f"rho = {k} not bracketed on any ray up to radius {reached:.3g}"
            continue
        task = partial(_shell_point_task, field=rec, opts=opts, k=k)
        shell = _parallel.parallel_map(task, usable, threads)
        seeds = []
        n = len(shell)
        for m in range(n):
            (a0, br0), (a1, br1) = usable[m], usable[(m + 1) % n]
            g0, g1 = shell[m][1], shell[(m + 1) % n][1]
            if np.sign(g0) != np.sign(g1) and n > 1:
                if a1 < a0:
                    a1 += 2 * math.pi
                bracket = (min(br0[0], br1[0]), max(br0[1], br1[1]))
                seeds.append(_narrow(rec, opts, k, a0, a1, g0, shell[m][0], bracket,
                                     (r_min, r_max), angle_refinements))
                if len(seeds) >= max_seeds:
                    break
        if not seeds:
            # no sign change (e.g. autonomous fields, where the shell is a circle of fixed points)
            m = int(np.argmin([abs(g) for _, g in shell]))
            seeds.append(shell[m][0])

        found = []
        for seed in seeds:
            try:
                orbit_w = find_periodic(rec, seed, opts, tol=tol)
            except (NoConvergence, JacobianSingular):
                continue
            if not (abs(orbit_w.rho - k) <= rho_tol):
                continue
            rho_rel = orbit_w.rho
            if same_frame:
                orbit = orbit_w
            else:
                z0 = (orbit_w.z_star.x + zb.x, orbit_w.z_star.y + zb.y)
                try:
                    orbit = find_periodic(field, z0, opts, tol=tol)
                except (NoConvergence, JacobianSingular):
                    continue
            orbit.rho_relative = rho_rel
            if all(math.hypot(orbit.z_star.x - o.z_star.x, orbit.z_star.y - o.z_star.y) > 1e-6
                   for o in found):
                found.append(orbit)
        if found:
            result.by_k[k] = found
            result.orbits.extend(found)
        else:
            result.not_found[k] = f"{len(seeds)} seed(s) on the rho = {k} shell did not converge"
    return result


def _shell_point_task(item, field, opts, k):
    angle, bracket = item
    return _shell_point(angle, field, opts, k, bracket)


def _narrow(field, opts, k, a0, a1, g0, start, bracket, limits, iters):
    """Bisect the ray angle between a sign change of |phi(z)| - |z| on the shell."""
    best = start
    for _ in range(iters):
        am = 0.5 * (a0 + a1)
        try:
            z, g = _shell_point(am, field, opts, k, bracket, limits)
        except ValueError:
            break
        best = z
        if np.sign(g) == np.sign(g0):
            a0, g0 = am, g
        else:
            a1 = am
    return best
