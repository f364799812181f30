"""Capture set: the region around the origin where rho(T; 0, z) < n_bar + 1/2.

The level curve is extracted from a rotation grid by marching squares and
each vertex is then moved along its grid edge until it sits on the level.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from functools import partial
from typing import Optional

import numpy as np
from scipy import ndimage

from .. import _parallel
from ..errors import AmbiguousTopology, LevelNotEnclosing
from ..field_model import PhasePoint, PlanarField
from ..integrator import IntegratorOptions
from ..rotation import (Finite, PlusInfinity, Region, RotationGrid, UndefinedOriginHit,
                        rotation, rotation_grid)
from .curves import PolyCurve

log = logging.getLogger(__name__)

__all__ = ["CaptureSet", "approximate_null_set", "null_mask_from_grid", "build_capture_set",
           "marching_squares", "choose_n_bar"]


def null_mask_from_grid(grid: RotationGrid, eps_origin: float) -> np.ndarray:
    """Cells whose trajectory comes within ``eps_origin`` of the origin on [0, T]."""
    mask = np.zeros((grid.ny, grid.nx), dtype=bool)
    for k, out in enumerate(grid.outcomes):
        j, i = divmod(k, grid.nx)
        if isinstance(out, UndefinedOriginHit):
            mask[j, i] = True
        elif isinstance(out, Finite):
            mask[j, i] = out.min_radius <= eps_origin
        else:
            log.info("cell (%d, %d) escaped at t=%.4g; not counted as null", i, j, out.t_max_estimate)
    return mask


def approximate_null_set(field: PlanarField, region: Region, nx: int, ny: int, eps_origin: float,
                         opts: IntegratorOptions = IntegratorOptions(), threads: Optional[int] = None,
                         grid: Optional[RotationGrid] = None) -> np.ndarray:
    """Boolean (ny, nx) mask approximating the set of starts that hit the origin."""
    if not region.contains((0.0, 0.0)):
        raise ValueError("region must contain the origin")
    if grid is None:
        # a tiny eps only for the rotation run itself; the mask threshold is applied afterwards
        grid = rotation_grid(field, region, nx, ny, opts, eps_origin=min(eps_origin, 1e-8), threads=threads)
    return null_mask_from_grid(grid, eps_origin)


# --- marching squares -----------------------------------------------------------

# corner bits: 1 = (i, j), 2 = (i+1, j), 4 = (i+1, j+1), 8 = (i, j+1); bit set = inside (below level)
# edges: 0 bottom (i,j)-(i+1,j), 1 right (i+1,j)-(i+1,j+1), 2 top (i,j+1)-(i+1,j+1), 3 left (i,j)-(i,j+1)
_CASES = {
    0: [], 15: [],
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def _edge_key(i, j, e):
    if e == 0:
        return ("h", i, j)
    if e == 1:
        return ("v", i + 1, j)
    if e == 2:
        return ("h", i, j + 1)
    return ("v", i, j)


def marching_squares(inside: np.ndarray, center_inside=None):
    """Closed loops of grid-edge keys separating inside from outside nodes.

    ``inside`` is (ny, nx) boolean on the nodes.  ``center_inside(i, j)``
    decides saddle squares: when the square center is inside, the two
    inside corners are joined through the center.
    """
    ny, nx = inside.shape
    links = {}

    def link(a, b):
        links.setdefault(a, []).append(b)
        links.setdefault(b, []).append(a)

    for j in range(ny - 1):
        for i in range(nx - 1):
            code = (int(inside[j, i]) | int(inside[j, i + 1]) << 1
                    | int(inside[j + 1, i + 1]) << 2 | int(inside[j + 1, i]) << 3)
            if code in (5, 10):
                c_in = center_inside(i, j) if center_inside is not None else False
                if code == 5:  # corners (i,j) and (i+1,j+1) inside
                    segs = [(3, 2), (0, 1)] if c_in else [(3, 0), (1, 2)]
                else:  # corners (i+1,j) and (i,j+1) inside
                    segs = [(0, 3), (1, 2)] if c_in else [(0, 1), (2, 3)]
            else:
                segs = _CASES[code]
            for a, b in segs:
                link(_edge_key(i, j, a), _edge_key(i, j, b))

    loops, seen = [], set()
    for start in sorted(links):
        if start in seen or len(links[start]) != 2:
            continue
        loop, prev, cur = [start], None, start
        seen.add(start)
        closed = False
        while True:
            nbrs = links[cur]
            if len(nbrs) != 2:
                break
            nxt = nbrs[0] if nbrs[0] != prev else nbrs[1]
            if nxt == start:
                closed = True
                break
            if nxt in seen:
                break
            loop.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        if closed:
            loops.append(loop)
    return loops


def _edge_nodes(key):
    kind, i, j = key
    return ((i, j), (i + 1, j)) if kind == "h" else ((i, j), (i, j + 1))


# --- capture set ----------------------------------------------------------------------

@dataclass
class CaptureSet:
    level: float
    inner_component: PolyCurve
    grid_provenance: dict
    vertex_rho: list = dc_field(default_factory=list)
    n_bar: int = 0

    def to_dict(self) -> dict:
        return {
            "n_bar": self.n_bar,
            "level": self.level,
            "orientation": self.inner_component.orientation,
            "vertices": [[v.x, v.y] for v in self.inner_component.vertices],
            "vertex_rho": list(self.vertex_rho),
            "grid": self.grid_provenance,
        }


def _rho_value(out, level):
    if isinstance(out, Finite):
        return out.rho
    if isinstance(out, PlusInfinity):
        return math.inf
    return -math.inf  # origin hit: rotation undefined, belongs to the null neighbourhood


def _refine_vertex(args, field, opts, level, level_tol, max_iter):
    """Bracketed root of rho - level on the segment a -> b (a inside, b outside)."""
    (ax, ay), (bx, by), fa, fb = args
    lo, hi = 0.0, 1.0
    # regula falsi start from the grid interpolation, with Illinois weights
    ga = max(fa - level, -1.0)
    gb = min(fb - level, 1.0)
    best = None
    side = 0
    for _ in range(max_iter):
        s = (lo * gb - hi * ga) / (gb - ga) if gb != ga else 0.5 * (lo + hi)
        if not lo < s < hi:
            s = 0.5 * (lo + hi)
        x, y = ax + s * (bx - ax), ay + s * (by - ay)
        out = rotation(field, 0.0, field.T, (x, y), opts)
        g = _rho_value(out, level) - level
        if math.isfinite(g) and (best is None or abs(g) < abs(best[2])):
            best = (x, y, g)
        if math.isfinite(g) and abs(g) < level_tol:
            return (x, y, g + level)
        if g < 0:
            lo, ga = s, max(g, -1.0)
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            hi, gb = s, min(g, 1.0)
            if side == 1:
                ga *= 0.5
            side = 1
        if hi - lo < 1e-12:
            break
    if best is None:
        x, y = ax + 0.5 * (bx - ax), ay + 0.5 * (by - ay)
        return (x, y, math.nan)
    return (best[0], best[1], best[2] + level)


def choose_n_bar(field: PlanarField, radius: float = 0.5, samples: int = 64,
                 opts: IntegratorOptions = IntegratorOptions()) -> int:
    """ceil of the largest rotation found on a small circle about the origin."""
    best = -math.inf
    for a in 2 * np.pi * np.arange(samples) / samples:
        out = rotation(field, 0.0, field.T, (radius * math.cos(a), radius * math.sin(a)), opts)
        if isinstance(out, Finite):
            best = max(best, out.rho)
    return max(1, math.ceil(best)) if math.isfinite(best) else 1


def build_capture_set(field: PlanarField, n_bar: int, region: Region, resolution=(48, 48),
                      opts: IntegratorOptions = IntegratorOptions(), level_tol: float = 1e-3,
                      dilation: int = 2, threads: Optional[int] = None,
                      grid: Optional[RotationGrid] = None, max_refine: int = 60) -> CaptureSet:
    """Closed curve through points with rho = n_bar + 1/2 enclosing the origin."""
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
    level = n_bar + 0.5
    if grid is None:
        grid = rotation_grid(field, region, nx, ny, opts, threads=threads)
    nx, ny = grid.nx, grid.ny
    dx = (region.xmax - region.xmin) / nx
    dy = (region.ymax - region.ymin) / ny
    vals = np.array([_rho_value(o, level) for o in grid.outcomes]).reshape(ny, nx)

    finite = vals[np.isfinite(vals)]
    if finite.size and np.all(np.abs(finite - level) < level_tol):
        raise AmbiguousTopology(f"rho is within {level_tol} of the level {level} on the whole grid")

    null = null_mask_from_grid(grid, math.hypot(dx, dy))
    if dilation > 0 and null.any():
        null = ndimage.binary_dilation(null, iterations=dilation)
    vals = np.where(null, -np.inf, vals)
    inside = vals < level

    border = np.concatenate([inside[0], inside[-1], inside[:, 0], inside[:, -1]])
    if border.any():
        raise LevelNotEnclosing(f"the sublevel rho < {level} reaches the region border; enlarge the region")
    i0 = int(np.argmin(np.abs(grid.xs)))
    j0 = int(np.argmin(np.abs(grid.ys)))
    if not inside[j0, i0]:
        raise LevelNotEnclosing(f"the cell nearest the origin is not below the level {level}")

    def center_inside(i, j):
        x = 0.5 * (grid.xs[i] + grid.xs[i + 1])
        y = 0.5 * (grid.ys[j] + grid.ys[j + 1])
        if null[j:j + 2, i:i + 2].any():
            return True
        return _rho_value(rotation(field, 0.0, field.T, (x, y), opts), level) < level

    loops = marching_squares(inside, center_inside)
    candidates = []
    for loop in loops:
        pts = []
        for key in loop:
            (i1, j1), (i2, j2) = _edge_nodes(key)
            v1, v2 = vals[j1, i1], vals[j2, i2]
            a1 = min(max(v1, level - 1.0), level + 1.0)
            a2 = min(max(v2, level - 1.0), level + 1.0)
            s = (level - a1) / (a2 - a1) if a2 != a1 else 0.5
            p1 = (grid.xs[i1], grid.ys[j1])
            p2 = (grid.xs[i2], grid.ys[j2])
            pts.append((p1[0] + s * (p2[0] - p1[0]), p1[1] + s * (p2[1] - p1[1])))
        try:
            poly = PolyCurve.from_points(pts)
        except ValueError:
            continue
        if poly.contains((0.0, 0.0)):
            candidates.append((poly.area, loop))
    if not candidates:
        raise LevelNotEnclosing(f"no closed rho = {level} contour encloses the origin at {nx}x{ny}")
    _, loop = max(candidates, key=lambda c: c[0])

    tasks = []
    for key in loop:
        (i1, j1), (i2, j2) = _edge_nodes(key)
        a, b = (i1, j1), (i2, j2)
        if inside[b[1], b[0]]:
            a, b = b, a
        tasks.append(((float(grid.xs[a[0]]), float(grid.ys[a[1]])),
                      (float(grid.xs[b[0]]), float(grid.ys[b[1]])),
                      float(vals[a[1], a[0]]), float(vals[b[1], b[0]])))
    task = partial(_refine_vertex, field=field, opts=opts, level=level, level_tol=level_tol,
                   max_iter=max_refine)
    refined = _parallel.parallel_map(task, tasks, threads)
    off = [r for _, _, r in refined if not abs(r - level) < level_tol]
    if off:
        # typically the dilated null mask touches the contour, so an edge has no true crossing
        raise LevelNotEnclosing(f"{len(off)} contour vertices could not be brought within {level_tol} "
                                f"of the level {level} at {nx}x{ny}; refine the grid")
    try:
        curve = PolyCurve.from_points([(x, y) for x, y, _ in refined])
    except ValueError as exc:
        raise AmbiguousTopology(f"refined contour is not a simple curve: {exc}") from None
    if not curve.contains((0.0, 0.0)):
        raise AmbiguousTopology("refined contour no longer encloses the origin")
    # from_points may have reversed the vertex order
    rho_by_pt = {(x, y): r for x, y, r in refined}
    vertex_rho = [rho_by_pt[(v.x, v.y)] for v in curve.vertices]
    provenance = {"region": [region.xmin, region.xmax, region.ymin, region.ymax],
                  "nx": nx, "ny": ny, "dilation": dilation, "level_tol": level_tol}
    return CaptureSet(level, curve, provenance, vertex_rho, n_bar)
