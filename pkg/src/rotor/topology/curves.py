"""Closed polygonal curves and winding numbers of vector fields along them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from shapely.geometry import LinearRing, Point as ShapelyPoint, Polygon, box

from ..errors import RefineNeeded, ZeroVector
from ..field_model import PhasePoint

__all__ = ["PolyCurve", "CCW", "CW", "winding_number", "signed_area", "split_curve"]

CCW = "CCW"
CW = "CW"


def signed_area(pts) -> float:
    a = 0.0
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


@dataclass(frozen=True)
class PolyCurve:
    """Simple closed polygon; the closing edge last -> first is implicit."""

    vertices: tuple
    orientation: str

    def __post_init__(self):
        verts = tuple(PhasePoint.of(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValueError("a curve needs at least 3 vertices")
        if verts[0] == verts[-1]:
            raise ValueError("store the curve without repeating the first vertex")
        area = signed_area(self.points)
        actual = CCW if area > 0 else CW
        if self.orientation not in (CCW, CW):
            raise ValueError(f"orientation must be CCW or CW, got {self.orientation!r}")
        if actual != self.orientation:
            raise ValueError(f"vertices are {actual} but orientation says {self.orientation}")
        if not LinearRing(self.points).is_simple:
            raise ValueError("curve is self-intersecting")

    @classmethod
    def from_points(cls, pts: Iterable) -> "PolyCurve":
        """Build a CCW curve from points in either orientation."""
        pts = [tuple(PhasePoint.of(p)) for p in pts]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if signed_area(pts) < 0:
            pts = pts[::-1]
        return cls(tuple(pts), CCW)

    @classmethod
    def circle(cls, radius: float, n: int = 64, center=(0.0, 0.0)) -> "PolyCurve":
        cx, cy = center
        ang = 2 * np.pi * np.arange(n) / n
        return cls(tuple(zip(cx + radius * np.cos(ang), cy + radius * np.sin(ang))), CCW)

    @property
    def points(self) -> list:
        return [(v.x, v.y) for v in self.vertices]

    @property
    def area(self) -> float:
        return abs(signed_area(self.points))

    @property
    def diameter(self) -> float:
        p = np.asarray(self.points)
        return float(np.hypot(*(p.max(axis=0) - p.min(axis=0))))

    @property
    def centroid(self) -> tuple:
        c = Polygon(self.points).centroid
        return (c.x, c.y)

    def ccw(self) -> "PolyCurve":
        if self.orientation == CCW:
            return self
        return PolyCurve(self.vertices[::-1], CCW)

    def contains(self, z) -> bool:
        return Polygon(self.points).contains(ShapelyPoint(*tuple(PhasePoint.of(z))))

    def edges(self):
        pts = self.points
        for k in range(len(pts)):
            yield pts[k], pts[(k + 1) % len(pts)]

    def radius_at_angle(self, angle: float, center=(0.0, 0.0)) -> float:
        """Largest distance from ``center`` to the curve along a ray."""
        cx, cy = center
        dx, dy = math.cos(angle), math.sin(angle)
        best = math.nan
        for (x0, y0), (x1, y1) in self.edges():
            ex, ey = x1 - x0, y1 - y0
            den = dx * ey - dy * ex
            if den == 0:
                continue
            wx, wy = x0 - cx, y0 - cy
            s = (wx * ey - wy * ex) / den
            u = (wx * dy - wy * dx) / den
            if s >= 0 and 0 <= u <= 1:
                best = s if math.isnan(best) else max(best, s)
        return best


def winding_number(vectors: Sequence, closed: bool = True, max_step: float = math.pi) -> int:
    """Winding number of a closed sequence of nonzero planar vectors.

    Consecutive vectors must turn by less than ``max_step`` (at most pi),
    otherwise the sampling cannot certify the count.
    """
    vs = [tuple(map(float, v)) for v in vectors]
    if len(vs) < 2:
        raise RefineNeeded("need at least two vectors")
    for k, (a, b) in enumerate(vs):
        if a == 0.0 and b == 0.0:
            raise ZeroVector(f"zero vector at sample {k}", k)
    seq = vs + [vs[0]] if closed else vs
    total = 0.0
    for (ax, ay), (bx, by) in zip(seq[:-1], seq[1:]):
        d = math.atan2(ax * by - ay * bx, ax * bx + ay * by)
        if abs(d) >= max_step:
            raise RefineNeeded(f"angular increment {d:.3f} too large")
        total += d
    turns = total / (2 * math.pi)
    w = round(turns)
    if closed and abs(turns - w) > 1e-6:
        raise RefineNeeded(f"non-integer winding {turns}")
    return int(w)


def split_curve(curve: PolyCurve, axis: str, at: float) -> list:
    """Cut the enclosed region by the line x = at (axis "x") or y = at (axis "y").

    Returns the pieces as CCW curves, lower/left side first.
    """
    poly = Polygon(curve.points)
    xmin, ymin, xmax, ymax = poly.bounds
    pad = 1.0 + (xmax - xmin) + (ymax - ymin)
    if axis == "x":
        halves = [box(xmin - pad, ymin - pad, at, ymax + pad), box(at, ymin - pad, xmax + pad, ymax + pad)]
    else:
        halves = [box(xmin - pad, ymin - pad, xmax + pad, at), box(xmin - pad, at, xmax + pad, ymax + pad)]
    pieces = []
    for half in halves:
        part = poly.intersection(half)
        geoms = getattr(part, "geoms", [part])
        for g in geoms:
            if isinstance(g, Polygon) and g.area > 0:
                pts = list(g.exterior.coords)[:-1]
                pieces.append(PolyCurve.from_points(_dedupe(pts)))
    return pieces


def _dedupe(pts):
    out = []
    for p in pts:
        if not out or (abs(p[0] - out[-1][0]) + abs(p[1] - out[-1][1])) > 0:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out
