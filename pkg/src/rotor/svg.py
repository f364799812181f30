"""Hand-written SVG figures: rotation heatmaps and phase portraits.

Phase-plane y points up.  Rotation is measured clockwise, which the figures
state in their captions.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .rotation import RotationGrid

__all__ = ["heatmap_svg", "portrait_svg", "half_integer_segments"]

# a few viridis stops, interpolated linearly
_STOPS = [(0.0, (68, 1, 84)), (0.25, (59, 82, 139)), (0.5, (33, 145, 140)),
          (0.75, (94, 201, 98)), (1.0, (253, 231, 37))]
SIZE = 480
PAD = 40


def _color(u: float) -> str:
    if math.isnan(u):
        return "#bbbbbb"
    if math.isinf(u):
        return "#d62728"
    u = min(max(u, 0.0), 1.0)
    for (a, ca), (b, cb) in zip(_STOPS, _STOPS[1:]):
        if u <= b:
            s = (u - a) / (b - a)
            return "#%02x%02x%02x" % tuple(round(p + s * (q - p)) for p, q in zip(ca, cb))
    return "#%02x%02x%02x" % _STOPS[-1][1]


class _Frame:
    def __init__(self, box):
        self.xmin, self.xmax, self.ymin, self.ymax = box
        self.sx = SIZE / (self.xmax - self.xmin)
        self.sy = SIZE / (self.ymax - self.ymin)

    def __call__(self, x, y):
        return PAD + (x - self.xmin) * self.sx, PAD + (self.ymax - y) * self.sy


def half_integer_segments(grid: RotationGrid, levels: Sequence[float]):
    """Line segments of the rho = level contours, one marching-squares cell at a time."""
    rho = grid.rho()
    xs, ys = grid.xs, grid.ys
    segs = []
    for level in levels:
        for j in range(grid.ny - 1):
            for i in range(grid.nx - 1):
                corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
                v = [rho[b, a] for a, b in corners]
                if not all(math.isfinite(c) for c in v):
                    continue
                cross = []
                for k in range(4):
                    (a1, b1), (a2, b2) = corners[k], corners[(k + 1) % 4]
                    v1, v2 = v[k], v[(k + 1) % 4]
                    if (v1 < level) != (v2 < level):
                        s = (level - v1) / (v2 - v1)
                        cross.append((xs[a1] + s * (xs[a2] - xs[a1]), ys[b1] + s * (ys[b2] - ys[b1])))
                for k in range(0, len(cross) - 1, 2):
                    segs.append((level, cross[k], cross[k + 1]))
    return segs


def _header(title: str) -> list:
    w = SIZE + 2 * PAD
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{w + 30}" '
            f'viewBox="0 0 {w} {w + 30}" font-family="sans-serif" font-size="11">',
            f'<text x="{PAD}" y="{PAD - 14}" font-size="13">{title}</text>']


def _axes(frame: _Frame) -> list:
    out = [f'<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>']
    x0, y0 = frame(0.0, 0.0)
    if PAD <= x0 <= PAD + SIZE:
        out.append(f'<line x1="{x0:.2f}" y1="{PAD}" x2="{x0:.2f}" y2="{PAD + SIZE}" stroke="#777" '
                   f'stroke-dasharray="3,3"/>')
    if PAD <= y0 <= PAD + SIZE:
        out.append(f'<line x1="{PAD}" y1="{y0:.2f}" x2="{PAD + SIZE}" y2="{y0:.2f}" stroke="#777" '
                   f'stroke-dasharray="3,3"/>')
    out.append(f'<text x="{PAD + SIZE / 2}" y="{PAD + SIZE + 16}" text-anchor="middle">x</text>')
    out.append(f'<text x="{PAD - 16}" y="{PAD + SIZE / 2}" text-anchor="middle">y</text>')
    for val, (px, py) in ((frame.xmin, frame(frame.xmin, frame.ymin)), (frame.xmax, frame(frame.xmax, frame.ymin))):
        out.append(f'<text x="{px:.2f}" y="{py + 14:.2f}" text-anchor="middle">{val:g}</text>')
    for val in (frame.ymin, frame.ymax):
        px, py = frame(frame.xmin, val)
        out.append(f'<text x="{px - 4:.2f}" y="{py + 4:.2f}" text-anchor="end">{val:g}</text>')
    return out


def _cells(grid: RotationGrid, frame: _Frame, opacity: float = 1.0) -> list:
    rho = grid.rho()
    finite = rho[np.isfinite(rho)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    dx = (grid.region.xmax - grid.region.xmin) / grid.nx
    dy = (grid.region.ymax - grid.region.ymin) / grid.ny
    out = []
    for i, j, x, y in grid.centers():
        v = rho[j, i]
        px, py = frame(x - dx / 2, y + dy / 2)
        u = (v - lo) / span if math.isfinite(v) else v
        out.append(f'<rect x="{px:.2f}" y="{py:.2f}" width="{dx * frame.sx + 0.3:.2f}" '
                   f'height="{dy * frame.sy + 0.3:.2f}" fill="{_color(u)}" fill-opacity="{opacity}"/>')
    return out, lo, hi


def _contours(grid: RotationGrid, frame: _Frame, lo: float, hi: float) -> list:
    levels = [k + 0.5 for k in range(math.floor(lo - 0.5), math.ceil(hi)) if lo < k + 0.5 < hi]
    out = []
    for level, a, b in half_integer_segments(grid, levels):
        (x1, y1), (x2, y2) = frame(*a), frame(*b)
        out.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                   f'stroke="white" stroke-width="1.2"/>')
    return out


def heatmap_svg(grid: RotationGrid, title: str = "rotation number rho(T; 0, z)") -> str:
    frame = _Frame(grid.region.as_tuple())
    out = _header(title)
    cells, lo, hi = _cells(grid, frame)
    out += cells
    out += _contours(grid, frame, lo, hi)
    out += _axes(frame)
    y = PAD + SIZE + 34
    out.append(f'<text x="{PAD}" y="{y}">rho from {lo:.4g} to {hi:.4g} turns, clockwise positive; '
               f'white lines: half-integer levels; red: escape; grey: origin hit</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def portrait_svg(region_box, grid: Optional[RotationGrid] = None, curve=None,
                 orbits: Sequence = (), title: str = "phase portrait") -> str:
    """Orbits (lists of (x, y) points) over the heatmap, with the capture curve if given."""
    frame = _Frame(region_box)
    out = _header(title)
    out.append(f'<defs><clipPath id="plot"><rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}"/>'
               f'</clipPath></defs>')
    out.append('<g clip-path="url(#plot)">')
    if grid is not None:
        cells, lo, hi = _cells(grid, frame, opacity=0.55)
        out += cells
    if curve is not None:
        pts = " ".join("%.2f,%.2f" % frame(x, y) for x, y in curve)
        out.append(f'<polygon points="{pts}" fill="none" stroke="#ff7f0e" stroke-width="2"/>')
    palette = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b"]
    for k, path in enumerate(orbits):
        pts = " ".join("%.2f,%.2f" % frame(x, y) for x, y in path)
        color = palette[k % len(palette)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        cx, cy = frame(*path[0])
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3.5" fill="{color}"/>')
    out.append("</g>")
    out += _axes(frame)
    out.append(f'<text x="{PAD}" y="{PAD + SIZE + 34}">orange: capture-set boundary; dots: z* at t = 0; '
               f'rotation clockwise positive</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
