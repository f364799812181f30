"""Generalized rotation numbers around the origin.

Angles are clockwise: (x, y) = (r cos(theta), -r sin(theta)).  The angle is
integrated as a third state component, so its lift is continuous by
construction and only the increment theta(t1) - theta(t0) is ever reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from . import _parallel
from .errors import DomainError, OriginStart
from .field_model import PhasePoint, PlanarField
from .integrator import IntegratorOptions, integrate

__all__ = [
    "Finite", "PlusInfinity", "UndefinedOriginHit", "RotationOutcome",
    "rotation", "lifted_trajectory", "rotation_grid", "RotationGrid", "Region",
    "angular_rhs", "l_alpha", "l_alpha_quadrature", "outer_radius",
    "check_monotonicity", "MonotonicityReport", "default_eps_origin",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Finite:
    rho: float
    terminal: PhasePoint
    min_radius: float = math.inf
    status = "finite"


@dataclass(frozen=True)
class PlusInfinity:
    t_max_estimate: float
    rho_at_cutoff: float
    reason: str = "RadiusExceeded"
    status = "plus_infinity"

    @property
    def rho(self):
        return math.inf


@dataclass(frozen=True)
class UndefinedOriginHit:
    t_hit: float
    status = "origin_hit"

    @property
    def rho(self):
        return math.nan


RotationOutcome = Finite | PlusInfinity | UndefinedOriginHit


def default_eps_origin(z0) -> float:
    return 1e-8 * (1.0 + abs(PhasePoint.of(z0)))


def angular_rhs(field: PlanarField) -> Callable:
    """Right-hand side of (x, y, theta) with the clockwise angular velocity."""
    f = getattr(field.f, "fast", field.f)
    if field.p_is_zero:
        def rhs(t, z):
            x, y = z[0], z[1]
            g = f(t, x)
            return (y, -g, (g * x + y * y) / (x * x + y * y))
    else:
        p = getattr(field.p, "fast", field.p)
        def rhs(t, z):
            x, y = z[0], z[1]
            g = f(t, x) + p(t, x, y)
            return (y, -g, (g * x + y * y) / (x * x + y * y))
    return rhs


class _OriginWatch:
    """Step callback tracking the smallest radius; stops inside the eps disk."""

    def __init__(self, eps, r0):
        self.eps = eps
        self.min_r = r0
        self.t_hit = None

    def __call__(self, t, h, z_old, z_new, coeffs):
        r_new = math.hypot(z_new[0], z_new[1])
        r_old = math.hypot(z_old[0], z_old[1])
        lo = min(r_old, r_new)
        travel = math.hypot(z_new[0] - z_old[0], z_new[1] - z_old[1])
        if lo < 2.0 * travel:
            r1, r2, r3, r4, r5 = coeffs
            for k in range(1, 8):
                s = k / 8.0
                s1 = 1.0 - s
                x = r1[0] + s * (r2[0] + s1 * (r3[0] + s * (r4[0] + s1 * r5[0])))
                y = r1[1] + s * (r2[1] + s1 * (r3[1] + s * (r4[1] + s1 * r5[1])))
                r = math.hypot(x, y)
                if r < lo:
                    lo = r
        if lo < self.min_r:
            self.min_r = lo
        if lo <= self.eps:
            self.t_hit = t
            return True
        return False


def _run(field, t0, t1, z0, opts, eps_origin, record):
    z0 = PhasePoint.of(z0)
    if eps_origin is None:
        eps_origin = default_eps_origin(z0)
    r0 = abs(z0)
    if r0 <= eps_origin:
        raise OriginStart(f"start point {z0} lies within eps_origin={eps_origin:g} of the origin")
    if t1 < t0:
        raise ValueError("rotation requires t0 <= t1")
    watch = _OriginWatch(eps_origin, r0)
    raw, traj = integrate(angular_rhs(field), t0, t1, (z0.x, z0.y, 0.0), opts,
                          breakpoints=field.breakpoints, period=field.T, record=record,
                          on_step=watch)
    if raw[0] == "stopped":
        out = UndefinedOriginHit(watch.t_hit)
    elif raw[0] == "escaped":
        out = PlusInfinity(raw[1], raw[2][2] / TWO_PI, raw[3])
    else:
        z = raw[2]
        out = Finite(z[2] / TWO_PI, PhasePoint(z[0], z[1]), watch.min_r)
    return out, traj


def rotation(field: PlanarField, t0: float, t1: float, z0,
             opts: IntegratorOptions = IntegratorOptions(), eps_origin: Optional[float] = None):
    """Clockwise turns made by the solution through ``z0`` between t0 and t1."""
    return _run(field, t0, t1, z0, opts, eps_origin, record=False)[0]


def lifted_trajectory(field: PlanarField, t0: float, t1: float, z0,
                      opts: IntegratorOptions = IntegratorOptions(), eps_origin: Optional[float] = None):
    """Like :func:`rotation` but also returns the dense (x, y, theta) trajectory."""
    return _run(field, t0, t1, z0, opts, eps_origin, record=True)


# --- grids ---------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate region {self}")

    def contains(self, z) -> bool:
        x, y = z
        return self.xmin < x < self.xmax and self.ymin < y < self.ymax

    def as_tuple(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    @classmethod
    def square(cls, half_width: float) -> "Region":
        return cls(-half_width, half_width, -half_width, half_width)


@dataclass
class RotationGrid:
    region: Region
    xs: np.ndarray
    ys: np.ndarray
    outcomes: list  # row-major: index j * nx + i for (xs[i], ys[j])

    @property
    def nx(self):
        return len(self.xs)

    @property
    def ny(self):
        return len(self.ys)

    def outcome(self, i, j):
        return self.outcomes[j * self.nx + i]

    def rho(self) -> np.ndarray:
        """(ny, nx) array: rho, +inf for escapes, nan for origin hits."""
        return np.array([o.rho for o in self.outcomes], dtype=float).reshape(self.ny, self.nx)

    def min_radius(self) -> np.ndarray:
        vals = [o.min_radius if isinstance(o, Finite) else (0.0 if isinstance(o, UndefinedOriginHit) else math.inf)
                for o in self.outcomes]
        return np.array(vals, dtype=float).reshape(self.ny, self.nx)

    def centers(self):
        for j, y in enumerate(self.ys):
            for i, x in enumerate(self.xs):
                yield i, j, float(x), float(y)


def cell_centers(region: Region, nx: int, ny: int):
    dx = (region.xmax - region.xmin) / nx
    dy = (region.ymax - region.ymin) / ny
    xs = region.xmin + (np.arange(nx) + 0.5) * dx
    ys = region.ymin + (np.arange(ny) + 0.5) * dy
    return xs, ys


def _grid_task(args, field, opts, eps_origin):
    x, y = args
    z = PhasePoint(x, y)
    eps = default_eps_origin(z) if eps_origin is None else eps_origin
    if abs(z) <= eps:
        return UndefinedOriginHit(0.0)
    return rotation(field, 0.0, field.T, z, opts, eps)


def rotation_grid(field: PlanarField, region: Region, nx: int, ny: int,
                  opts: IntegratorOptions = IntegratorOptions(), eps_origin: Optional[float] = None,
                  threads: Optional[int] = None) -> RotationGrid:
    """rho(T; 0, z) at the cell centers of an nx-by-ny grid over ``region``."""
    if nx < 2 or ny < 2:
        raise ValueError("grid needs nx, ny >= 2")
    xs, ys = cell_centers(region, nx, ny)
    pts = [(float(x), float(y)) for y in ys for x in xs]
    task = partial(_grid_task, field=field, opts=opts, eps_origin=eps_origin)
    return RotationGrid(region, xs, ys, _parallel.parallel_map(task, pts, threads))


# --- angular velocity estimates ---------------------------------------------------

def l_alpha(alpha: float) -> float:
    """Closed form of the integral of 1/(alpha cos^2 + sin^2) over one turn."""
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    return TWO_PI / math.sqrt(alpha)


def l_alpha_quadrature(alpha: float) -> float:
    """Adaptive quadrature of the same integral; valid for any alpha > 0."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    integrand = lambda b: 1.0 / (alpha * math.cos(b) ** 2 + math.sin(b) ** 2)
    total = 0.0
    # quarter periods keep the peaks at the interval ends
    for k in range(4):
        val, _ = sp_integrate.quad(integrand, k * math.pi / 2, (k + 1) * math.pi / 2,
                                   epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return total


def outer_radius(n: int, T: float, gamma_alpha: Callable[[float], float], margin: float = 0.01):
    """(alpha, R) such that solutions staying outside radius R on [0, T] turn more than n times.

    ``gamma_alpha(alpha)`` must return the mean over [0, T] of a function
    gamma with (f + p) x > alpha x^2 - gamma(t) |x|; this is not checked here.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = (8 * math.pi ** 2 * n / T) ** 2 * (1 + margin)
    b = float(gamma_alpha(alpha))
    return alpha, 2.0 * b * (1 + margin)


# --- half-turn monotonicity ----------------------------------------------------------

@dataclass
class MonotonicityReport:
    in_class: bool
    checked: int = 0
    skipped: int = 0
    violations: list = dc_field(default_factory=list)

    @property
    def label(self):
        return "in class" if self.in_class else "out of class"

    @property
    def ok(self):
        return not self.violations


def check_monotonicity(field: PlanarField, samples: Sequence, opts: IntegratorOptions = IntegratorOptions(),
                       ladder: int = 16, tol: float = 1e-6, in_class: Optional[bool] = None,
                       t_end: Optional[float] = None) -> MonotonicityReport:
    """Check rho(s) >= rho(t) - 1/2 on a ladder of times, for each (t0, z0) sample."""
    if in_class is None:
        from .diagnostics import check_superlinearity
        in_class = check_superlinearity(field, [10.0, 100.0, 1000.0], 16, 50.0).consistent
    report = MonotonicityReport(in_class)
    for t0, z0 in samples:
        t1 = field.T if t_end is None else t_end
        out, traj = lifted_trajectory(field, t0, t1, z0, opts)
        if not isinstance(out, Finite):
            report.skipped += 1
            continue
        times = np.linspace(t0, t1, ladder + 2)[1:]
        rhos = [traj(s)[2] / TWO_PI for s in times]
        rhos.insert(0, 0.0)
        times = [t0, *times]
        report.checked += 1
        running_max = -math.inf
        for k, r in enumerate(rhos):
            if r < running_max - 0.5 - tol:
                report.violations.append({"t0": t0, "z0": tuple(PhasePoint.of(z0)),
                                          "s": float(times[k]), "rho": r, "earlier_max": running_max})
            running_max = max(running_max, r)
    return report
