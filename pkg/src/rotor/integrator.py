"""Adaptive Dormand-Prince 5(4) integration of planar periodic fields.

The evolution map either returns the terminal point or reports that the
solution escaped: the state left the ball of radius ``escape_radius`` or the
step size collapsed below ``min_step`` while the error controller kept
rejecting.  Neither trigger can certify genuine finite-time blow-up; both are
reported with a distinct reason tag.

The stepper works on plain Python floats.  For 2- and 3-component states
this is several times faster than small numpy arrays.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

from .errors import NonFiniteEvaluation
from .field_model import PhasePoint, PlanarField

__all__ = [
    "IntegratorOptions", "Point", "Escaped", "FlowOutcome", "Trajectory",
    "RADIUS_EXCEEDED", "STEP_COLLAPSE",
    "flow", "flow_dense", "poincare_map", "integrate", "field_rhs",
]

RADIUS_EXCEEDED = "RadiusExceeded"
STEP_COLLAPSE = "StepCollapse"


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    escape_radius: float = 1e6
    # None means 1e-12 * period of the field being integrated
    min_step: Optional[float] = None
    # None means period / 32; keeps tiny-amplitude solutions from being stepped on abs_tol alone
    max_step: Optional[float] = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "escape_radius", "max_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("min_step", "max_step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol > 1e-3 or self.abs_tol > 1e-3:
            raise ValueError("rel_tol and abs_tol must not exceed 1e-3")

    def tightened(self, factor: float = 10.0) -> "IntegratorOptions":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)


@dataclass(frozen=True)
class Point:
    z: PhasePoint


@dataclass(frozen=True)
class Escaped:
    t_escape: float
    last_z: PhasePoint
    reason: str


FlowOutcome = Union[Point, Escaped]


# Dormand-Prince coefficients
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# Hairer's dense output coefficients
_D1, _D3, _D4, _D5, _D6, _D7 = (
    -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423)


class Trajectory:
    """Accepted steps of one integration with a 4th-order continuous extension."""

    def __init__(self, dim: int):
        self.dim = dim
        self.origin = None
        self.end = None
        self.t: list[float] = []
        self.h: list[float] = []
        self.z: list[tuple] = []
        self.coeffs: list[tuple] = []
        self.outcome = None

    def _append(self, t, h, z, coeffs, t_new, z_new):
        self.end = (t_new, z_new)
        self.t.append(t)
        self.h.append(h)
        self.z.append(z)
        self.coeffs.append(coeffs)

    @property
    def t_start(self) -> float:
        return self.origin[0]

    @property
    def t_end(self) -> float:
        return self.end[0] if self.h else self.origin[0]

    @property
    def samples(self):
        """(t_i, z_i) pairs including the terminal state."""
        out = list(zip(self.t, self.z))
        out.append((self.t_end, self.terminal_state))
        return out

    @property
    def terminal_state(self) -> tuple:
        return self.end[1] if self.h else self.origin[1]

    def _eval(self, i, s):
        r1, r2, r3, r4, r5 = self.coeffs[i]
        s1 = 1.0 - s
        return tuple(a + s * (b + s1 * (c + s * (d + s1 * e)))
                     for a, b, c, d, e in zip(r1, r2, r3, r4, r5))

    def __call__(self, s: float) -> tuple:
        """State at time ``s`` inside the covered interval."""
        if not self.h:
            if s == self.origin[0]:
                return self.origin[1]
            raise ValueError("empty trajectory")
        t0, t1 = self.t_start, self.t_end
        if s < t0 - 1e-12 * (1 + abs(t0)) or s > t1 + 1e-12 * (1 + abs(t1)):
            raise ValueError(f"time {s} outside [{t0}, {t1}]")
        if s == t1:
            return self.terminal_state
        i = min(max(bisect.bisect_right(self.t, s) - 1, 0), len(self.h) - 1)
        return self._eval(i, (s - self.t[i]) / self.h[i])

    def point(self, s: float) -> PhasePoint:
        z = self(s)
        return PhasePoint(z[0], z[1])

    def __len__(self):
        return len(self.h)


def field_rhs(field: PlanarField) -> Callable:
    """Fast right-hand side ``(t, x, y) -> (dx, dy)`` without finiteness checks."""
    f = getattr(field.f, "fast", field.f)
    p = None if field.p_is_zero else getattr(field.p, "fast", field.p)
    if p is None:
        def rhs(t, z):
            return (z[1], -f(t, z[0]))
    else:
        def rhs(t, z):
            x, y = z[0], z[1]
            return (y, -f(t, x) - p(t, x, y))
    return rhs


def _segments(t0, t1, breakpoints, period):
    """Split [t0, t1] at the periodic images of the field breakpoints."""
    cuts = []
    if breakpoints and period:
        k0 = math.floor(t0 / period) - 1
        k1 = math.ceil(t1 / period) + 1
        for k in range(k0, k1 + 1):
            for b in breakpoints:
                s = b + k * period
                if t0 < s < t1:
                    cuts.append(s)
    edges = [t0] + sorted(set(cuts)) + [t1]
    return list(zip(edges[:-1], edges[1:]))


def integrate(rhs, t0, t1, z0, opts: IntegratorOptions, *, breakpoints=(), period=None,
              record: bool = False, check=None, on_step=None):
    """Integrate ``z' = rhs(t, z)`` from t0 to t1.

    Returns ``(outcome, trajectory)``; ``outcome`` is Point-like ``("ok", t, z)``
    or ``("escaped", t_escape, z_last, reason)``.  ``check(t, z)`` is called on
    non-finite stage values and must raise if the field itself is at fault.
    ``on_step(t, h, z_old, z_new, coeffs)`` may return a truthy value to stop.
    """
    z = tuple(float(v) for v in z0)
    n = len(z)
    traj = Trajectory(n) if record else None
    if traj is not None:
        traj.origin = (t0, z)
    if t1 == t0:
        return ("ok", t0, z), traj
    rtol, atol = opts.rel_tol, opts.abs_tol
    R2 = opts.escape_radius * opts.escape_radius
    span = period if period else (t1 - t0)
    hmin = opts.min_step if opts.min_step is not None else 1e-12 * span
    hmax = opts.max_step if opts.max_step is not None else span / 32
    steps = 0
    h = None
    t = t0
    k1 = rhs(t, z)
    _ensure_finite(k1, t, z, check)
    for seg_a, seg_b in _segments(t0, t1, breakpoints, period):
        if seg_a != t0:
            k1 = rhs(seg_a, z)
            _ensure_finite(k1, seg_a, z, check)
        t = seg_a
        if h is None:
            h = min(hmax, _initial_step(rhs, t, z, k1, seg_b - seg_a, rtol, atol))
        rejecting = False
        while t < seg_b:
            last = False
            if t + h >= seg_b or (seg_b - t - h) < 1e-12 * abs(seg_b):
                h_try = seg_b - t
                last = True
            else:
                h_try = h
            steps += 1
            if steps > opts.max_steps:
                raise RuntimeError(f"exceeded max_steps={opts.max_steps} at t={t}")
            hh = h_try
            y2 = tuple(zi + hh * _A21 * a for zi, a in zip(z, k1))
            k2 = rhs(t + _C2 * hh, y2)
            y3 = tuple(zi + hh * (_A31 * a + _A32 * b) for zi, a, b in zip(z, k1, k2))
            k3 = rhs(t + _C3 * hh, y3)
            y4 = tuple(zi + hh * (_A41 * a + _A42 * b + _A43 * c) for zi, a, b, c in zip(z, k1, k2, k3))
            k4 = rhs(t + _C4 * hh, y4)
            y5 = tuple(zi + hh * (_A51 * a + _A52 * b + _A53 * c + _A54 * d)
                       for zi, a, b, c, d in zip(z, k1, k2, k3, k4))
            k5 = rhs(t + _C5 * hh, y5)
            y6 = tuple(zi + hh * (_A61 * a + _A62 * b + _A63 * c + _A64 * d + _A65 * e)
                       for zi, a, b, c, d, e in zip(z, k1, k2, k3, k4, k5))
            t_new = seg_b if last else t + hh
            k6 = rhs(t_new, y6)
            z_new = tuple(zi + hh * (_B1 * a + _B3 * c + _B4 * d + _B5 * e + _B6 * f)
                          for zi, a, c, d, e, f in zip(z, k1, k3, k4, k5, k6))
            k7 = rhs(t_new, z_new)
            acc = 0.0
            for zi, zn, a, c, d, e, f, g in zip(z, z_new, k1, k3, k4, k5, k6, k7):
                ei = hh * (_E1 * a + _E3 * c + _E4 * d + _E5 * e + _E6 * f + _E7 * g)
                sc = atol + rtol * max(abs(zi), abs(zn))
                acc += (ei / sc) ** 2
            err = math.sqrt(acc / n)
            bad_stage = False
            if not math.isfinite(err):
                bad_stage = _domain_failure(((y2, k2), (y3, k3), (y4, k4), (y5, k5), (y6, k6), (z_new, k7)),
                                            opts.escape_radius)
                if check is not None:
                    check(t, z)
                err = 1e10
            if err <= 1.0:
                coeffs = None
                if record or on_step is not None:
                    coeffs = _dense(z, z_new, hh, k1, k3, k4, k5, k6, k7)
                r2 = z_new[0] * z_new[0] + z_new[1] * z_new[1]
                if r2 > R2:
                    return ("escaped", t, z, RADIUS_EXCEEDED), traj
                if traj is not None:
                    traj._append(t, hh, z, coeffs, t_new, z_new)
                if on_step is not None and on_step(t, hh, z, z_new, coeffs):
                    return ("stopped", t_new, z_new), traj
                t = t_new
                z = z_new
                k1 = k7
                fac = 5.0 if not rejecting else 1.0
                h_next = hh * min(fac, max(0.2, 0.9 * err ** -0.2 if err > 0 else fac))
                h = min(hmax, max(h, h_next) if last else h_next)
                rejecting = False
            else:
                rejecting = True
                h = hh * max(0.2, 0.9 * err ** -0.2)
                if h < hmin:
                    if bad_stage:
                        # the step only failed because the field left its domain
                        raise NonFiniteEvaluation(t, z[0], z[1], math.nan)
                    return ("escaped", t, z, STEP_COLLAPSE), traj
    return ("ok", t1, z), traj


def _domain_failure(stages, radius) -> bool:
    # NaN from a finite, in-range stage state means the field is undefined there;
    # overflow during a blow-up shows up as inf or as a non-finite stage state instead
    for y, k in stages:
        if all(math.isfinite(v) and abs(v) <= radius for v in y) and any(math.isnan(v) for v in k):
            return True
    return False


def _ensure_finite(k, t, z, check):
    for v in k:
        if not math.isfinite(v):
            if check is not None:
                check(t, z)
            raise NonFiniteEvaluation(t, z[0], z[1], v)


def _dense(z, z_new, h, k1, k3, k4, k5, k6, k7):
    r1 = z
    r2 = tuple(b - a for a, b in zip(z, z_new))
    r3 = tuple(h * a - d for a, d in zip(k1, r2))
    r4 = tuple(d - h * g - c for d, g, c in zip(r2, k7, r3))
    r5 = tuple(h * (_D1 * a + _D3 * c + _D4 * d + _D5 * e + _D6 * f + _D7 * g)
               for a, c, d, e, f, g in zip(k1, k3, k4, k5, k6, k7))
    return (r1, r2, r3, r4, r5)


def _initial_step(rhs, t, z, k1, span, rtol, atol):
    n = len(z)
    sc = [atol + abs(v) * rtol for v in z]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(z, sc)) / n)
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(k1, sc)) / n)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, abs(span))
    z1 = tuple(a + h0 * b for a, b in zip(z, k1))
    k2 = rhs(t + h0, z1)
    d2 = math.sqrt(sum(((b - a) / s) ** 2 for a, b, s in zip(k1, k2, sc)) / n) / h0
    if not math.isfinite(d2):
        return h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, abs(span))


def _make_check(field: PlanarField):
    def check(t, z):
        field.eval_rhs(t, PhasePoint(z[0], z[1]))
    return check


def _to_outcome(raw):
    if raw[0] == "escaped":
        _, t_e, z_e, reason = raw
        return Escaped(t_e, PhasePoint(z_e[0], z_e[1]), reason)
    return Point(PhasePoint(raw[2][0], raw[2][1]))


def flow(field: PlanarField, t0: float, t1: float, z0, opts: IntegratorOptions = IntegratorOptions()):
    """Evolve ``z0`` from t0 to t1; ``Point`` or ``Escaped``."""
    if t1 < t0:
        raise ValueError("flow requires t0 <= t1")
    z0 = PhasePoint.of(z0)
    raw, _ = integrate(field_rhs(field), t0, t1, (z0.x, z0.y), opts,
                       breakpoints=field.breakpoints, period=field.T, check=_make_check(field))
    return _to_outcome(raw)


def flow_dense(field: PlanarField, t0: float, t1: float, z0,
               opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    if t1 < t0:
        raise ValueError("flow requires t0 <= t1")
    z0 = PhasePoint.of(z0)
    raw, traj = integrate(field_rhs(field), t0, t1, (z0.x, z0.y), opts,
                          breakpoints=field.breakpoints, period=field.T, record=True,
                          check=_make_check(field))
    traj.outcome = _to_outcome(raw)
    return traj


def poincare_map(field: PlanarField, z0, opts: IntegratorOptions = IntegratorOptions()):
    """Time-T map from t = 0."""
    return flow(field, 0.0, field.T, z0, opts)
