"""Planar fields x' = y, y' = -f(t, x) - p(t, x, y) with period T.

All component functions are small picklable callables, so fields can be
shipped to worker processes.  Objects exposing a ``fast`` attribute hand the
integrator a bare closure to avoid a layer of method dispatch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteEvaluation, NotHamiltonian, PeriodMismatch
from .expr import ExprFunction

__all__ = [
    "PhasePoint", "PeriodicFunction", "PlanarField", "Zero",
    "eval_rhs", "reverse_field", "translate_field", "recenter_field",
    "builtin_field", "BUILTINS", "periodicity_defect", "expression_field",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"phase point must be finite, got ({self.x}, {self.y})")

    @classmethod
    def of(cls, z) -> "PhasePoint":
        if isinstance(z, PhasePoint):
            return z
        x, y = z
        return cls(float(x), float(y))

    def __iter__(self):
        yield self.x
        yield self.y

    def __abs__(self):
        return math.hypot(self.x, self.y)

    def as_tuple(self):
        return (self.x, self.y)


class Zero:
    """The identically zero function of any arguments."""

    def __call__(self, *args):
        return 0.0

    def __repr__(self):
        return "Zero()"

    def __eq__(self, other):
        return isinstance(other, Zero)

    def __hash__(self):
        return 0


@dataclass(frozen=True)
class PlanarField:
    f: Callable
    p: Callable
    T: float
    label: str = "field"
    breakpoints: tuple = ()

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"period must be positive, got {self.T}")
        bad = [b for b in self.breakpoints if not 0.0 <= b < self.T]
        if bad:
            raise ValueError(f"breakpoints must lie in [0, T): {bad}")

    @property
    def p_is_zero(self) -> bool:
        return isinstance(self.p, Zero)

    def eval_rhs(self, t, z):
        return eval_rhs(self, t, z)


def eval_rhs(field: PlanarField, t: float, z) -> tuple:
    """(dx, dy) at time t; raises NonFiniteEvaluation on NaN/inf components."""
    x, y = z
    fv = field.f(t, x)
    pv = field.p(t, x, y)
    for v in (fv, pv):
        if not math.isfinite(v):
            raise NonFiniteEvaluation(t, x, y, v)
    return (y, -fv - pv)


# --- periodic shift functions -------------------------------------------------

class _CentralDifference:
    def __init__(self, fn, h):
        self.fn = fn
        self.h = h

    def __call__(self, t):
        return (self.fn(t + self.h) - self.fn(t - self.h)) / (2.0 * self.h)


class _SplineEval:
    def __init__(self, spline, T, nu):
        self.spline = spline
        self.T = T
        self.nu = nu

    def __call__(self, t):
        return float(self.spline(t % self.T, self.nu))


class _Sinusoid:
    def __init__(self, amplitude, omega, phase, order):
        self.amplitude, self.omega, self.phase, self.order = amplitude, omega, phase, order

    def __call__(self, t):
        # d^k/dt^k A sin(w t + c) = A w^k sin(w t + c + k pi/2)
        return self.amplitude * self.omega ** self.order * math.sin(
            self.omega * t + self.phase + self.order * math.pi / 2)


@dataclass(frozen=True)
class PeriodicFunction:
    value: Callable
    derivative: Callable
    second_derivative: Callable
    T: float

    @classmethod
    def zero(cls, T: float) -> "PeriodicFunction":
        z = Zero()
        return cls(z, z, z, T)

    @classmethod
    def sinusoid(cls, amplitude: float, T: float = TWO_PI, harmonic: int = 1,
                 phase: float = 0.0) -> "PeriodicFunction":
        """``amplitude * sin(2 pi harmonic t / T + phase)`` with exact derivatives."""
        w = TWO_PI * harmonic / T
        return cls(*(_Sinusoid(amplitude, w, phase, k) for k in range(3)), T=T)

    @classmethod
    def from_expressions(cls, value: str, derivative: str, second_derivative: Optional[str] = None,
                         T: float = TWO_PI) -> "PeriodicFunction":
        a = ExprFunction(value, args=("t",))
        da = ExprFunction(derivative, args=("t",))
        if second_derivative is None:
            dda = _CentralDifference(da, 1e-5 * T)
        else:
            dda = ExprFunction(second_derivative, args=("t",))
        return cls(a, da, dda, T)

    @classmethod
    def from_samples(cls, values, T: float) -> "PeriodicFunction":
        """Periodic cubic spline through equispaced samples on [0, T)."""
        from scipy.interpolate import CubicSpline

        values = np.asarray(values, dtype=float)
        ts = np.linspace(0.0, T, len(values) + 1)
        spline = CubicSpline(ts, np.append(values, values[0]), bc_type="periodic")
        return cls(*(_SplineEval(spline, T, k) for k in range(3)), T=T)


# --- transformed component functions ----------------------------------------

def _fast(fn):
    return getattr(fn, "fast", fn)


class _ReversedF:
    def __init__(self, f, T):
        self.f, self.T = f, T

    def __call__(self, t, x):
        return -self.f(self.T - t, -x)

    @property
    def fast(self):
        f, T = _fast(self.f), self.T
        return lambda t, x: -f(T - t, -x)


class _ReversedP:
    def __init__(self, p, T):
        self.p, self.T = p, T

    def __call__(self, t, x, y):
        return -self.p(self.T - t, -x, y)

    @property
    def fast(self):
        p, T = _fast(self.p), self.T
        return lambda t, x, y: -p(T - t, -x, y)


class _TranslatedF:
    def __init__(self, f, a: PeriodicFunction):
        self.f, self.a = f, a

    def __call__(self, t, u):
        return self.f(t, u + self.a.value(t))

    @property
    def fast(self):
        f, a = _fast(self.f), _fast(self.a.value)
        return lambda t, u: f(t, u + a(t))


class _TranslatedP:
    """p(t, u + a, w + a') + a''; the a'' term keeps x = u + a an exact solution."""

    def __init__(self, p, a: PeriodicFunction):
        self.p, self.a = p, a

    def __call__(self, t, u, w):
        a = self.a
        return self.p(t, u + a.value(t), w + a.derivative(t)) + a.second_derivative(t)

    @property
    def fast(self):
        p = _fast(self.p)
        a, da, dda = (_fast(g) for g in (self.a.value, self.a.derivative, self.a.second_derivative))
        return lambda t, u, w: p(t, u + a(t), w + da(t)) + dda(t)


class _OrbitPosition:
    """x-component of a stored periodic trajectory, extended periodically."""

    def __init__(self, trajectory, T):
        self.trajectory, self.T = trajectory, T

    def __call__(self, t):
        return self.trajectory((t % self.T))[0]


class _RecenteredF:
    """f(t, w + xbar(t)) + xbar''(t) with xbar'' = -f(t, xbar(t))."""

    def __init__(self, f, xbar):
        self.f, self.xbar = f, xbar

    def __call__(self, t, w):
        xb = self.xbar(t)
        return self.f(t, w + xb) - self.f(t, xb)

    @property
    def fast(self):
        f, xbar = _fast(self.f), self.xbar
        def g(t, w):
            xb = xbar(t)
            return f(t, w + xb) - f(t, xb)
        return g


def _shift_breakpoints(field, extra=()):
    return tuple(sorted(set(field.breakpoints) | set(extra)))


def reverse_field(field: PlanarField) -> PlanarField:
    """Field of the reversed system x^ = -x, y^ = y, t^ = T - t."""
    T = field.T
    p = field.p if field.p_is_zero else _ReversedP(field.p, T)
    bps = tuple(sorted({(T - b) % T for b in field.breakpoints}))
    return PlanarField(_ReversedF(field.f, T), p, T, f"reversed({field.label})", bps)


def translate_field(field: PlanarField, a: PeriodicFunction) -> PlanarField:
    """Field for u = x - a(t); T-periodic u-solutions give x = u + a."""
    if not math.isclose(a.T, field.T, rel_tol=1e-12):
        raise PeriodMismatch(f"shift period {a.T} differs from field period {field.T}")
    return PlanarField(_TranslatedF(field.f, a), _TranslatedP(field.p, a), field.T,
                       f"translated({field.label})", field.breakpoints)


def recenter_field(field: PlanarField, orbit, samples: int = 64, seed: int = 0) -> PlanarField:
    """Field of w = x - xbar(t) about a periodic solution xbar of a Hamiltonian field."""
    if not field.p_is_zero:
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-10, 10, size=(samples, 3)) * (field.T / 20, 1, 1)
        for t, x, y in pts:
            if field.p(t, x, y) != 0.0:
                raise NotHamiltonian(f"p({t:.3g}, {x:.3g}, {y:.3g}) = {field.p(t, x, y)!r} != 0")
    traj = orbit.trajectory
    if all(v == 0.0 for z in traj.z for v in z[:2]) and all(v == 0.0 for v in traj.terminal_state[:2]):
        return field  # recentering about the zero solution changes nothing
    xbar = _OrbitPosition(traj, field.T)
    return PlanarField(_RecenteredF(field.f, xbar), Zero(), field.T,
                       f"recentered({field.label})", field.breakpoints)


def periodicity_defect(field: PlanarField, samples: int = 64, seed: int = 0,
                       radius: float = 5.0) -> float:
    """Max |rhs(t + T) - rhs(t)| over random sample points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, x, y in rng.uniform(-1, 1, size=(samples, 3)) * (field.T, radius, radius):
        a = eval_rhs(field, t, (x, y))
        b = eval_rhs(field, t + field.T, (x, y))
        worst = max(worst, abs(a[1] - b[1]))
    return worst


# --- catalogue ----------------------------------------------------------------

def expression_field(f: str, p: Optional[str] = None, T: float = TWO_PI, label: str = "forced_general",
                     params=None, breakpoints=()) -> PlanarField:
    fn = ExprFunction(f, args=("t", "x"), params=params)
    pn = Zero() if p is None or p.strip() in ("", "0", "0.0") else ExprFunction(p, args=("t", "x", "y"), params=params)
    return PlanarField(fn, pn, float(T), label, tuple(breakpoints))


def _linear(omega=1.0, T=TWO_PI):
    return expression_field("omega^2*x", None, T, f"linear({omega:g})", {"omega": omega})


def _duffing(eps=0.05, T=TWO_PI):
    return expression_field("x^3", "-eps*cos(t)", T, f"duffing({eps:g})", {"eps": eps})


def _superlinear_poly(c3=1.0, c5=0.0, T=TWO_PI):
    return expression_field("c3*x^3 + c5*x^5", None, T, f"superlinear_poly({c3:g},{c5:g})",
                            {"c3": c3, "c5": c5})


def _cubic_mathieu(delta=0.05, T=TWO_PI):
    return expression_field("x^3 + delta*cos(t)*x", None, T, f"cubic_mathieu({delta:g})",
                            {"delta": delta})


def _forced_general(f="x^3", p=None, T=TWO_PI, **params):
    return expression_field(f, p, T, "forced_general", params)


BUILTINS = {
    "linear": _linear,
    "duffing": _duffing,
    "superlinear_poly": _superlinear_poly,
    "cubic_mathieu": _cubic_mathieu,
    "forced_general": _forced_general,
}


def builtin_field(name: str, **params) -> PlanarField:
    """Look up a catalogue field, e.g. ``builtin_field("duffing", eps=0.05)``."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown field {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)
