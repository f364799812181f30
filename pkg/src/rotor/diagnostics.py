"""Sampled checks of the standing hypotheses on f and p.

Every check returns a HypothesisReport whose verdict is either
``ConsistentOnSamples`` or ``ViolatedAt`` with a concrete witness that can be
re-evaluated on its own.  Nothing here is a proof.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from functools import partial
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _parallel
from .field_model import PeriodicFunction, PlanarField, reverse_field
from .integrator import Escaped, IntegratorOptions, flow
from .rotation import Region

__all__ = [
    "HypothesisReport", "CONSISTENT", "VIOLATED",
    "check_superlinearity", "check_p_bound", "check_continuability",
    "check_a5_sufficient", "check_super_est", "reports_to_json",
]

CONSISTENT = "ConsistentOnSamples"
VIOLATED = "ViolatedAt"
DEFAULT_SEED = 20240611

Scalar = Union[float, Callable[[float], float]]


@dataclass
class HypothesisReport:
    hypothesis: str
    verdict: str
    samples: int
    parameters: dict
    witness: Optional[dict] = None
    notes: list = dc_field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.verdict == CONSISTENT

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "verdict": self.verdict,
            "witness": self.witness,
            "samples": self.samples,
            "parameters": self.parameters,
            "notes": list(self.notes),
        }


def reports_to_json(reports: Sequence[HypothesisReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def _box(region):
    """(xmin, xmax, ymin, ymax); plain tuples may be degenerate, e.g. x fixed at 0."""
    return tuple(float(v) for v in (region.as_tuple() if isinstance(region, Region) else region))


def _as_function(g: Scalar) -> Callable[[float], float]:
    if callable(g):
        return g
    c = float(g)
    return lambda t: c


def check_superlinearity(field: PlanarField, x_magnitudes: Sequence[float] = (10.0, 100.0, 1000.0),
                         t_samples: int = 16, threshold: float = 50.0) -> HypothesisReport:
    """min_t f(t, x)/x at |x| = m must grow with m and exceed ``threshold`` at the largest m."""
    mags = [float(m) for m in x_magnitudes]
    if any(m <= 0 for m in mags) or any(b <= a for a, b in zip(mags, mags[1:])):
        raise ValueError("x_magnitudes must be positive and increasing")
    ts = [field.T * k / t_samples for k in range(t_samples)]
    params = {"x_magnitudes": mags, "t_samples": t_samples, "threshold": threshold}
    mins = []
    for m in mags:
        best = None
        for t in ts:
            for x in (m, -m):
                q = field.f(t, x) / x
                if best is None or q < best[0]:
                    best = (q, t, x)
        mins.append(best)
    params["min_quotients"] = [q for q, _, _ in mins]
    for prev, cur in zip(mins, mins[1:]):
        if not cur[0] > prev[0]:
            q, t, x = cur
            return HypothesisReport("A3", VIOLATED, len(mags) * 2 * t_samples, params,
                                    {"t": t, "x": x, "y": 0.0, "quotient": q, "previous_quotient": prev[0],
                                     "previous_x": prev[2], "previous_t": prev[1]},
                                    ["f(t, x)/x does not increase with |x|"])
    q, t, x = mins[-1]
    if not q >= threshold:
        return HypothesisReport("A3", VIOLATED, len(mags) * 2 * t_samples, params,
                                {"t": t, "x": x, "y": 0.0, "quotient": q},
                                [f"f(t, x)/x below {threshold} at the largest magnitude"])
    return HypothesisReport("A3", CONSISTENT, len(mags) * 2 * t_samples, params)


def check_p_bound(field: PlanarField, gamma_p: Scalar, C_p: float, samples: int = 2000,
                  region=(-10.0, 10.0, -10.0, 10.0), seed: int = DEFAULT_SEED) -> HypothesisReport:
    """|p(t, x, y)| < gamma_p(t) + C_p |x| on random samples of [0, T] x region."""
    g = _as_function(gamma_p)
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, field.T, samples)
    xmin, xmax, ymin, ymax = _box(region)
    x = rng.uniform(xmin, xmax, samples)
    y = rng.uniform(ymin, ymax, samples)
    params = {"C_p": C_p, "region": list(_box(region)), "seed": seed}
    if not callable(gamma_p):
        params["gamma_p"] = float(gamma_p)
    for ti, xi, yi in zip(t.tolist(), x.tolist(), y.tolist()):
        lhs = abs(field.p(ti, xi, yi))
        rhs = g(ti) + C_p * abs(xi)
        if not lhs < rhs:
            return HypothesisReport("A4", VIOLATED, samples, params,
                                    {"t": ti, "x": xi, "y": yi, "abs_p": lhs, "bound": rhs})
    return HypothesisReport("A4", CONSISTENT, samples, params)


def _continuation_task(tbar, field, reversed_field, a, opts):
    T = field.T
    x0, y0 = a.value(tbar), a.derivative(tbar)
    fwd = flow(field, tbar, T, (x0, y0), opts)
    if isinstance(fwd, Escaped):
        return ("forward", fwd.t_escape, fwd.reason)
    # the reversed system covers [0, tbar] of the original one
    bwd = flow(reversed_field, T - tbar, T, (-x0, y0), opts)
    if isinstance(bwd, Escaped):
        return ("backward", T - bwd.t_escape, bwd.reason)
    return None


def check_continuability(field: PlanarField, a: Optional[PeriodicFunction] = None, t_grid: int = 32,
                         opts: IntegratorOptions = IntegratorOptions(),
                         threads: Optional[int] = None) -> HypothesisReport:
    """Solutions through (a(s), a'(s)) at time s exist on all of [0, T], for s on a grid."""
    star = a is not None
    if a is None:
        a = PeriodicFunction.zero(field.T)
    elif not math.isclose(a.T, field.T, rel_tol=1e-12):
        raise ValueError(f"a has period {a.T}, field has period {field.T}")
    name = "A5star" if star else "A5"
    grid = [field.T * k / t_grid for k in range(t_grid)]
    task = partial(_continuation_task, field=field, reversed_field=reverse_field(field), a=a, opts=opts)
    results = _parallel.parallel_map(task, grid, threads)
    params = {"t_grid": t_grid, "escape_radius": opts.escape_radius}
    for tbar, res in zip(grid, results):
        if res is not None:
            direction, t_esc, reason = res
            params.update({"escape_time": t_esc, "direction": direction, "reason": reason})
            return HypothesisReport(name, VIOLATED, t_grid, params,
                                    {"t": tbar, "x": a.value(tbar), "y": a.derivative(tbar)})
    return HypothesisReport(name, CONSISTENT, t_grid, params)


A5_FOOTNOTE = ("the sufficient condition is written with f taking (t, x, y); "
               "f here depends on (t, x) only and is evaluated as f(t, x)")


def check_a5_sufficient(field: PlanarField, alpha: float, samples: int = 2000,
                        seed: int = DEFAULT_SEED) -> HypothesisReport:
    """y (x - f(t, x) - p(t, x, y)) < alpha |(x, y)| on [0, T] x the ball of radius alpha T."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(seed)
    R = alpha * field.T
    t = rng.uniform(0.0, field.T, samples)
    r = R * np.sqrt(rng.uniform(0.0, 1.0, samples))
    phi = rng.uniform(0.0, 2 * math.pi, samples)
    params = {"alpha": alpha, "ball_radius": R, "seed": seed}
    used = 0
    for ti, ri, pi in zip(t.tolist(), r.tolist(), phi.tolist()):
        x, y = ri * math.cos(pi), ri * math.sin(pi)
        if x == 0.0 and y == 0.0:
            continue
        used += 1
        lhs = y * (x - field.f(ti, x) - field.p(ti, x, y))
        rhs = alpha * math.hypot(x, y)
        if not lhs < rhs:
            return HypothesisReport("A5Sufficient", VIOLATED, used, params,
                                    {"t": ti, "x": x, "y": y, "lhs": lhs, "rhs": rhs}, [A5_FOOTNOTE])
    return HypothesisReport("A5Sufficient", CONSISTENT, used, params, None, [A5_FOOTNOTE])


def check_super_est(field: PlanarField, alpha: float, gamma_alpha: Scalar, samples: int = 2000,
                    region=(-10.0, 10.0, -10.0, 10.0), seed: int = DEFAULT_SEED) -> HypothesisReport:
    """(f + p) x > alpha x^2 - gamma_alpha(t) |x| on random samples (x = 0 skipped)."""
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    g = _as_function(gamma_alpha)
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, field.T, samples)
    xmin, xmax, ymin, ymax = _box(region)
    x = rng.uniform(xmin, xmax, samples)
    y = rng.uniform(ymin, ymax, samples)
    params = {"alpha": alpha, "region": list(_box(region)), "seed": seed}
    if not callable(gamma_alpha):
        params["gamma_alpha"] = float(gamma_alpha)
    used = 0
    for ti, xi, yi in zip(t.tolist(), x.tolist(), y.tolist()):
        if xi == 0.0:
            continue
        used += 1
        lhs = (field.f(ti, xi) + field.p(ti, xi, yi)) * xi
        rhs = alpha * xi * xi - g(ti) * abs(xi)
        if not lhs > rhs:
            return HypothesisReport("SuperEst", VIOLATED, used, params,
                                    {"t": ti, "x": xi, "y": yi, "lhs": lhs, "rhs": rhs})
    return HypothesisReport("SuperEst", CONSISTENT, used, params)
