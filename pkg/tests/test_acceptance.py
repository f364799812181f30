"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are written
straight to the terminal, bypassing output capture.
"""
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from rotor.field_model import builtin_field, expression_field, reverse_field
from rotor.integrator import IntegratorOptions, integrate, poincare_map
from rotor.rotation import (
    Finite, PlusInfinity, Region, check_monotonicity, l_alpha, l_alpha_quadrature, rotation,
)
from rotor.topology import (
    PolyCurve, build_capture_set, choose_n_bar, degree_fixed_point, find_periodic, find_periodic_in,
    multiplicity_search, sample_winding,
)

TWO_PI = 2 * math.pi
ROOT = Path(__file__).resolve().parent.parent
DUFF = builtin_field("duffing", eps=0.05)
MATHIEU = expression_field("x^3 + 0.05*cos(t)*x", label="cubic_mathieu")


def cubic_period_oracle() -> float:
    """T1 = 4 int_0^1 dx / sqrt((1 - x^4)/2), with x = sin(phi) to remove the endpoint singularity."""
    val, _ = quad(lambda p: 1.0 / math.sqrt(1.0 + math.sin(p) ** 2), 0.0, math.pi / 2,
                  epsabs=1e-14, epsrel=1e-14)
    return 4.0 * math.sqrt(2.0) * val


# computed before anything from the package runs
T1 = cubic_period_oracle()


@pytest.fixture
def verdict(capsys):
    def report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


def _samples(rng, n, half_width=3.0, hole=0.1):
    out = []
    while len(out) < n:
        z = rng.uniform(-half_width, half_width, 2)
        if math.hypot(*z) > hole:
            out.append((float(z[0]), float(z[1])))
    return out


def test_criterion_01_l_alpha(verdict):
    errs = {a: abs(l_alpha_quadrature(a) - l_alpha(a)) for a in (1.5, 4.0, 10.0, 100.0)}
    worst = max(errs.values())
    verdict(1, worst < 1e-10, f"max |quadrature - 2 pi/sqrt(alpha)| = {worst:.2e} (tol 1e-10)")


def test_criterion_02_linear_rotation(verdict):
    worst = 0.0
    for omega in (1.0, 1.5, 2.0, 3.0):
        field = builtin_field("linear", omega=omega)
        for r in (0.1, 1.0, 10.0):
            for a in TWO_PI * np.arange(8) / 8 + 0.1:
                out = rotation(field, 0.0, TWO_PI, (r * math.cos(a), r * math.sin(a)))
                err = abs(out.rho - omega) if isinstance(out, Finite) else math.inf
                worst = max(worst, err)
    verdict(2, worst < 1e-8, f"max |rho - omega| = {worst:.2e} over 96 starts (tol 1e-8)")


def test_criterion_03_cubic_scaling(verdict):
    rows = []
    for A in (2.0, 5.0, 10.0):
        out = rotation(expression_field("x^3"), 0.0, TWO_PI, (A, 0.0))
        expected = TWO_PI * A / T1
        rows.append((A, out.rho, expected, abs(out.rho - expected) / expected))
    worst = max(r[3] for r in rows)
    detail = "; ".join(f"A={A:g}: rho={rho:.4f} vs 2 pi A/T1={e:.4f} ({100 * rel:.2f}%)" for A, rho, e, rel in rows)
    verdict(3, worst < 0.01, f"T1={T1:.6f}; {detail} (tol 1%)")


class ConstantDisplacement:
    """Stands in for phi(T, z) - z at the winding layer: a pure translation."""

    def evaluate(self, points):
        return [(3.0, 0.0, None)] * len(points)


def test_criterion_04_degree(verdict):
    reports = [degree_fixed_point(builtin_field("linear", omega=1.5), PolyCurve.circle(r, 16)) for r in (0.5, 1.0, 2.0)]
    ok_linear = all(rep.degree == 1 and rep.boundary_int_free for rep in reports)
    w = sample_winding(PolyCurve.circle(1.0, 16), ConstantDisplacement())[0]
    verdict(4, ok_linear and w == 0,
            f"linear(1.5) degrees {[r.degree for r in reports]}, int-free {[r.boundary_int_free for r in reports]}; "
            f"translation stub winding {w}")


def test_criterion_05_duffing_pipeline(verdict):
    n_bar = choose_n_bar(DUFF)
    cs = build_capture_set(DUFF, n_bar, Region(-3.0, 3.0, -3.0, 3.0), (32, 32))
    level_ok = cs.level == n_bar + 0.5 and all(abs(r - cs.level) < 1e-3 for r in cs.vertex_rho)
    deg = degree_fixed_point(DUFF, cs.inner_component)
    orbit = find_periodic_in(DUFF, cs.inner_component)
    z = orbit.z_star
    end = poincare_map(DUFF, z, IntegratorOptions().tightened(10)).z
    tight = math.hypot(end.x - z.x, end.y - z.y)
    seeded = find_periodic(DUFF, (-0.05, 0.0))
    gap = math.hypot(seeded.z_star.x - z.x, seeded.z_star.y - z.y)
    ok = level_ok and deg.degree == 1 and orbit.residual < 1e-9 and tight < 1e-8 and gap < 1e-6
    verdict(5, ok, f"level {cs.level} ({len(cs.vertex_rho)} vertices), degree {deg.degree}, "
                   f"residual {orbit.residual:.2e}, 10x-tight residual {tight:.2e}, "
                   f"z* = ({z.x:.9f}, {z.y:.2e}), seed-path gap {gap:.2e}")


def test_criterion_06_reversal_identity(verdict):
    rng = np.random.default_rng(6)
    rev = reverse_field(DUFF)
    diffs = []
    while len(diffs) < 20:
        t = float(rng.uniform(0.1, TWO_PI))
        z = _samples(rng, 1)[0]
        fwd = rotation(DUFF, 0.0, t, z)
        if not isinstance(fwd, Finite):
            continue
        back = rotation(rev, TWO_PI - t, TWO_PI, (-fwd.terminal.x, fwd.terminal.y))
        if not isinstance(back, Finite):
            continue
        diffs.append(abs(fwd.rho - back.rho))
    worst = max(diffs)
    verdict(6, worst < 1e-6, f"max |rho - rho_hat| = {worst:.2e} over 20 samples (tol 1e-6)")


def test_criterion_07_half_turn_monotonicity(verdict):
    rng = np.random.default_rng(7)
    parts = []
    ok = True
    for field in (DUFF, MATHIEU):
        samples = [(float(rng.uniform(0.0, TWO_PI)), z) for z in _samples(rng, 100)]
        rep = check_monotonicity(field, samples, ladder=16, tol=1e-6, t_end=None)
        ok = ok and rep.ok and rep.checked + rep.skipped == 100
        parts.append(f"{field.label}: {len(rep.violations)} violations, {rep.checked} checked, {rep.skipped} skipped")
    verdict(7, ok, "; ".join(parts))


def test_criterion_08_multiplicity(verdict):
    base = find_periodic(MATHIEU, (0.0, 0.0))
    res = multiplicity_search(MATHIEU, base, [1, 2, 3])
    chosen = {}
    for k in (1, 2, 3):
        good = [o for o in res.by_k.get(k, []) if abs(o.rho - k) < 0.05 and o.residual < 1e-8]
        if good:
            chosen[k] = good[0]
    distinct = all(math.hypot(a.z_star.x - b.z_star.x, a.z_star.y - b.z_star.y) > 1e-6 and abs(a.rho - b.rho) > 0.5
                   for i, a in enumerate(chosen.values()) for b in list(chosen.values())[i + 1:])
    ok = sorted(chosen) == [1, 2, 3] and distinct
    detail = ", ".join(f"k={k}: rho={o.rho:.4f} res={o.residual:.1e}" for k, o in sorted(chosen.items()))
    verdict(8, ok, f"{detail}; not found: {res.not_found or 'none'}")


def test_criterion_09_blow_up(verdict):
    raw, _ = integrate(lambda t, z: (z[0] * z[0], 0.0), 0.0, 2.0, (1.0, 0.0), IntegratorOptions())
    t_esc = raw[1] if raw[0] == "escaped" else math.nan
    spiral = expression_field("x^5", "-y*abs(y)^0.5", label="spiralling blow-up")
    cut = [rotation(spiral, 0.0, TWO_PI, (1.0, 0.0), IntegratorOptions(escape_radius=R)) for R in (1e3, 1e4, 1e5)]
    infinite = all(isinstance(o, PlusInfinity) for o in cut)
    rhos = [o.rho_at_cutoff if isinstance(o, PlusInfinity) else math.nan for o in cut]
    growing = infinite and rhos[0] < rhos[1] < rhos[2]
    ok = 0.99 <= t_esc <= 1.0 and growing
    verdict(9, ok, f"x' = x^2 escapes at t = {t_esc:.6f}; rho_at_cutoff at R = 1e3, 1e4, 1e5: "
                   + ", ".join(f"{r:.3f}" for r in rhos))


def test_criterion_10_thread_determinism(verdict, tmp_path):
    outs = []
    for n in (1, 8):
        out = tmp_path / f"threads{n}"
        subprocess.run([sys.executable, "-m", "rotor.cli", "find", str(ROOT / "scenarios" / "duffing.toml"),
                        "--threads", str(n), "--out", str(out)], check=True, capture_output=True)
        outs.append((out / "orbits.json").read_bytes())
    verdict(10, outs[0] == outs[1], f"orbits.json with --threads 1 and 8: "
                                    f"{'byte-identical' if outs[0] == outs[1] else 'DIFFERENT'} ({len(outs[0])} bytes)")
