import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import ellipk

from rotor.errors import NonFiniteEvaluation
from rotor.field_model import PlanarField, Zero, builtin_field, expression_field, reverse_field
from rotor.integrator import (
    RADIUS_EXCEEDED, STEP_COLLAPSE, Escaped, IntegratorOptions, Point, flow, flow_dense, integrate,
    poincare_map,
)

TWO_PI = 2 * math.pi
LIN1 = builtin_field("linear", omega=1.0)
LIN15 = builtin_field("linear", omega=1.5)
DUFF = builtin_field("duffing", eps=0.05)
CUBIC = expression_field("x^3", label="cubic")


def cubic_period_quadrature():
    """T1 = 4 int_0^1 dx / sqrt((1 - x^4)/2); x = sin(phi) removes the endpoint singularity."""
    val, _ = quad(lambda phi: 1.0 / math.sqrt(1.0 + math.sin(phi) ** 2), 0.0, math.pi / 2,
                  epsabs=1e-14, epsrel=1e-14)
    return 4.0 * math.sqrt(2.0) * val


T1 = cubic_period_quadrature()


def test_cubic_period_oracles_agree():
    # elliptic-integral closed form as a second, independent oracle
    assert abs(T1 - 4.0 * math.sqrt(2.0) * ellipk(-1.0)) < 1e-12
    assert abs(T1 - 7.4163) < 1e-4


def test_options_validation():
    with pytest.raises(ValueError):
        IntegratorOptions(rel_tol=1e-2)
    with pytest.raises(ValueError):
        IntegratorOptions(abs_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorOptions(min_step=-1.0)
    tight = IntegratorOptions().tightened(10)
    assert tight.rel_tol == pytest.approx(1e-11) and tight.abs_tol == pytest.approx(1e-13)


def test_harmonic_oscillator_period():
    z = flow(LIN1, 0.0, TWO_PI, (1.0, 0.0)).z
    assert abs(z.x - 1.0) < 1e-9 and abs(z.y) < 1e-9


def test_blow_up_of_x_squared():
    raw, _ = integrate(lambda t, z: (z[0] * z[0], 0.0), 0.0, 2.0, (1.0, 0.0), IntegratorOptions())
    assert raw[0] == "escaped"
    assert 1.0 - 1e-3 <= raw[1] <= 1.0
    assert raw[3] in (RADIUS_EXCEEDED, STEP_COLLAPSE)


def test_step_collapse_is_reported():
    # with an enormous escape radius only the step-size trigger can fire
    opts = IntegratorOptions(escape_radius=1e300)
    raw, _ = integrate(lambda t, z: (z[0] * z[0], 0.0), 0.0, 2.0, (1.0, 0.0), opts)
    assert raw[0] == "escaped" and raw[3] == STEP_COLLAPSE
    assert 1.0 - 1e-3 <= raw[1] <= 1.0


def test_cubic_unit_amplitude_period():
    z = flow(CUBIC, 0.0, T1, (1.0, 0.0)).z
    assert abs(z.x - 1.0) < 1e-6 and abs(z.y) < 1e-6


def test_dense_query():
    traj = flow_dense(LIN1, 0.0, TWO_PI, (1.0, 0.0))
    x, y = traj(math.pi / 2)
    assert abs(x) < 1e-8 and abs(y + 1.0) < 1e-8


def test_dense_terminal_matches_flow_bitwise():
    for field, z0 in ((DUFF, (0.7, -0.2)), (CUBIC, (3.0, 1.0)), (LIN15, (1.0, 0.0))):
        traj = flow_dense(field, 0.0, field.T, z0)
        out = flow(field, 0.0, field.T, z0)
        assert traj.terminal_state == (out.z.x, out.z.y)
        assert isinstance(traj.outcome, Point)


def test_trajectory_structure():
    traj = flow_dense(DUFF, 0.0, TWO_PI, (1.5, 0.5))
    assert all(b > a for a, b in zip(traj.t, traj.t[1:]))
    rhs = DUFF.eval_rhs
    for k in range(1, len(traj.t), 7):
        tk = traj.t[k]
        left = traj(tk - 1e-13)
        assert math.hypot(left[0] - traj.z[k][0], left[1] - traj.z[k][1]) < 1e-9
        # the interpolant's slope matches the field at mid-step
        tm = tk + 0.5 * traj.h[k]
        h = 1e-6
        a, b = traj(tm - h), traj(tm + h)
        slope = ((b[0] - a[0]) / (2 * h), (b[1] - a[1]) / (2 * h))
        exact = rhs(tm, traj(tm))
        assert math.hypot(slope[0] - exact[0], slope[1] - exact[1]) < 1e-5 * (1 + abs(exact[1]))


def test_continuous_dependence():
    a = flow(DUFF, 0.0, TWO_PI, (1.0, 0.5)).z
    b = flow(DUFF, 0.0, TWO_PI, (1.0 + 1e-6, 0.5)).z
    assert math.hypot(a.x - b.x, a.y - b.y) <= 1e-3


def test_poincare_linear():
    for z0 in ((1.0, 0.0), (0.3, -2.0), (-5.0, 5.0)):
        z = poincare_map(LIN1, z0).z
        assert math.hypot(z.x - z0[0], z.y - z0[1]) < 1e-9 * (1 + math.hypot(*z0))
    z = poincare_map(LIN15, (1.0, 0.0)).z
    assert abs(z.x + 1.0) < 1e-9 and abs(z.y) < 1e-9


def test_poincare_duffing_harmonic_balance_seed():
    # -a + 3a^3/4 = 0.05 has the small root a = -0.0501...
    z = poincare_map(DUFF, (-0.05, 0.0)).z
    assert math.hypot(z.x + 0.05, z.y) < 0.01


def test_breakpoints_are_respected():
    # y' = |sin t| has a kink at pi: y(2 pi) = 4 and x(2 pi) = 4 pi exactly
    def error(breakpoints):
        kink = expression_field("0", "-abs(sin(t))", breakpoints=breakpoints)
        z = flow(kink, 0.0, TWO_PI, (0.0, 0.0)).z
        return math.hypot(z.x - 4 * math.pi, z.y - 4.0)

    with_break, without = error((0.0, math.pi)), error((0.0,))
    assert with_break < 1e-9 * 4 * math.pi
    assert with_break < 0.1 * without


def test_non_finite_field_raises():
    field = expression_field("sqrt(x)")
    with pytest.raises(NonFiniteEvaluation):
        flow(field, 0.0, 5.0, (1.0, -5.0))


def test_flow_rejects_backward_interval():
    with pytest.raises(ValueError):
        flow(LIN1, 1.0, 0.0, (1.0, 0.0))


starts = st.tuples(st.floats(-3, 3), st.floats(-3, 3))
times = st.floats(min_value=0.0, max_value=TWO_PI)


@settings(max_examples=30, deadline=None)
@given(starts, times, times)
def test_flow_semigroup(z0, a, b):
    t1, t2 = sorted((a, b))
    direct = flow(DUFF, 0.0, t2, z0)
    mid = flow(DUFF, 0.0, t1, z0)
    composed = flow(DUFF, t1, t2, mid.z)
    scale = 1.0 + math.hypot(direct.z.x, direct.z.y)
    assert math.hypot(direct.z.x - composed.z.x, direct.z.y - composed.z.y) < 10 * 1e-8 * scale


@settings(max_examples=20, deadline=None)
@given(starts)
def test_reversal_conjugacy_of_poincare_maps(z0):
    for field in (DUFF, builtin_field("cubic_mathieu", delta=0.05)):
        z = poincare_map(field, z0).z
        back = poincare_map(reverse_field(field), (-z.x, z.y)).z
        assert math.hypot(back.x + z0[0], back.y - z0[1]) < 1e-6 * (1 + math.hypot(*z0))


def test_escape_monotone_in_radius():
    field = expression_field("-x^3", label="repulsive cubic")
    prev = -math.inf
    for R in (1e2, 1e3, 1e4, 1e6):
        out = flow(field, 0.0, 10.0, (1.0, 1.0), IntegratorOptions(escape_radius=R))
        assert isinstance(out, Escaped)
        assert out.t_escape >= prev - 1e-9
        assert 0.0 < out.t_escape <= 10.0
        assert math.isfinite(out.last_z.x)
        prev = out.t_escape


@pytest.mark.parametrize("field", [LIN15, DUFF, CUBIC, builtin_field("superlinear_poly", c3=1.0, c5=0.1),
                                   builtin_field("cubic_mathieu", delta=0.05)], ids=lambda f: f.label)
def test_tolerance_convergence(field):
    z0 = (1.2, -0.4)
    coarse = IntegratorOptions(rel_tol=1e-8, abs_tol=1e-10)
    finer = IntegratorOptions(rel_tol=5e-9, abs_tol=1e-10)
    ref = flow(field, 0.0, field.T, z0, IntegratorOptions(rel_tol=1e-13, abs_tol=1e-15)).z
    a = flow(field, 0.0, field.T, z0, coarse).z
    b = flow(field, 0.0, field.T, z0, finer).z
    coarse_error = math.hypot(a.x - ref.x, a.y - ref.y)
    # the change from halving is bounded by the coarse run's own error, up to rounding
    assert math.hypot(a.x - b.x, a.y - b.y) <= 2 * coarse_error + 1e-13


def test_max_step_caps_tiny_amplitudes():
    z = poincare_map(LIN15, (1e-11, 0.0)).z
    assert abs(z.x + 1e-11) < 1e-15
