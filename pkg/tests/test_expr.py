import math
import pickle

import pytest
from hypothesis import given, settings, strategies as st

from rotor.errors import ParseError
from rotor.expr import (
    BinOp, Call, ExprFunction, ExpressionSyntaxError, Neg, Num, UnknownIdentifier, Var,
    compile_expression, eval_expression, parse_expression, pretty, variables_of,
)


def ev(src, t=0.0, x=0.0, y=0.0):
    return eval_expression(parse_expression(src), t, x, y)


def test_power_node():
    assert parse_expression("x^3") == BinOp("^", Var("x"), Num(3.0))


def test_unary_minus_binds_tighter_than_product():
    e = parse_expression("-0.05*cos(t)")
    assert e == BinOp("*", Neg(Num(0.05)), Call("cos", (Var("t"),)))
    assert ev("-0.05*cos(t)", t=0.0) == -0.05


def test_power_binds_tighter_than_unary_minus():
    assert ev("-2^2") == -4.0
    assert ev("(-2)^2") == 4.0


def test_power_is_right_associative():
    assert ev("2^3^2") == 512.0


def test_left_associativity():
    assert ev("8/4/2") == 1.0
    assert ev("8-4-2") == 2.0


def test_examples():
    assert ev("x^3", x=2.0) == 8.0
    for t in (0.0, 0.3, 2.0, -7.5, 1e3):
        assert abs(ev("sin(t)^2+cos(t)^2", t=t) - 1.0) <= 1e-15
    assert ev("x/0", x=1.0) == math.inf
    assert ev("-x/0", x=1.0) == -math.inf
    assert math.isnan(ev("0/0"))
    assert math.isnan(ev("sqrt(x)", x=-1.0))
    assert ev("exp(x)", x=1e4) == math.inf


def test_functions_and_constants():
    assert ev("min(x, y) + max(x, y)", x=2.0, y=-1.0) == 1.0
    assert ev("sign(x) * abs(x)", x=-3.0) == -3.0
    assert ev("pi") == math.pi
    assert ev("e") == math.e


def test_syntax_error_reports_byte_offset():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression("x + * 2")
    assert info.value.offset == 4
    # offsets count bytes, not characters
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression("x + é")
    assert info.value.offset == 4


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        parse_expression("x + z")
    assert info.value.name == "z"
    assert info.value.offset == 4


@pytest.mark.parametrize("src", ["2x", "2 x", "x y", "sin t", "", "   ", "(x", "x)", "min(x)",
                                 "sin(x, y)", "x +", "^x", "1..2"])
def test_rejected(src):
    with pytest.raises(ParseError):
        parse_expression(src)


def test_invalid_utf8_bytes():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression(b"x + \xff")
    assert eval_expression(parse_expression(b"x*2"), 0, 3.0, 0) == 6.0


def test_deep_nesting_is_an_error_not_a_crash():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("(" * 500 + "x" + ")" * 500)
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("-" * 500 + "x")


def test_compile_rejects_free_variables():
    with pytest.raises(ValueError):
        compile_expression(parse_expression("x + y"), ("t", "x"))


def test_expr_function_params_and_pickle():
    f = ExprFunction("omega^2*x", args=("t", "x"), params={"omega": 1.5})
    assert f(0.0, 2.0) == 4.5
    g = pickle.loads(pickle.dumps(f))
    assert g(0.0, 2.0) == 4.5
    # params are substituted by whole word only
    h = ExprFunction("eps*x + exp(x)", args=("t", "x"), params={"eps": 2.0})
    assert h(0.0, 0.0) == 1.0


def test_variables_of():
    assert variables_of(parse_expression("sin(t)*x + 3")) == {"t", "x"}


# --- properties ----------------------------------------------------------------

leaves = st.one_of(
    st.builds(Num, st.floats(min_value=0.0, max_value=1e6, allow_nan=False)),
    st.sampled_from([Var("t"), Var("x"), Var("y")]),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(lambda n, a: Call(n, (a,)), st.sampled_from(["sin", "cos", "exp", "abs", "sqrt", "sign"]),
                  children),
        st.builds(lambda n, a, b: Call(n, (a, b)), st.sampled_from(["min", "max"]), children, children),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)
values = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_pretty_round_trip_is_idempotent(e):
    s = pretty(e)
    assert pretty(parse_expression(s)) == s


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_pretty_preserves_structure(e):
    assert parse_expression(pretty(e)) == e


def _same(a, b):
    return (math.isnan(a) and math.isnan(b)) or a == b


@settings(max_examples=300, deadline=None)
@given(exprs, values, values, values)
def test_evaluation_never_crashes_and_compiled_agrees(e, t, x, y):
    v = eval_expression(e, t, x, y)
    assert isinstance(v, float)
    assert _same(compile_expression(e)(t, x, y), v)


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=40))
def test_random_bytes_never_crash_the_parser(data):
    try:
        parse_expression(data)
    except ParseError:
        pass


@settings(max_examples=500, deadline=None)
@given(st.text(alphabet="txy0123456789.+-*/^(), eEsincoxpqrtabmg", max_size=30))
def test_random_text_never_crashes_the_parser(src):
    try:
        e = parse_expression(src)
    except ParseError:
        return
    eval_expression(e, 0.5, -1.5, 2.0)
