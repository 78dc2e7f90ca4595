import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phibvp import expr as ex
from phibvp.errors import ExprDomainError, ExprSyntaxError


def value(src, **b):
    return ex.evaluate(ex.parse(src, tuple(b) or ("t",)), **b)


@pytest.mark.parametrize(
    "src, expected",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2 ^ 3 ^ 2", 512.0),  # right associative
        ("-2 ^ 2", -4.0),  # unary minus binds looser than ^
        ("2 ^ -1", 0.5),
        ("8 / 4 / 2", 1.0),
        ("pi", math.pi),
        ("max(1, 2) + min(3, -4)", -2.0),
        ("pow(2, 10)", 1024.0),
        ("cbrt(-27)", -3.0),
        ("atan(1) * 4", math.pi),
        ("1e-3 * 1000", 1.0),
    ],
)
def test_constant_arithmetic(src, expected):
    assert ex.constant_value(src) == pytest.approx(expected, rel=1e-15)


def test_vectorized_evaluation_matches_numpy():
    t = np.linspace(0.1, 0.9, 7)
    got = value("sqrt(t*(1-t)) + sinh(t)/exp(t)", t=t)
    np.testing.assert_allclose(got, np.sqrt(t * (1 - t)) + np.sinh(t) / np.exp(t), rtol=1e-15)


def test_indicator_is_closed_on_both_sides():
    t = np.array([-1.5, -1.0, -0.5, 0.0, 0.5])
    np.testing.assert_array_equal(value("indicator(-1, 0)", t=t), [0, 1, 1, 1, 0])
    np.testing.assert_array_equal(ex.evaluate(ex.parse("indicator(z, 0, 1)", ("z",)), z=np.array([-1, 0.5, 2])), [0, 1, 0])


def test_two_argument_indicator_requires_t():
    with pytest.raises(ExprSyntaxError):
        ex.parse("indicator(0, 1)", ("z",))


@pytest.mark.parametrize(
    "src, offset",
    [("q +", 2), ("q + 1", 0), ("t +", 2), ("sin(t", 4), ("1 $ 2", 2), ("sin(t, t)", 0), ("", 0), ("(1", 1)],
)
def test_syntax_errors_report_offsets(src, offset):
    with pytest.raises(ExprSyntaxError) as info:
        ex.parse(src, ("t",))
    assert info.value.position == offset


def test_unknown_variable_is_rejected():
    with pytest.raises(ExprSyntaxError, match="y"):
        ex.parse("t + y", ("t",))


@pytest.mark.parametrize("src", ["sqrt(-1)", "log(0)", "1/0", "(-8)^0.5"])
def test_domain_errors_name_the_subexpression(src):
    with pytest.raises(ExprDomainError) as info:
        ex.evaluate(ex.parse(src, ()))
    assert info.value.subexpression


def test_substitute_and_variables():
    e = ex.parse("abs(z) + z^2", ("z",))
    s = ex.substitute(e, "z", ex.Var("R"))
    assert ex.variables(s) == {"R"}
    assert ex.evaluate(s, R=-3.0) == 12.0


finite = st.floats(-50, 50, allow_nan=False).map(lambda v: round(v, 6))


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(finite.map(ex.Num), st.just(ex.Var("t"))))
    kind = draw(st.sampled_from(["+", "-", "*", "neg", "sin", "max"]))
    a = draw(expressions(depth=depth - 1))
    if kind == "neg":
        return ex.Neg(a)
    if kind == "sin":
        return ex.Call("sin", (a,))
    b = draw(expressions(depth=depth - 1))
    if kind == "max":
        return ex.Call("max", (a, b))
    return ex.BinOp(kind, a, b)


@given(expressions(), st.floats(-3, 3))
def test_to_source_round_trip(e, t):
    src = ex.to_source(e)
    again = ex.parse(src, ("t",))
    # negative literals come back as negations, so compare text and values
    assert ex.to_source(again) == src
    assert ex.evaluate(again, t=t) == ex.evaluate(e, t=t)
