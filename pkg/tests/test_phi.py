import numpy as np
import pytest
from hypothesis import given, strategies as st

from phibvp import PhiOperator
from phibvp.errors import BracketError, ConfigurationError
from phibvp.phi import monotone_inverse

ys = st.floats(-700.0, 700.0, allow_nan=False)


def _ops():
    return [PhiOperator.identity(), PhiOperator.sinh(), PhiOperator.cubic(), PhiOperator.plaplacian(2.5)]


@given(ys)
def test_sinh_round_trip(y):
    op = PhiOperator.sinh()
    assert op.invert(op.apply(y)) == pytest.approx(y, rel=1e-12, abs=1e-12)


@given(st.floats(1.0001, 6.0), st.floats(-1e3, 1e3, allow_nan=False))
def test_plaplacian_round_trip(p, y):
    op = PhiOperator.plaplacian(p)
    assert op.invert(op.apply(y)) == pytest.approx(y, rel=1e-9, abs=1e-12)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_cubic_round_trip(y):
    op = PhiOperator.cubic()
    assert op.invert(op.apply(y)) == pytest.approx(y, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("op", _ops(), ids=lambda o: o.describe())
def test_strictly_increasing_and_odd(op):
    y = np.linspace(-5, 5, 1001)
    v = op.apply(y)
    assert np.all(np.diff(v) > 0)
    np.testing.assert_allclose(op.apply(-y), -v, rtol=1e-15)
    assert op.apply(0.0) == 0.0


def test_closed_forms():
    assert PhiOperator.plaplacian(3.0).apply(-2.0) == -4.0
    assert PhiOperator.cubic().invert(-8.0) == -2.0
    assert PhiOperator.plaplacian(2.0).describe() == "plaplacian(p=2)"


@pytest.mark.parametrize("kind, p", [("plaplacian", 1.0), ("plaplacian", None), ("sinh", 2.0), ("tanh", None)])
def test_invalid_kinds(kind, p):
    with pytest.raises(ConfigurationError):
        PhiOperator(kind, p)


def test_monotone_inverse_agrees_with_closed_forms():
    v = np.array([-1e6, -3.0, 0.0, 0.5, 1e9])
    np.testing.assert_allclose(monotone_inverse(lambda y: y**3, v), np.cbrt(v), rtol=1e-14, atol=1e-15)
    with pytest.raises(BracketError):
        monotone_inverse(np.tanh, 2.0)
