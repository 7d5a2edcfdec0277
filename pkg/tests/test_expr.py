import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splinenet.expr import CATALOG, ExpressionError, lookup, parse_expression


def test_examples():
    assert parse_expression("x^3+3")(1.0) == 4.0
    assert parse_expression("30*(sin(15*x)+1)")(0.0) == 30.0
    assert parse_expression("16*(x^3+y^3)+3")(np.array([0.5, 0.5])) == 7.0


def test_precedence_and_associativity():
    f = lambda t, v: parse_expression(t)(v)
    assert f("-x^2", 3.0) == -9.0
    assert f("2^3^2", 0.0) == 512.0
    assert f("8/4/2", 0.0) == 1.0
    assert f("2*-x", 1.5) == -3.0
    assert f("2^-1", 0.0) == 0.5
    assert f("1e-2*x + .5", 100.0) == 1.5


def test_functions_and_constants():
    x = np.linspace(0.1, 0.9, 9)
    e = parse_expression("exp(x)*cos(x) - log(x) + sqrt(x)*tanh(x) + pi - e")
    ref = np.exp(x) * np.cos(x) - np.log(x) + np.sqrt(x) * np.tanh(x) + math.pi - math.e
    assert np.allclose(e(x), ref, rtol=1e-15)


def test_dimension_inference():
    assert parse_expression("x+1").n == 1
    assert parse_expression("x*y").n == 2
    assert parse_expression("x", 2).n == 2
    assert parse_expression("3").n == 1


def test_shapes():
    f = parse_expression("x^2")
    assert isinstance(f(2.0), float)
    assert f(np.arange(4.0)).shape == (4,)
    assert f(np.arange(4.0)[:, None]).shape == (4,)
    g = parse_expression("x+y")
    assert g(np.zeros((5, 2))).shape == (5,)
    with pytest.raises(ValueError):
        g(np.zeros((5, 3)))
    assert parse_expression("2")(np.zeros(3)).shape == (3,)


@pytest.mark.parametrize("text, pos", [
    ("x+$2", 2),
    ("sin(x", 5),
    ("foo(x)+1", 0),
    ("x+", 2),
    ("(x))", 3),
    ("y", 0),
])
def test_errors_carry_position(text, pos):
    with pytest.raises(ExpressionError) as info:
        parse_expression(text, 1 if text == "y" else None)
    assert info.value.pos == pos
    head, caret = str(info.value).split("\n")
    assert caret.index("^") == len(head) - len(text) + pos


def test_empty_is_rejected():
    for t in ("", "   "):
        with pytest.raises(ExpressionError):
            parse_expression(t)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3))
def test_matches_python_arithmetic(a, b, x):
    text = f"({a!r})*x^2 - ({b!r})/x + sin({a!r}*x)"
    assert parse_expression(text)(x) == pytest.approx(a * x**2 - b / x + math.sin(a * x), rel=1e-12, abs=1e-12)


def test_catalog_entries_parse_and_lookup():
    for name, entry in CATALOG.items():
        assert parse_expression(entry.expression).n == entry.n
        assert lookup(name) is entry
        assert lookup(entry.expression.replace("*", " * ")) is entry
    assert lookup("x^5") is None
    assert CATALOG["steep-cubic"].gamma3 == 0.05
    assert CATALOG["sin20-tanh"].kind == "tanh"
