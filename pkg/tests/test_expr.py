import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pnvcauchy.errors import ParseError
from pnvcauchy.expr import Expr, evaluate, parse_expression, to_string


@pytest.mark.parametrize("text, value", [
    ("1 + 2*3", 7.0),
    ("2^3^2", 512.0),          # right associative
    ("-2^2", -4.0),            # power binds tighter than unary minus
    ("(1+2)*3", 9.0),
    ("8/4/2", 1.0),
    ("sqrt(16) + exp(0) + log(1)", 5.0),
    ("2*pi", 2 * math.pi),
    ("tanh(0) - cos(0)", -1.0),
    ("1e-3*1000", 1.0),
])
def test_constant_values(text, value):
    assert Expr(text)() == pytest.approx(value)


def test_variables_and_grid_evaluation():
    e = Expr("t*x1 + sin(x2)")
    assert e.variables == {"t", "x1", "x2"}
    assert e.depends_on_t and not e.is_constant
    x = np.linspace(0, 1, 5)
    y = np.zeros(5)
    assert np.allclose(e(2.0, (x, y)), 2 * x)


def test_on_grid_broadcasts_constants():
    coords = np.meshgrid(np.arange(3.0), np.arange(4.0), indexing="ij")
    assert Expr("3").on_grid(coords).shape == (3, 4)


@pytest.mark.parametrize("text, offset", [("1 +", 3), ("(1 + 2", 6), ("sin 1", 4), ("1 $ 2", 2), ("", 0)])
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse_expression(text)
    assert info.value.offset == offset


def test_parse_error_offset_is_in_bytes():
    with pytest.raises(ParseError) as info:
        parse_expression("σ + 1")
    assert info.value.offset == 0
    with pytest.raises(ParseError) as info:
        parse_expression("1 + σ")
    assert info.value.offset == 4


def test_unknown_names_rejected():
    with pytest.raises(ParseError):
        parse_expression("foo(1)")
    with pytest.raises(ParseError):
        parse_expression("y + 1")


def test_to_string_fully_parenthesized():
    assert to_string(parse_expression("1 + 2*x1")) == "(1.0 + (2.0 * x1))"


_atoms = st.one_of(st.integers(0, 9).map(str), st.sampled_from(["x1", "x2", "t", "pi"]))


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda a: f"{a[0]} {a[1]} {a[2]}"),
        children.map(lambda a: f"({a})"),
        children.map(lambda a: f"sin({a})"),
        children.map(lambda a: f"-{a}"),
    )


@given(st.recursive(_atoms, _combine, max_leaves=8))
def test_printing_roundtrip(text):
    tree = parse_expression(text)
    again = parse_expression(to_string(tree))
    env = {"t": 0.3, "x1": 1.1, "x2": -0.7}
    assert evaluate(again, env) == pytest.approx(evaluate(tree, env), rel=1e-12, abs=1e-12)
