import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maggeo.errors import EvalError, ParseError
from maggeo.expr import parse_expression


class TestParsing:
    def test_pythagorean_identity(self):
        expr = parse_expression("sin(x1)^2 + cos(x1)^2")
        assert expr([0.7]) == pytest.approx(1.0, abs=1e-15)

    def test_reciprocal_square(self):
        assert parse_expression("1/(x2*x2)")([0.0, 2.0]) == pytest.approx(0.25)

    def test_syntax_error_offset(self):
        with pytest.raises(ParseError) as err:
            parse_expression("sin(")
        assert err.value.offset == 4

    def test_unknown_identifier(self):
        with pytest.raises(ParseError):
            parse_expression("foo + 1")

    def test_precedence(self):
        assert parse_expression("2+3*4")([]) == 14.0
        assert parse_expression("2^3^2")([]) == 512.0  # right-associative
        assert parse_expression("-2^2")([]) == -4.0
        assert parse_expression("(2+3)*4")([]) == 20.0
        assert parse_expression("2*-3")([]) == -6.0

    def test_parameter_k(self):
        expr = parse_expression("k * x1")
        assert expr([3.0], k=0.5) == 1.5
        with pytest.raises(EvalError):
            expr([3.0])


class TestEvaluationErrors:
    def test_division_by_zero(self):
        with pytest.raises(EvalError):
            parse_expression("1/x1")([0.0])

    def test_log_domain(self):
        with pytest.raises(EvalError):
            parse_expression("log(x1)")([-1.0])

    def test_sqrt_domain(self):
        with pytest.raises(EvalError):
            parse_expression("sqrt(x1)")([-1.0])

    def test_never_returns_nan(self):
        for text, args in (("0^(-1)", []), ("(-2)^0.5", [])):
            with pytest.raises(EvalError):
                parse_expression(text)(args)


class TestDifferentiation:
    def test_polynomial(self):
        d = parse_expression("x1^3 + 2*x1").diff("x1")
        assert d([2.0]) == pytest.approx(14.0)

    def test_chain_rule(self):
        d = parse_expression("sin(x1^2)").diff("x1")
        x = 0.8
        assert d([x]) == pytest.approx(2 * x * math.cos(x * x), abs=1e-14)

    def test_quotient_and_log(self):
        d = parse_expression("log(x1)/x1").diff("x1")
        x = 1.7
        assert d([x]) == pytest.approx((1 - math.log(x)) / x ** 2, abs=1e-14)

    def test_fd_cross_check(self):
        expr = parse_expression("exp(x1) * cos(2*x2) + sqrt(x1 + 3)")
        for var, idx in (("x1", 0), ("x2", 1)):
            d = expr.diff(var)
            x = [0.4, 1.1]
            h = 1e-7
            xp = list(x); xp[idx] += h
            xm = list(x); xm[idx] -= h
            fd = (expr(xp) - expr(xm)) / (2 * h)
            assert d(x) == pytest.approx(fd, rel=1e-6)


# reference interpreter oracle: evaluate through python's own eval
def _python_eval(text, x1, x2):
    py = text.replace("^", "**")
    env = {"x1": x1, "x2": x2, "sin": math.sin, "cos": math.cos, "tan": math.tan,
           "exp": math.exp, "log": math.log, "sqrt": math.sqrt, "abs": abs,
           "sinh": math.sinh, "cosh": math.cosh, "__builtins__": {}}
    return eval(py, env)  # noqa: S307 - test oracle on generated input


@st.composite
def expression_trees(draw, depth=0):
    if depth > 3 or draw(st.booleans()):
        leaf = draw(st.sampled_from(["x1", "x2", "num"]))
        if leaf == "num":
            return repr(draw(st.floats(min_value=0.1, max_value=4.0,
                                       allow_nan=False, allow_infinity=False)))
        return leaf
    kind = draw(st.sampled_from(["+", "-", "*", "/", "fn", "pow"]))
    a = draw(expression_trees(depth=depth + 1))
    if kind == "fn":
        fn = draw(st.sampled_from(["sin", "cos", "exp", "sinh", "cosh"]))
        return f"{fn}({a})"
    if kind == "pow":
        return f"({a})^{draw(st.integers(min_value=1, max_value=3))}"
    b = draw(expression_trees(depth=depth + 1))
    return f"({a} {kind} {b})"


class TestOracle:
    @given(expression_trees(), st.floats(min_value=-2, max_value=2),
           st.floats(min_value=-2, max_value=2))
    @settings(max_examples=200, deadline=None)
    def test_matches_reference_interpreter(self, text, x1, x2):
        try:
            expected = _python_eval(text, x1, x2)
        except (ZeroDivisionError, OverflowError, ValueError):
            return
        if not np.isfinite(expected):
            return
        try:
            got = parse_expression(text)([x1, x2])
        except EvalError:
            return
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)
