import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from projgeo.errors import EvalDomainError, ExprSyntaxError, UnknownIdentifierError
from projgeo.expressions import eval_jet2, eval_value, max_param_index, parse


def test_parse_pow():
    assert parse("y0^2") == ("pow", ("param", 0), 2)


def test_parse_product_of_calls():
    ast = parse("sin(y0)*cos(y1)")
    assert ast == ("mul", ("call", "sin", ("param", 0)), ("call", "cos", ("param", 1)))


def test_parse_error_offset():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("y0 +")
    assert exc.value.offset == 4


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse("tan(y0)")


def test_precedence_unary_minus_vs_pow():
    # -y0^2 means -(y0^2)
    assert eval_value(parse("-y0^2"), np.array([3.0])) == -9.0


def test_negative_integer_exponent():
    j = eval_jet2(parse("y0^(-1)"), np.array([2.0]))
    assert j.value == 0.5
    assert j.grad[0] == -0.25
    assert j.hess[0, 0] == 0.25


def test_jet_square():
    j = eval_jet2(parse("y0^2"), np.array([3.0]))
    assert j.value == 9.0 and j.grad[0] == 6.0 and j.hess[0, 0] == 2.0


def test_jet_sin_at_zero():
    j = eval_jet2(parse("sin(y0)"), np.array([0.0]))
    assert j.value == 0.0 and j.grad[0] == 1.0 and j.hess[0, 0] == 0.0


def test_jet_product_two_params():
    j = eval_jet2(parse("y0*y1"), np.array([2.0, 5.0]))
    assert j.value == 10.0
    assert np.allclose(j.grad, [5.0, 2.0])
    assert np.allclose(j.hess, [[0.0, 1.0], [1.0, 0.0]])


SYMBOLIC_CASES = [
    ("sin(y0)*cos(y1) + y0^3", [0.7, -0.4]),
    ("exp(y0*y1) - y1^2/(1 + y0^2)", [0.3, 1.2]),
    ("log(2 + y0) * sqrt(3 + y1)", [0.5, 0.25]),
    ("(y0 - y1)^4 + y0/(y1 + 2)", [1.1, -0.3]),
    ("cos(y0^2) - sin(y1)/(2 + cos(y0))", [0.9, 0.2]),
]


@pytest.mark.parametrize("src,point", SYMBOLIC_CASES)
def test_jets_match_sympy(src, point):
    y0, y1 = sympy.symbols("y0 y1")
    expr = sympy.sympify(src.replace("^", "**"))
    subs = {y0: point[0], y1: point[1]}
    jet = eval_jet2(parse(src), np.array(point, dtype=float))
    assert jet.value == pytest.approx(float(expr.subs(subs)), rel=1e-12)
    for i, s in enumerate((y0, y1)):
        assert jet.grad[i] == pytest.approx(float(sympy.diff(expr, s).subs(subs)), rel=1e-10)
        for jdx, t in enumerate((y0, y1)):
            want = float(sympy.diff(expr, s, t).subs(subs))
            assert jet.hess[i, jdx] == pytest.approx(want, rel=1e-10, abs=1e-12)


def _random_ast(draw, depth: int):
    if depth == 0:
        return draw(
            st.one_of(
                st.builds(lambda i: ("param", i), st.integers(0, 1)),
                st.builds(lambda c: ("const", c), st.floats(-2, 2).map(lambda v: round(v, 3))),
            )
        )
    op = draw(st.sampled_from(["add", "sub", "mul", "neg", "sin", "cos", "pow"]))
    if op in ("add", "sub", "mul"):
        return (op, _random_ast(draw, depth - 1), _random_ast(draw, depth - 1))
    if op == "neg":
        return (op, _random_ast(draw, depth - 1))
    if op == "pow":
        return (op, _random_ast(draw, depth - 1), draw(st.integers(1, 3)))
    return ("call", op, _random_ast(draw, depth - 1))


@st.composite
def random_asts(draw):
    return _random_ast(draw, draw(st.integers(1, 6)))


@settings(max_examples=120, deadline=None)
@given(ast=random_asts(), y0=st.floats(-1.5, 1.5), y1=st.floats(-1.5, 1.5))
def test_jets_match_finite_differences(ast, y0, y1):
    y = np.array([y0, y1])
    try:
        jet = eval_jet2(ast, y)
    except EvalDomainError:
        return
    if not np.all(np.isfinite(jet.value)) or abs(jet.value) > 1e6:
        return
    h = 1e-5
    scale = 1.0 + abs(float(jet.value))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (eval_value(ast, y + e) - eval_value(ast, y - e)) / (2 * h)
        gscale = scale + abs(jet.grad[i])
        assert abs(jet.grad[i] - fd) <= 1e-6 * gscale
        for j in range(i, 2):
            e2 = np.zeros(2)
            e2[j] = h
            mixed = (
                eval_value(ast, y + e + e2)
                - eval_value(ast, y + e - e2)
                - eval_value(ast, y - e + e2)
                + eval_value(ast, y - e - e2)
            ) / (4 * h * h)
            hscale = scale + abs(jet.hess[i, j])
            assert abs(jet.hess[i, j] - mixed) <= 2e-5 * hscale


def test_hessian_symmetric_random(rng):
    for _ in range(50):
        src = "sin(y0*y1) + exp(y0 - y1^2) + (y0 + 2)^3/(3 + y1^2)"
        y = rng.uniform(-1, 1, size=2)
        jet = eval_jet2(parse(src), y)
        assert np.max(np.abs(jet.hess - jet.hess.T)) <= 1e-14


def test_abs_kink_raises():
    with pytest.raises(EvalDomainError):
        eval_jet2(parse("abs(y0)"), np.array([0.0]))


def test_abs_away_from_kink():
    jet = eval_jet2(parse("abs(y0)"), np.array([-2.0]))
    assert jet.value == 2.0 and jet.grad[0] == -1.0 and jet.hess[0, 0] == 0.0
    # value-only evaluation at the kink is fine
    assert eval_value(parse("abs(y0)"), np.array([0.0])) == 0.0


def test_domain_errors():
    with pytest.raises(EvalDomainError):
        eval_jet2(parse("log(y0)"), np.array([-1.0]))
    with pytest.raises(EvalDomainError):
        eval_jet2(parse("sqrt(y0)"), np.array([-0.5]))
    with pytest.raises(EvalDomainError):
        eval_jet2(parse("1/y0"), np.array([0.0]))
    with pytest.raises(EvalDomainError):
        eval_jet2(parse("y0^(-2)"), np.array([0.0]))


def test_batched_evaluation_matches_scalar():
    ast = parse("sin(y0)*y1 + y0^2")
    Y = np.array([[0.1, 2.0], [1.3, -0.7], [0.0, 0.0]])
    jets = eval_jet2(ast, Y)
    for k in range(3):
        jk = eval_jet2(ast, Y[k])
        assert np.allclose(jets.value[k], jk.value)
        assert np.allclose(jets.grad[k], jk.grad)
        assert np.allclose(jets.hess[k], jk.hess)


def test_max_param_index():
    assert max_param_index(parse("sin(y2) + y0")) == 2
    assert max_param_index(parse("3.5")) == -1


def test_pow_zero_is_constant_one():
    jet = eval_jet2(parse("y0^0"), np.array([4.0]))
    assert jet.value == 1.0 and jet.grad[0] == 0.0
