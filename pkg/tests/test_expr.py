import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reachverify import expr as ex
from reachverify.circuits import CARDIAC_FIELD
from reachverify.expr import (
    Const, DomainError, InputVar, ParseError, StateVar, Valuation, differentiate, eval_interval, eval_point,
    jacobian, parse_expr, to_string,
)
from reachverify.interval import Box, Interval

F1, F2 = (parse_expr(s, ["x1", "x2"], ["u"]) for s in CARDIAC_FIELD)


def test_parse_variable():
    assert parse_expr("x1", ["x1", "x2"]) == StateVar(0)
    assert parse_expr("u", ["x"], ["u"]) == InputVar(0)


def test_exp_log_roundtrip_value():
    assert eval_point(parse_expr("exp(log(2))"), []) == pytest.approx(2.0, rel=1e-15)


def test_parse_errors():
    for bad in ["x1 +", "(x1", "foo(x1)", "x1 ** 2", "x1 ^ 1.5", "y"]:
        with pytest.raises(ParseError):
            parse_expr(bad, ["x1"])


def test_cardiac_point_values():
    # f2 at (0.5, 0.24): 0.5 - 0.48
    assert eval_point(F2, Valuation([0.5, 0.24], [0.1])) == pytest.approx(0.02, abs=1e-15)
    x1, x2, u = 0.5, 0.24, 0.1
    hand = -x1 * (x1 * x1 + 0.9 * x1 + 0.9) + 2 * x2 * u + 1
    assert eval_point(F1, [x1, x2], [u]) == pytest.approx(hand, rel=1e-14)


def test_cardiac_derivative_symbolic_matches_closed_form(rng):
    d = differentiate(F1, StateVar(0))
    for x1 in rng.uniform(-2, 2, 100):
        want = -(3 * x1 * x1 + 1.8 * x1 + 0.9)
        assert eval_point(d, [x1, 0.3], [0.2]) == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_cardiac_derivative_vs_finite_differences(rng):
    d = differentiate(F1, StateVar(0))
    for _ in range(100):
        x1, x2, u = rng.uniform(-2, 2), rng.uniform(-1, 1), rng.uniform(0, 1)
        h = 1e-6 * max(1.0, abs(x1))
        fd = (eval_point(F1, [x1 + h, x2], [u]) - eval_point(F1, [x1 - h, x2], [u])) / (2 * h)
        exact = eval_point(d, [x1, x2], [u])
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_simple_derivatives():
    x1, x2, u = StateVar(0), StateVar(1), InputVar(0)
    assert differentiate(parse_expr("x1*x2", ["x1", "x2"]), x2) == x1
    d = differentiate(parse_expr("2*x2*u", ["x1", "x2"], ["u"]), u)
    for p in [(0.3, -1.2), (1.0, 4.0)]:
        assert eval_point(d, p, [7.0]) == pytest.approx(2 * p[1])


def test_softplus_derivative_is_a_tight_logistic():
    x = StateVar(0)
    d = differentiate(parse_expr("log(1 + exp(3*x - 1))", ["x"]), x)
    for v in (-4.0, -0.2, 0.0, 0.7, 5.0):
        assert eval_point(d, [v]) == pytest.approx(3.0 / (1.0 + math.exp(1.0 - 3.0 * v)), rel=1e-14)
    # 3 * sigmoid is monotone, so the enclosure over a box is its endpoint values (up to rounding)
    iv = eval_interval(d, Box([-0.5], [1.5]))
    lo, hi = 3.0 / (1.0 + math.exp(2.5)), 3.0 / (1.0 + math.exp(-3.5))
    assert iv.lo <= lo and iv.hi >= hi
    assert iv.lo == pytest.approx(lo, rel=1e-12) and iv.hi == pytest.approx(hi, rel=1e-12)
    # the same fraction written by hand is not rewritten
    other = differentiate(parse_expr("log(2 + exp(x))", ["x"]), x)
    assert "exp(-" not in to_string(other)


def test_jacobian_shape():
    J = jacobian([F1, F2], 2)
    assert len(J) == 2 and all(len(r) == 2 for r in J)
    assert eval_point(J[1][0], [0, 0], [0]) == 1.0
    assert eval_point(J[1][1], [0, 0], [0]) == -2.0
    Ju = jacobian([F1, F2], 2, 1, wrt="input")
    assert eval_point(Ju[0][0], [0, 0.25], [0]) == pytest.approx(0.5)


def test_interval_cardiac_partial():
    d = differentiate(F1, StateVar(0))
    iv = eval_interval(d, [Interval(0.4, 0.6), Interval(0.14, 0.34)], [Interval(0.1, 0.2)])
    assert iv.lo == pytest.approx(-3.06, abs=1e-9) and iv.hi == pytest.approx(-2.1, abs=1e-9)
    assert iv.lo <= -3.06 and iv.hi >= -2.1


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_point(parse_expr("log(x)", ["x"]), [0.0])
    with pytest.raises(DomainError):
        eval_point(parse_expr("1/x", ["x"]), [0.0])
    with pytest.raises(DomainError):
        eval_interval(parse_expr("log(x)", ["x"]), [Interval(-1.0, 1.0)])
    with pytest.raises(DomainError):
        eval_interval(parse_expr("1/x", ["x"]), [Interval(-1.0, 1.0)])


def test_to_string_roundtrip_examples():
    names = ["x1", "x2"]
    for s in CARDIAC_FIELD + ("-(x1 - x2)^3 / (1 + exp(-x1))", "log(1 + x1^2) - -x2"):
        e = parse_expr(s, names, ["u"])
        again = parse_expr(to_string(e, names, ["u"]), names, ["u"])
        for p in [(0.3, -0.7), (1.1, 2.0)]:
            assert eval_point(again, p, [0.4]) == pytest.approx(eval_point(e, p, [0.4]), rel=1e-14)


# ---------------------------------------------------------------------------
# property tests over random expressions

_leaf = st.one_of(
    st.sampled_from([StateVar(0), StateVar(1)]),
    st.floats(-3, 3, allow_nan=False).map(Const),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda p: p[0] + p[1]),
        st.tuples(children, children).map(lambda p: p[0] - p[1]),
        st.tuples(children, children).map(lambda p: p[0] * p[1]),
        st.tuples(children, st.integers(0, 3)).map(lambda p: p[0] ** p[1]),
        children.map(lambda c: ex.exp(c * 0.3)),
        children.map(lambda c: ex.log(1.0 + c * c)),
        children.map(lambda c: c / (2.0 + c * c)),
        children.map(lambda c: -c),
    )


exprs = st.recursive(_leaf, _extend, max_leaves=8)
boxes = st.tuples(
    st.floats(-2, 2), st.floats(0, 1.5), st.floats(-2, 2), st.floats(0, 1.5)
).map(lambda t: Box([t[0], t[2]], [t[0] + t[1], t[2] + t[3]]))


@given(exprs, boxes, st.integers(0, 2**31))
def test_interval_soundness(e, box, seed):
    rng = np.random.default_rng(seed)
    iv = eval_interval(e, box)
    pts = rng.uniform(box.lo, box.hi, size=(1000, 2))
    pts = np.vstack([pts, box.lo, box.hi, [box.lo[0], box.hi[1]]])
    for p in pts:
        v = eval_point(e, p)
        assert iv.lo <= v <= iv.hi


@given(exprs, boxes, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_interval_monotone_in_box(e, box, a, b):
    # a sub-box never gets a wider enclosure
    lo = box.lo + a * box.widths * 0.5
    hi = box.hi - b * box.widths * 0.5
    inner = Box(lo, np.maximum(lo, hi))
    big, small = eval_interval(e, box), eval_interval(e, inner)
    assert big.lo <= small.lo and small.hi <= big.hi


@given(exprs, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_derivative_matches_finite_differences(e, x, y):
    for k in range(2):
        d = differentiate(e, StateVar(k))
        exact = eval_point(d, [x, y])
        h = 1e-5
        p, m = [x, y], [x, y]
        p[k] += h
        m[k] -= h
        # Richardson-extrapolated central difference, O(h^4)
        fd1 = (eval_point(e, p) - eval_point(e, m)) / (2 * h)
        p2, m2 = [x, y], [x, y]
        p2[k] += 2 * h
        m2[k] -= 2 * h
        fd2 = (eval_point(e, p2) - eval_point(e, m2)) / (4 * h)
        fd = (4 * fd1 - fd2) / 3
        scale = max(1.0, abs(exact), max(abs(eval_point(e, q)) for q in (p2, m2)))
        assert abs(fd - exact) <= 1e-5 * scale


@given(exprs)
def test_print_parse_roundtrip(e):
    names = ["a", "b"]
    back = parse_expr(to_string(e, names), names)
    for p in [(0.25, -0.5), (-1.0, 1.25)]:
        v, w = eval_point(e, p), eval_point(back, p)
        assert w == pytest.approx(v, rel=1e-12, abs=1e-12)


@given(exprs)
def test_structural_equality_is_consistent_with_hash(e):
    names = ["a", "b"]
    back = parse_expr(to_string(e, names), names)
    if back == e:
        assert hash(back) == hash(e)
