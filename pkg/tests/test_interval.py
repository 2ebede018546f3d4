from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reachverify.interval import Box, Interval, IntervalError, IntervalMatrix

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def _exact(iv):
    return Fraction(iv.lo), Fraction(iv.hi)


@given(intervals(), intervals())
def test_add_sub_mul_enclose_exact_endpoints(a, b):
    # endpoint results computed in exact rational arithmetic
    for op, f in [(lambda x, y: x + y, lambda x, y: x + y), (lambda x, y: x - y, lambda x, y: x - y),
                  (lambda x, y: x * y, lambda x, y: x * y)]:
        r = op(a, b)
        lo, hi = _exact(r)
        for x in _exact(a):
            for y in _exact(b):
                assert lo <= f(x, y) <= hi


@given(intervals(), intervals())
def test_outward_strictly_widens(a, b):
    r = a + b
    assert r.lo < a.lo + b.lo or a.lo + b.lo == float("-inf")
    assert r.hi > a.hi + b.hi


@given(intervals(), st.floats(0.5, 100))
def test_division_by_positive(a, d):
    r = a / Interval(d, 2 * d)
    for x in (a.lo, a.hi):
        for y in (d, 2 * d):
            assert r.lo <= Fraction(x) / Fraction(y) <= r.hi


def test_empty_and_nonfinite_rejected():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    with pytest.raises(IntervalError):
        Interval(0.0, float("inf"))


def test_box_geometry():
    b = Box([0.0, 1.0], [3.0, 5.0])
    assert b.diameter == pytest.approx(5.0)
    assert b.center.tolist() == [1.5, 3.0]
    assert b.contains(Box([1.0, 2.0], [2.0, 4.0]))
    assert not b.contains(Box([1.0, 2.0], [4.0, 4.0]))
    assert b.hull(Box([-1.0, 0.0], [0.0, 0.0])).lo.tolist() == [-1.0, 0.0]
    assert Box.around([0.0], 0.5).hi[0] == pytest.approx(0.5)


def test_interval_matrix_sample_inside(rng):
    M = IntervalMatrix([[0.0, -1.0], [2.0, 3.0]], [[1.0, 0.0], [2.5, 3.0]])
    for A in M.sample(rng, 100):
        assert M.contains(A)
    with pytest.raises(ValueError):
        IntervalMatrix([[1.0]], [[0.0]])
