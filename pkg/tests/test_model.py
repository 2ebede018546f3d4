import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reachverify import expr as ex
from reachverify.circuits import build_inverter_hybrid, ramp_input, sig_input
from reachverify.interval import Box
from reachverify.model import (
    ContinuousMode, HybridAutomaton, InputSignal, InputSignalAutomaton, ModelError, Overlap, Predicate, Transition,
    VerificationProblem, check_unsafe_intersection, classify_boxes, compose, parse_predicate, single_mode,
)
from reachverify.sim import point_simulate

UNSAFE = [parse_predicate("Vout > 1.32", ["Vout"])]


def test_predicate_parsing():
    p = parse_predicate("2*x - y >= 1", ["x", "y"])
    assert p.holds([1.0, 1.0]) and not p.holds([0.0, 0.0])
    q = parse_predicate("x < 3", ["x"])
    assert q.strict and not q.holds([3.0]) and q.holds([2.99])
    with pytest.raises(Exception):
        parse_predicate("x*y <= 1", ["x", "y"])


def test_compose_mode_counts():
    inv = build_inverter_hybrid()
    assert len(inv.modes) == 7
    assert len(compose(inv, ramp_input()).modes) == 28
    assert len(compose(inv, sig_input()).modes) == 14


def test_compose_trivial():
    plant = single_mode([ex.parse_expr("-x + u", ["x"], ["u"])], ["x"], ["u"])
    one = HybridAutomaton([ContinuousMode("c", [ex.ZERO])], [], ["u"], [], name="const")
    c = compose(plant, InputSignalAutomaton(one, [0.5], [0]))
    assert len(c.modes) == 1 and c.transitions == [] and c.n == 2 and c.m == 0


def test_compose_dimension_mismatch():
    plant = single_mode([ex.parse_expr("-x", ["x"])], ["x"], [])
    with pytest.raises(ModelError):
        compose(plant, ramp_input())


def test_unsafe_examples():
    assert check_unsafe_intersection(Box([1.0], [1.1]), UNSAFE) == Overlap.DISJOINT
    assert check_unsafe_intersection(Box([1.4], [1.5]), UNSAFE) == Overlap.CONTAINED
    assert check_unsafe_intersection(Box([1.3], [1.4]), UNSAFE) == Overlap.OVERLAPPING


def test_unsafe_strict_boundary():
    # touching a strict inequality at one point is still disjoint
    assert check_unsafe_intersection(Box([1.0], [1.32]), UNSAFE) == Overlap.DISJOINT
    weak = [parse_predicate("Vout >= 1.32", ["Vout"])]
    assert check_unsafe_intersection(Box([1.0], [1.32]), weak) == Overlap.OVERLAPPING


boxes2 = st.tuples(st.floats(-3, 3), st.floats(0, 2), st.floats(-3, 3), st.floats(0, 2))
preds2 = st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.booleans()), min_size=1,
                  max_size=3)


@given(boxes2, preds2, st.integers(0, 2**31))
def test_unsafe_trichotomy_against_sampling(b, ps, seed):
    box = Box([b[0], b[2]], [b[0] + b[1], b[2] + b[3]])
    unsafe = [Predicate([a1, a2], (), c, s) for a1, a2, c, s in ps]
    verdict = check_unsafe_intersection(box, unsafe)
    assert verdict in (Overlap.DISJOINT, Overlap.CONTAINED, Overlap.OVERLAPPING)
    rng = np.random.default_rng(seed)
    pts = np.vstack([rng.uniform(box.lo, box.hi, (400, 2)), box.lo, box.hi,
                     [box.lo[0], box.hi[1]], [box.hi[0], box.lo[1]]])
    inside = np.array([all(p.holds(x) for p in unsafe) for x in pts])
    if verdict == Overlap.DISJOINT:
        assert not inside.any()
    if verdict == Overlap.CONTAINED:
        assert inside.all()
    # the vectorised classifier agrees with the exact one
    assert classify_boxes(box.lo[None], box.hi[None], unsafe)[0] == verdict


def test_composition_preserves_trajectories():
    # uniform single-mode plant, so urgent-switch timing of the hybrid plant does not matter
    from reachverify.circuits import build_inverter_uniform

    plant, inp = build_inverter_uniform(), ramp_input()
    T = 4.0
    sig = inp.signal(T, max_step=1e-3)
    x0 = np.array([1.2])
    a = point_simulate(plant, x0, T, 1e-3, None, sig)
    closed = compose(plant, inp)
    z0 = np.concatenate([x0, inp.initial_state])
    b = point_simulate(closed, z0, T, 1e-3, f"{plant.mode_names[0]}|{inp.initial_mode}")
    for t in np.linspace(0, T, 41):
        assert abs(a.at(t)[0] - b.at(t)[0]) < 2e-3


def test_problem_validation():
    plant = single_mode([ex.parse_expr("-x", ["x"])], ["x"], [])
    with pytest.raises(ModelError):
        VerificationProblem(plant, None, Box([0.0, 0.0], [1.0, 1.0]), [], 1.0)
    with pytest.raises(ModelError):
        VerificationProblem(plant, None, Box([0.0], [1.0]), [], -1.0)
    with pytest.raises(ModelError):
        VerificationProblem(plant, None, Box([0.0], [1.0]), [], 1.0, eps0=0.0)
    with pytest.raises(ModelError):
        VerificationProblem(plant, ramp_input(), Box([0.0], [1.0]), [], 1.0)


def test_input_signal_interpolation():
    s = InputSignal([0.0, 1.0, 2.0], [[0.0, 1.0, 1.0]])
    assert s(0.5)[0] == pytest.approx(0.5)
    lo, hi = s.box(0.25, 1.5)
    assert lo[0] == pytest.approx(0.25) and hi[0] == pytest.approx(1.0)


def test_transition_validation():
    m = ContinuousMode("a", [ex.ZERO])
    with pytest.raises(ModelError):
        HybridAutomaton([m], [Transition("a", "b", [])], ["x"], [])


def test_unsafe_conjunction_needs_combined_reasoning():
    names = ["x", "y"]
    unsafe = [parse_predicate(t, names) for t in ("x >= 0.8", "y >= 0.8", "x + y <= 1.5")]
    # each predicate alone meets the unit box, their conjunction does not
    assert check_unsafe_intersection(Box([0.0, 0.0], [1.0, 1.0]), unsafe) == Overlap.DISJOINT
    unsafe[2] = parse_predicate("x + y <= 1.6", names)
    assert check_unsafe_intersection(Box([0.0, 0.0], [1.0, 1.0]), unsafe) == Overlap.OVERLAPPING
