import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachverify import expr as ex
from reachverify.circuits import build_cardiac, decay_problem, sig_input
from reachverify.interval import Box
from reachverify.model import (
    ContinuousMode, HybridAutomaton, InputSignalAutomaton, VerificationProblem, parse_predicate, single_mode,
)
from reachverify.verify import (
    Verdict, closed_model_comparison, confirm_witness, cover, monte_carlo_check, refine, seed_from_env, verify,
)


def _covered(triples, pts):
    centers = np.array([t.center for t in triples])
    deltas = np.array([t.delta for t in triples])
    d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
    return np.any(d <= deltas[None, :] * (1 + 1e-12), axis=1)


def test_single_triple_for_large_delta():
    theta = Box([0.0, 2.0], [1.0, 3.0])
    out = cover(theta, theta.diameter / 2, 0.01)
    assert len(out) == 1
    np.testing.assert_allclose(out[0].center, [0.5, 2.5])


def test_unit_square_cover_complete(rng):
    triples = cover(Box([0.0, 0.0], [1.0, 1.0]), 0.5, 0.01)
    pts = rng.uniform(0, 1, size=(100_000, 2))
    assert _covered(triples, pts).all()


@settings(max_examples=30)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0, 1.5)), min_size=1, max_size=3), st.floats(0.01, 1.0),
       st.integers(0, 2**31))
def test_cover_completeness_property(dims, delta, seed):
    lo = np.array([a for a, _ in dims])
    hi = lo + np.array([w for _, w in dims])
    theta = Box(lo, hi)
    if theta.diameter / delta > 40:
        delta = theta.diameter / 40
    triples = cover(theta, delta, 0.01)
    rng = np.random.default_rng(seed)
    pts = np.vstack([rng.uniform(lo, hi, size=(2000, lo.size)), lo, hi])
    assert _covered(triples, pts).all()
    # every cell sits inside its triple's ball
    for t in triples:
        assert np.linalg.norm(np.array(t.cell_hi) - np.array(t.cell_lo)) / 2 <= t.delta * (1 + 1e-12)


def test_refinement_covers_parent(rng):
    parent = cover(Box([0.0, 0.0], [0.4, 0.2]), 0.25, 0.02, 0.05)[0]
    kids = refine(parent)
    assert all(k.delta == parent.delta / 2 and k.eps == parent.eps / 2 and k.tau == parent.tau / 2 for k in kids)
    assert all(k.depth == parent.depth + 1 for k in kids)
    pts = rng.uniform(parent.cell_lo, parent.cell_hi, size=(20_000, 2))
    assert _covered(kids, pts).all()


def test_cover_rejects_bad_radius():
    with pytest.raises(ValueError):
        cover(Box([0.0], [1.0]), 0.0, 0.01)


def test_initial_set_inside_unsafe_is_unsafe():
    pb = decay_problem(unsafe="x >= 0.5", theta=(0.9, 1.1), T=1.0)
    res = verify(pb)
    assert res.verdict == Verdict.UNSAFE
    assert res.stats["max_depth"] == 0
    assert confirm_witness(pb, res)


def test_decay_safe_with_monte_carlo():
    pb = decay_problem()
    res = verify(pb)
    assert res.verdict == Verdict.SAFE and res.stats["max_depth"] == 0
    checked, outside = monte_carlo_check(pb, res, samples=50, seed=seed_from_env())
    assert checked > 0 and outside == 0


def test_summary_and_report_fields():
    res = verify(decay_problem())
    s = res.summary()
    for key in ("verdict", "time_sim", "time_discrepancy", "time_io", "time_total", "triples"):
        assert key in s
    text = res.report()
    assert "sim" in text and "discr" in text and "io" in text


def test_budget_exceeded_on_boundary():
    # the lowest trajectory x = 0.9 exp(-t) touches x <= 0.9 exp(-1) only at the horizon
    pb = decay_problem(unsafe=f"x <= {0.9 * math.exp(-1.0)!r}", theta=(0.9, 1.0), T=1.0)
    res = verify(pb, budget=3)
    assert res.verdict == Verdict.BUDGET_EXCEEDED
    assert res.remaining and all(tr.depth == 4 for tr in res.remaining)


def test_verify_is_deterministic():
    a, b = verify(decay_problem()), verify(decay_problem())
    np.testing.assert_array_equal(a.tubes[0].lo, b.tubes[0].lo)


def _cardiac_with(inp, T=4.0):
    return VerificationProblem(build_cardiac(), inp, Box([0.4, 0.14], [0.6, 0.34]),
                               [parse_predicate("x1 >= 2", ["x1", "x2"])], T, 0.01, 0.05, name="c")


def test_closed_comparison_zero_delta_ratio_one():
    cmp = closed_model_comparison(_cardiac_with(sig_input(0.1, 2.0)), delta=0.0)
    assert cmp.ratio == pytest.approx(1.0, rel=0.2)


def test_closed_comparison_stable_input_ratio_near_one():
    # weakly driven stable plant, input u' = -u: closing the loop costs little
    u = ex.StateVar(0)
    aut = HybridAutomaton([ContinuousMode("decay", [-u])], [], ["u"], [], name="u-decay")
    inp = InputSignalAutomaton(aut, [0.5], [0], name="u-decay")
    plant = single_mode([ex.parse_expr("-x + 0.1*u", ["x"], ["u"])], ["x"], ["u"], name="lin")
    pb = VerificationProblem(plant, inp, Box([0.9], [1.1]), [parse_predicate("x >= 2", ["x"])], 4.0, 1e-3, 0.05)
    cmp = closed_model_comparison(pb, delta=0.1)
    assert not cmp.closed_overflow
    assert 0.8 <= cmp.ratio <= 1.5


def test_jobs_give_same_verdict():
    pb = decay_problem(theta=(0.5, 1.5))
    a = verify(pb, jobs=1, delta0=0.1)
    b = verify(pb, jobs=2, delta0=0.1)
    assert a.verdict == b.verdict == Verdict.SAFE
    assert len(a.store) == len(b.store)
