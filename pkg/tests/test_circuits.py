import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import batch_solve, inv_uniform, n_region, n_uniform
from reachverify.circuits import (
    INV_ARCS, INV_MODES, OHM, SAT, ST, CircuitSpec, build_inv_loop, build_inverter_hybrid, build_inverter_uniform,
    build_nor, build_or, build_or_feedback, inverter_current, logistic_solution, nmos, pmos, ramp_input,
    VERIFY_CM, region_current, region_of, sig_input, switching_threshold, uniform_current,
)
from reachverify.model import InputSignal
from reachverify.sim import InvariantError, point_simulate

SPEC = CircuitSpec()
N, P = nmos(), pmos()
VDD = 1.2

# arcs of the seven-mode inverter diagram, typed in by hand
DRAWN = {
    ("A", "B"), ("B", "A"), ("B", "D"), ("C", "A"), ("C", "D"), ("D", "B"), ("D", "C"),
    ("D", "E"), ("D", "F"), ("E", "D"), ("E", "G"), ("F", "D"), ("F", "G"), ("G", "E"),
}


def _settle(aut, x0, inputs, T=30.0):
    sig = InputSignal.constant(inputs, T) if inputs else None
    return point_simulate(aut, x0, T, 0.05, None, sig).states[:, -1]


def test_zero_drain_source_gives_zero_current():
    for region in (ST, OHM, SAT[:0] or OHM):
        assert region_current(N, region, 0.8, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert uniform_current(N, 1.0, 0.3, 0.3) == 0.0
    assert uniform_current(P, 0.0, 0.9, 0.9) == 0.0


def test_ohmic_meets_saturation_at_pinch_off():
    for vgs in np.linspace(0.5, 1.2, 8):
        vds = vgs - N.V_th
        assert region_current(N, OHM, vgs, vds) == pytest.approx(region_current(N, SAT, vgs, vds), rel=1e-12)
        assert region_current(N, SAT, vgs, vds) == pytest.approx(0.5 * N.k * (vgs - N.V_th) ** 2)


def test_saturation_monotone_in_gate():
    g = np.linspace(0.41, 1.2, 60)
    i = [region_current(N, SAT, v, 1.2) for v in g]
    assert np.all(np.diff(i) > 0)


def test_pmos_mirrors_nmos():
    assert region_current(P, SAT, -0.9, -1.0) == pytest.approx(-region_current(N, SAT, 0.9, 1.0))
    assert uniform_current(P, 0.0, 0.2, 1.2) == pytest.approx(-uniform_current(N, 1.2, 1.0, 0.0))


def test_deep_subthreshold_is_small():
    off = uniform_current(N, N.V_th - 10 * N.n_slope * N.V_T, 1.2, 0.0)
    on = uniform_current(N, N.V_th + 0.5, 1.2, 0.0)
    assert abs(off) < 1e-3 * abs(on)


def test_uniform_matches_saturation_within_ten_percent():
    for ov in np.linspace(0.3, 0.6, 13):
        u = uniform_current(N, N.V_th + ov, VDD, 0.0)
        s = region_current(N, SAT, N.V_th + ov, VDD)
        assert abs(u - s) <= 0.1 * s


@given(st.floats(-0.2, 1.4), st.floats(-0.2, 1.4), st.floats(-0.2, 1.4))
def test_uniform_current_matches_independent_formula(vg, vd, vs):
    # the numpy oracle uses logaddexp, the package builds the same formula from exp/log
    if vd >= vs:
        want = n_uniform(vg - vs, vd - vs)
    else:
        want = -n_uniform(vg - vd, vs - vd)
    assert uniform_current(N, vg, vd, vs) == pytest.approx(want, rel=1e-9, abs=1e-15)


@given(st.floats(0.0, 1.2), st.floats(0.0, 1.2))
def test_region_current_matches_oracle(vgs, vds):
    reg = region_of(N, vgs, vds)
    assert region_current(N, reg, vgs, vds) == pytest.approx(float(n_region(vgs, vds)), rel=1e-12, abs=1e-15)


def test_inverter_hybrid_structure():
    aut = build_inverter_hybrid()
    assert len(aut.modes) == 7
    assert aut.arcs == DRAWN == set(INV_ARCS)
    for a, b in DRAWN:
        assert a != b


def test_inverter_logic_equilibrium():
    aut = build_inverter_hybrid()
    q = aut.initial_mode([VDD], [0.0])
    assert INV_MODES[q] == (OHM, ST)
    f = aut.mode(q).f
    # only the subthreshold leak of the NMOS remains
    assert abs(f([VDD], [0.0])[0]) < 1e-6


def test_inverter_dc_levels():
    aut = build_inverter_uniform()
    assert _settle(aut, [0.0], [0.0])[0] == pytest.approx(VDD, abs=1e-3)
    assert _settle(aut, [VDD], [VDD])[0] == pytest.approx(0.0, abs=1e-3)


def test_switching_threshold_and_symmetry():
    vm = switching_threshold(SPEC)
    assert vm == pytest.approx(VDD / 2, abs=1e-9)
    assert abs(inverter_current(SPEC, vm, vm)) < 1e-12
    for v in np.linspace(0, VDD, 13):
        # symmetric devices: I(vin, vout) = -I(VDD - vin, VDD - vout)
        assert inverter_current(SPEC, v, 0.3) == pytest.approx(-inverter_current(SPEC, VDD - v, VDD - 0.3),
                                                                abs=1e-12)
        assert float(inv_uniform(v, 0.3)) == pytest.approx(inverter_current(SPEC, v, 0.3), rel=1e-9, abs=1e-15)


def test_excluded_modes_unreachable():
    aut = build_inverter_hybrid()
    assert set(INV_MODES.values()).isdisjoint({(OHM, OHM), (ST, ST)})
    for t_rise in (0.2, 0.5, 1.0, 3.0):
        for t_fall in (0.2, 1.0, 3.0):
            sig = ramp_input(t_rise=t_rise, t_fall=t_fall).signal(14.0, 0.01)
            tr = point_simulate(aut, [VDD], 14.0, 0.01, None, sig)
            for m in tr.modes:
                assert INV_MODES[m] not in {(OHM, OHM), (ST, ST)}
            assert {(a, b) for _, a, b in tr.events} <= DRAWN
            assert abs(tr.states[0, -1] - VDD) < 0.01


def test_too_fast_ramp_needs_an_undrawn_arc():
    # a near-step input would jump straight from B to F, which the diagram does not draw
    sig = ramp_input(t_rise=0.05).signal(3.0, 0.01)
    with pytest.raises(InvariantError):
        point_simulate(build_inverter_hybrid(), [VDD], 3.0, 0.01, None, sig)


FAST = CircuitSpec(C_M=VERIFY_CM)  # a larger internal capacitance keeps the explicit integrator quick


def test_nor_truth_table():
    aut = build_nor(FAST)
    assert _settle(aut, [VDD, 0.0], [0.0, 0.0])[1] == pytest.approx(VDD, abs=0.01)
    assert _settle(aut, [VDD, VDD], [VDD, VDD])[1] == pytest.approx(0.0, abs=0.01)
    assert _settle(aut, [VDD, VDD], [0.0, VDD])[1] == pytest.approx(0.0, abs=0.01)
    assert _settle(aut, [VDD, VDD], [VDD, 0.0])[1] == pytest.approx(0.0, abs=0.01)


def test_or_truth_table():
    aut = build_or(FAST)
    assert _settle(aut, [VDD, VDD, 0.0], [0.0, 0.0])[2] == pytest.approx(0.0, abs=0.01)
    for a, b in [(VDD, VDD), (0.0, VDD), (VDD, 0.0)]:
        assert _settle(aut, [VDD, 0.0, VDD], [a, b])[2] == pytest.approx(VDD, abs=0.01)


def test_inv_loop_settles_from_table_set():
    aut = build_inv_loop()
    for x0 in ([1.0, 0.5], [1.2, 0.6], [1.1, 0.55]):
        v = _settle(aut, x0, [])
        assert v[0] == pytest.approx(VDD, abs=0.01) and v[1] == pytest.approx(0.0, abs=0.01)


def test_inv_loop_metastable_point():
    aut = build_inv_loop()
    m = switching_threshold(SPEC)
    v = _settle(aut, [m, m], [], T=10.0)
    assert abs(v[0] - m) < 1e-6 and abs(v[1] - m) < 1e-6
    v = _settle(aut, [m + 1e-3, m], [], T=30.0)
    assert v[0] == pytest.approx(VDD, abs=0.01) and v[1] == pytest.approx(0.0, abs=0.01)


def _feedback_final(width, vout0, T=10.0):
    aut, pulse = build_or_feedback(FAST, width=width)
    sig = pulse.signal(T, 0.01)
    return point_simulate(aut, [VDD, VDD, vout0], T, 0.02, None, sig).states[2, -1]


def test_or_feedback_long_pulse_latches():
    for v0 in (0.0, 0.05, 0.3):
        assert _feedback_final(3.0, v0) == pytest.approx(VDD, abs=0.01)


def test_or_feedback_zero_pulse_stays_low():
    assert _feedback_final(0.0, 0.0) == pytest.approx(0.0, abs=0.01)


def test_or_feedback_critical_width_by_bisection():
    lo, hi = 0.0, 3.0
    for _ in range(16):
        mid = 0.5 * (lo + hi)
        if _feedback_final(mid, 0.0, 12.0) > VDD / 2:
            hi = mid
        else:
            lo = mid
    assert 0.0 < lo < hi < 3.0 and hi - lo < 1e-4
    # just above and below the critical width the loop resolves to opposite levels
    assert _feedback_final(hi, 0.0, 12.0) > VDD / 2 > _feedback_final(lo, 0.0, 12.0)


def test_sig_rise_matches_logistic():
    inp = sig_input(0.1, 3.2)
    sig = inp.signal(3.2, 1e-3)
    for t in np.linspace(0, 3.0, 16):
        assert sig(t)[0] == pytest.approx(logistic_solution(t, 0.1), abs=1e-6)


def test_ramp_shape():
    inp = ramp_input()
    sig = inp.signal(6.4, 1e-3)
    v = sig.values[0]
    assert v.min() >= -1e-9 and v.max() <= VDD + 1e-9
    assert np.max(np.abs(np.diff(v))) < 0.01
    assert sig(0.2)[0] == 0.0 and sig(2.0)[0] == pytest.approx(VDD)


def test_steep_ramp_is_a_step():
    sig = ramp_input(t0=0.5, t_rise=1e-4).signal(2.0, 1e-4)
    assert abs(sig(0.6)[0] - VDD) < 1e-3


def test_table_initial_sets():
    from reachverify.circuits import builtin_problem

    assert builtin_problem("or").theta.lo.tolist() == [1.2, 1.199, 0.0]
    assert builtin_problem("or").theta.hi.tolist() == [1.2, 1.201, 0.002]
    assert builtin_problem("inv-loop").theta.lo.tolist() == [1.0, 0.5]
    assert builtin_problem("inv-uniform").theta.hi.tolist() == [1.2]
