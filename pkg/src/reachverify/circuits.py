"""CMOS circuit models, input-signal automata and the builtin problem set.

Units are normalised: voltages in volts, capacitances and transconductance
chosen so a gate switches in O(1) model time units.  Every current function
accepts floats or :class:`~reachverify.expr.Expr` arguments, so the same code
evaluates numerically and builds vector fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import expr as ex
from .expr import InputVar, StateVar
from .interval import Box
from .model import (
    ContinuousMode,
    HybridAutomaton,
    InputSignal,
    InputSignalAutomaton,
    ModelError,
    Predicate,
    Transition,
    VerificationProblem,
    parse_predicate,
    single_mode,
)

ST, OHM, SAT = "ST", "OHM", "SAT"
REGIONS = (ST, OHM, SAT)


@dataclass(frozen=True)
class TransistorParams:
    polarity: str = "N"
    k: float = 2.0
    V_th: float = 0.4
    lam: float = 0.0
    n_slope: float = 1.5
    V_T: float = 0.026
    I_s: float | None = None

    def __post_init__(self):
        if self.polarity not in ("N", "P"):
            raise ValueError("polarity must be 'N' or 'P'")
        if not (self.k > 0 and self.V_T > 0 and self.n_slope >= 1 and self.lam >= 0):
            raise ValueError("need k > 0, V_T > 0, n_slope >= 1, lambda >= 0")
        if self.I_s is None:
            # matches the uniform model's subthreshold asymptote
            object.__setattr__(self, "I_s", 2 * self.n_slope**2 * self.k * self.V_T**2)


def nmos(**kw) -> TransistorParams:
    return TransistorParams("N", **kw)


def pmos(**kw) -> TransistorParams:
    return TransistorParams("P", **kw)


@dataclass(frozen=True)
class CircuitSpec:
    name: str = "cmos"
    nmos: TransistorParams = field(default_factory=nmos)
    pmos: TransistorParams = field(default_factory=pmos)
    C_L: float = 1.0
    C_M: float = 1e-3
    V_DD: float = 1.2

    def __post_init__(self):
        if not (self.C_L > 0 and self.C_M > 0 and self.V_DD > 0):
            raise ValueError("capacitances and V_DD must be positive")


def _n_region_current(p, region, vgs, vds):
    vov = vgs - p.V_th
    if region == ST:
        return p.I_s * ex.exp(vov / (p.n_slope * p.V_T)) * (1.0 - ex.exp(-vds / p.V_T))
    if region == OHM:
        return p.k * (vov * vds - vds * vds / 2.0)
    if region == SAT:
        sat = (p.k / 2.0) * vov * vov
        return sat * (1.0 + p.lam * vds) if p.lam else sat
    raise ValueError(f"unknown region {region!r}")


def region_current(p: TransistorParams, region: str, V_GS, V_DS):
    """Drain current (into the drain) of one operating region.

    NMOS: Shichman-Hodges above threshold, exponential below.  PMOS mirrors:
    ``I_D = -I_N(-V_GS, -V_DS)`` so it is negative in normal operation.
    """
    if p.polarity == "N":
        return _n_region_current(p, region, V_GS, V_DS)
    return -_n_region_current(p, region, -V_GS, -V_DS)


def _softplus(z):
    return ex.log(1.0 + ex.exp(z))


def _n_uniform(p, vgs, vds):
    s = 2.0 * p.n_slope * p.V_T
    fwd = _softplus((vgs - p.V_th) / s)
    rev = _softplus((vgs - p.V_th - vds) / s)
    i = 2.0 * p.n_slope**2 * p.k * p.V_T**2 * (fwd * fwd - rev * rev)
    return i * (1.0 + p.lam * vds) if p.lam else i


def uniform_current(p: TransistorParams, V_G, V_D, V_S):
    """Smooth single-equation drain current valid in every region.

    Squared softplus interpolation: reduces to ``k/2 (V_GS - V_th)^2`` in deep
    saturation, to the ohmic parabola for small ``V_DS`` and to an exponential
    below threshold.  PMOS mirrors signs (negative drain current).
    """
    if p.polarity == "N":
        return _n_uniform(p, V_G - V_S, V_D - V_S)
    return -_n_uniform(p, V_S - V_G, V_S - V_D)


def region_of(p: TransistorParams, V_GS: float, V_DS: float) -> str:
    if p.polarity == "P":
        V_GS, V_DS = -V_GS, -V_DS
    if V_GS <= p.V_th:
        return ST
    return SAT if V_DS >= V_GS - p.V_th else OHM


# ---------------------------------------------------------------------------
# inverters

INV_MODES = {
    "A": (OHM, ST),
    "B": (OHM, SAT),
    "C": (SAT, ST),
    "D": (SAT, SAT),
    "E": (SAT, OHM),
    "F": (ST, SAT),
    "G": (ST, OHM),
}

# arcs drawn in the hybrid inverter diagram
INV_ARCS = frozenset(
    {
        ("A", "B"), ("B", "A"), ("B", "D"),
        ("C", "A"), ("C", "D"),
        ("D", "B"), ("D", "C"), ("D", "E"), ("D", "F"),
        ("E", "D"), ("E", "G"),
        ("F", "D"), ("F", "G"),
        ("G", "E"),
    }
)


def _region_preds(spec: CircuitSpec, device: str, region: str) -> list:
    """Affine region conditions over (V_out; V_in)."""
    vdd = spec.V_DD
    if device == "N":
        vt = spec.nmos.V_th
        if region == ST:
            return [Predicate([0.0], [1.0], vt)]  # V_in <= V_th
        on = Predicate([0.0], [-1.0], -vt)  # V_in >= V_th
        if region == SAT:
            return [on, Predicate([-1.0], [1.0], vt)]  # V_out >= V_in - V_th
        return [on, Predicate([1.0], [-1.0], -vt)]  # V_out <= V_in - V_th
    vt = spec.pmos.V_th
    if region == ST:
        return [Predicate([0.0], [-1.0], -(vdd - vt))]  # V_in >= V_DD - V_th
    on = Predicate([0.0], [1.0], vdd - vt)
    if region == SAT:
        return [on, Predicate([1.0], [-1.0], vt)]  # V_out <= V_in + V_th
    return [on, Predicate([-1.0], [1.0], -vt)]  # V_out >= V_in + V_th


def inverter_current(spec: CircuitSpec, vin, vout, regions=None):
    """Net current into the output node of a CMOS inverter."""
    vdd = spec.V_DD
    if regions is None:
        i_p = -uniform_current(spec.pmos, vin, vout, vdd)
        i_n = uniform_current(spec.nmos, vin, vout, 0.0)
    else:
        rp, rn = regions
        i_p = -region_current(spec.pmos, rp, vin - vdd, vout - vdd)
        i_n = region_current(spec.nmos, rn, vin, vout)
    return i_p - i_n


def build_inverter_hybrid(spec: CircuitSpec | None = None) -> HybridAutomaton:
    """Seven-mode inverter; state ``Vout``, input ``Vin``; guards are target invariants."""
    spec = spec or CircuitSpec("inv-hybrid")
    vout, vin = StateVar(0), InputVar(0)
    modes = []
    for name, (rp, rn) in INV_MODES.items():
        rhs = inverter_current(spec, vin, vout, (rp, rn)) / spec.C_L
        inv = _region_preds(spec, "P", rp) + _region_preds(spec, "N", rn)
        modes.append(ContinuousMode(name, [rhs], inv))
    inv_of = {m.name: m.invariant for m in modes}
    trans = [Transition(a, b, inv_of[b]) for a, b in sorted(INV_ARCS)]
    return HybridAutomaton(modes, trans, ["Vout"], ["Vin"], name="inv-hybrid")


def build_inverter_uniform(spec: CircuitSpec | None = None) -> HybridAutomaton:
    spec = spec or CircuitSpec("inv-uniform")
    rhs = inverter_current(spec, InputVar(0), StateVar(0)) / spec.C_L
    return single_mode([rhs], ["Vout"], ["Vin"], name="inv-uniform")


def switching_threshold(spec: CircuitSpec, tol: float = 1e-12) -> float:
    """Input voltage where the uniform inverter's output current vanishes at ``Vout = Vin``."""
    lo, hi = 0.0, spec.V_DD
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inverter_current(spec, mid, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# NOR, OR, loops


def nor_currents(spec: CircuitSpec, a, b, vm, vout):
    """Branch currents of the NOR: series PMOS P1 (gate a) and P2 (gate b), parallel NMOS N3, N4."""
    vdd = spec.V_DD
    i1 = -uniform_current(spec.pmos, a, vm, vdd)
    i2 = -uniform_current(spec.pmos, b, vout, vm)
    i3 = uniform_current(spec.nmos, a, vout, 0.0)
    i4 = uniform_current(spec.nmos, b, vout, 0.0)
    return i1, i2, i3, i4


def nor_field(spec: CircuitSpec, a, b, vm, vout) -> list:
    i1, i2, i3, i4 = nor_currents(spec, a, b, vm, vout)
    return [(i1 - i2) / spec.C_M, (i2 - i3 - i4) / spec.C_L]


def build_nor(spec: CircuitSpec | None = None, tied: bool = False) -> HybridAutomaton:
    """States (Vm, Vout); inputs (a, b), or a single input driving both when ``tied``."""
    spec = spec or CircuitSpec("nor")
    a = InputVar(0)
    b = InputVar(0) if tied else InputVar(1)
    f = nor_field(spec, a, b, StateVar(0), StateVar(1))
    return single_mode(f, ["Vm", "Vout"], ["a"] if tied else ["a", "b"], name="nor")


def build_or(spec: CircuitSpec | None = None, tied: bool = False) -> HybridAutomaton:
    """NOR followed by an inverter: states (Vm, Vnor, Vout)."""
    spec = spec or CircuitSpec("or")
    a = InputVar(0)
    b = InputVar(0) if tied else InputVar(1)
    f = nor_field(spec, a, b, StateVar(0), StateVar(1))
    f.append(inverter_current(spec, StateVar(1), StateVar(2)) / spec.C_L)
    return single_mode(f, ["Vm", "Vnor", "Vout"], ["a"] if tied else ["a", "b"], name="or")


def build_inv_loop(spec: CircuitSpec | None = None) -> HybridAutomaton:
    """Two cross-coupled inverters, no external input."""
    spec = spec or CircuitSpec("inv-loop")
    v1, v2 = StateVar(0), StateVar(1)
    f = [inverter_current(spec, v2, v1) / spec.C_L, inverter_current(spec, v1, v2) / spec.C_L]
    return single_mode(f, ["V1", "V2"], [], name="inv-loop")


def build_or_feedback(spec: CircuitSpec | None = None, width: float = 1.0, **pulse_kw):
    """OR gate whose output drives its own input ``a``; a pulse drives input ``b``.

    Returns ``(automaton, pulse_input_automaton)``.
    """
    spec = spec or CircuitSpec("or-feedback")
    vm, vnor, vout = StateVar(0), StateVar(1), StateVar(2)
    f = nor_field(spec, vout, InputVar(0), vm, vnor)
    f.append(inverter_current(spec, vnor, vout) / spec.C_L)
    aut = single_mode(f, ["Vm", "Vnor", "Vout"], ["b"], name="or-feedback")
    return aut, pulse_input(width=width, v_high=spec.V_DD, **pulse_kw)


# ---------------------------------------------------------------------------
# input automata


def _clock_preds(lo=None, hi=None, u_lo=None, u_hi=None):
    """Predicates over (u, clk)."""
    out = []
    if lo is not None:
        out.append(Predicate([0.0, -1.0], (), -lo))
    if hi is not None:
        out.append(Predicate([0.0, 1.0], (), hi))
    if u_lo is not None:
        out.append(Predicate([-1.0, 0.0], (), -u_lo))
    if u_hi is not None:
        out.append(Predicate([1.0, 0.0], (), u_hi))
    return out


def ramp_input(t0: float = 0.5, t_rise: float = 1.0, t_high: float = 1.7, t_fall: float | None = None,
               v_low: float = 0.0, v_high: float = 1.2) -> InputSignalAutomaton:
    """Four modes: low, rise at constant slope, high, fall; state (u, clk)."""
    if t_fall is None:
        t_fall = t_rise
    if min(t_rise, t_fall) <= 0 or t_high < 0:
        raise ValueError("ramp times must be positive")
    up_slope = (v_high - v_low) / t_rise
    dn_slope = (v_high - v_low) / t_fall
    one = ex.Const(1.0)
    modes = [
        ContinuousMode("low", [ex.ZERO, one]),
        ContinuousMode("rise", [ex.Const(up_slope), one]),
        ContinuousMode("high", [ex.ZERO, one]),
        ContinuousMode("fall", [ex.Const(-dn_slope), one]),
    ]
    t_off = t0 + t_rise + t_high
    trans = [
        Transition("low", "rise", _clock_preds(lo=t0, hi=t0 + t_rise)),
        Transition("rise", "high", _clock_preds(u_lo=v_high)),
        Transition("high", "fall", _clock_preds(lo=t_off)),
        Transition("fall", "low", _clock_preds(u_hi=v_low)),
    ]
    aut = HybridAutomaton(modes, trans, ["u", "clk"], [], name="ramp")
    params = dict(t0=t0, t_rise=t_rise, t_high=t_high, t_fall=t_fall, v_low=v_low, v_high=v_high)
    return InputSignalAutomaton(aut, [v_low, 0.0], [0], "low", name="ramp", params=params)


def pulse_input(width: float, t0: float = 0.5, edge: float = 0.1, v_high: float = 1.2) -> InputSignalAutomaton:
    """A ramp pulse staying high for ``width``; width 0 gives the constant-zero signal."""
    if width <= 0:
        one = ex.Const(1.0)
        aut = HybridAutomaton([ContinuousMode("low", [ex.ZERO, one])], [], ["u", "clk"], [], name="pulse")
        return InputSignalAutomaton(aut, [0.0, 0.0], [0], "low", name="pulse", params=dict(width=0.0))
    sig = ramp_input(t0=t0, t_rise=edge, t_high=width, t_fall=edge, v_high=v_high)
    sig.name = "pulse"
    sig.params = dict(width=width, t0=t0, edge=edge, v_high=v_high)
    return sig


SIG_RATE, SIG_SAT, SIG_BIAS = 1.8, 1.5, 0.0015


def sig_top() -> float:
    """Stable equilibrium of ``u' = u(1.8 - 1.5u) + 0.0015``."""
    return (SIG_RATE + math.sqrt(SIG_RATE**2 + 4 * SIG_SAT * SIG_BIAS)) / (2 * SIG_SAT)


def sig_input(u0: float = 0.1, t_fall: float = 3.2) -> InputSignalAutomaton:
    """Two modes: logistic rise, then the mirrored fall from ``t_fall`` on; state (u, clk)."""
    top = sig_top()
    u, one = StateVar(0), ex.Const(1.0)
    rise = u * (SIG_RATE - SIG_SAT * u) + SIG_BIAS
    v = top - u
    fall = -(v * (SIG_RATE - SIG_SAT * v) + SIG_BIAS)
    modes = [
        ContinuousMode("rise", [rise, one], _clock_preds(hi=t_fall)),
        ContinuousMode("fall", [fall, one], _clock_preds(lo=t_fall)),
    ]
    trans = [Transition("rise", "fall", _clock_preds(lo=t_fall))]
    aut = HybridAutomaton(modes, trans, ["u", "clk"], [], name="sig")
    return InputSignalAutomaton(aut, [u0, 0.0], [0], "rise", name="sig", params=dict(u0=u0, t_fall=t_fall))


def logistic_solution(t: float, u0: float) -> float:
    """Closed form of the rising Sig phase (roots of 1.5u^2 - 1.8u - 0.0015)."""
    top = sig_top()
    bot = (SIG_RATE - math.sqrt(SIG_RATE**2 + 4 * SIG_SAT * SIG_BIAS)) / (2 * SIG_SAT)
    # u' = -1.5 (u - top)(u - bot)
    c = (u0 - bot) / (top - u0)
    e = c * math.exp(SIG_SAT * (top - bot) * t)
    return (top * e + bot) / (1 + e)


# ---------------------------------------------------------------------------
# builtin problems

CARDIAC_FIELD = ("-x1*(x1^2 + 0.9*x1 + 0.9) + 2*x2*u + 1", "x1 - 2*x2")


def build_cardiac() -> HybridAutomaton:
    f = [ex.parse_expr(s, ["x1", "x2"], ["u"]) for s in CARDIAC_FIELD]
    return single_mode(f, ["x1", "x2"], ["u"], name="cardiac")


HORIZON = 6.4
UNSAFE_HIGH = 1.32
VERIFY_CM = 0.25  # C_M used by the NOR/OR verification problems, see README


def _input_by_kind(kind: str, V_DD: float = 1.2) -> InputSignalAutomaton:
    if kind == "ramp":
        return ramp_input(v_high=V_DD)
    if kind == "sig":
        return sig_input()
    raise ModelError(f"unknown input kind {kind!r} (expected ramp or sig)")


def _problem(plant, inp, theta, unsafe_text, T, eps0, tau0, name, **meta) -> VerificationProblem:
    unsafe = [parse_predicate(unsafe_text, plant.state_names, plant.input_names)]
    return VerificationProblem(plant, inp, Box(*theta), unsafe, T, eps0, tau0, name=name, meta=meta)


def cardiac_problem(T: float = 10.0, t_fall: float = 5.0) -> VerificationProblem:
    # the initial ball B_0.1((0.5, 0.24)) enclosed by its bounding box
    return _problem(build_cardiac(), sig_input(0.1, t_fall), ([0.4, 0.14], [0.6, 0.34]), "x1 >= 2", T, 0.01, 0.05,
                    "cardiac", ball=((0.5, 0.24), 0.1))


def inverter_problem(kind: str = "sig", hybrid: bool = False, T: float = HORIZON) -> VerificationProblem:
    spec = CircuitSpec("inv")
    plant = build_inverter_hybrid(spec) if hybrid else build_inverter_uniform(spec)
    return _problem(plant, _input_by_kind(kind, spec.V_DD), ([1.15], [1.2]), f"Vout > {UNSAFE_HIGH}", T, 0.01, 0.05,
                    f"{'inv-hybrid' if hybrid else 'inv-uniform'}-{kind}")


def nor_problem(kind: str = "sig", T: float = HORIZON, C_M: float = VERIFY_CM) -> VerificationProblem:
    spec = CircuitSpec("nor", C_M=C_M)
    plant = build_nor(spec, tied=True)
    return _problem(plant, _input_by_kind(kind, spec.V_DD), ([1.2, 1.15], [1.2, 1.2]), f"Vout > {UNSAFE_HIGH}", T,
                    0.01, 0.05, f"nor-{kind}")


def or_problem(kind: str = "sig", T: float = HORIZON, C_M: float = VERIFY_CM) -> VerificationProblem:
    spec = CircuitSpec("or", C_M=C_M)
    plant = build_or(spec, tied=True)
    return _problem(plant, _input_by_kind(kind, spec.V_DD), ([1.2, 1.199, 0.0], [1.2, 1.201, 0.002]),
                    f"Vout > {UNSAFE_HIGH}", T, 0.01, 0.05, f"or-{kind}")


def inv_loop_problem(T: float = HORIZON) -> VerificationProblem:
    plant = build_inv_loop()
    return _problem(plant, None, ([1.0, 0.5], [1.2, 0.6]), f"V1 > {UNSAFE_HIGH}", T, 0.01, 0.05, "inv-loop")


def or_feedback_problem(width: float, vout0: float = 0.0, radius: float = 1e-6, T: float = 8.0,
                        C_M: float = VERIFY_CM) -> VerificationProblem:
    spec = CircuitSpec("or-feedback", C_M=C_M)
    plant, pulse = build_or_feedback(spec, width)
    lo = [spec.V_DD, spec.V_DD, vout0 - radius]
    hi = [spec.V_DD, spec.V_DD, vout0 + radius]
    # the pulse edges are short, so the default precision is finer than for the other circuits
    return _problem(plant, pulse, (lo, hi), f"Vout > {UNSAFE_HIGH}", T, 1e-4, 0.01, "or-feedback", width=width)


def decay_problem(unsafe: str = "x >= 2", theta=(0.9, 1.1), T: float = 1.0) -> VerificationProblem:
    plant = single_mode([ex.parse_expr("-x", ["x"])], ["x"], [], name="decay")
    return _problem(plant, None, ([theta[0]], [theta[1]]), unsafe, T, 0.01, 0.05, "decay")


BUILTINS = {
    "cardiac": lambda kind=None, **kw: cardiac_problem(**kw),
    "inv-hybrid": lambda kind=None, **kw: inverter_problem(kind or "sig", True, **kw),
    "inv-uniform": lambda kind=None, **kw: inverter_problem(kind or "sig", False, **kw),
    "nor": lambda kind=None, **kw: nor_problem(kind or "sig", **kw),
    "or": lambda kind=None, **kw: or_problem(kind or "sig", **kw),
    "inv-loop": lambda kind=None, **kw: inv_loop_problem(**kw),
    "or-feedback": lambda kind=None, **kw: or_feedback_problem(kw.pop("width", 1.0), **kw),
    "decay": lambda kind=None, **kw: decay_problem(**kw),
}


def builtin_problem(name: str, kind: str | None = None, **kw) -> VerificationProblem:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ModelError(f"unknown builtin {name!r}; choose from {', '.join(sorted(BUILTINS))}") from None
    return factory(kind, **kw)


def with_spec(spec: CircuitSpec, **changes) -> CircuitSpec:
    return replace(spec, **changes)
