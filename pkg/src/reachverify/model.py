"""Continuous modes, hybrid automata, input signals and verification problems."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, ExprError, InputVar, StateVar
from .interval import Box


class ModelError(ValueError):
    """Malformed model: bad dimensions, unknown modes, non-affine predicates."""


# ---------------------------------------------------------------------------
# affine predicates

_REL_RE = re.compile(r"(<=|>=|<|>|=<|=>)")


@dataclass(frozen=True)
class Predicate:
    """Affine constraint ``a_x . x + a_u . u  <=  bound`` (``<`` when strict)."""

    coeffs_x: tuple
    coeffs_u: tuple = ()
    bound: float = 0.0
    strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coeffs_x", tuple(float(c) for c in self.coeffs_x))
        object.__setattr__(self, "coeffs_u", tuple(float(c) for c in self.coeffs_u))
        object.__setattr__(self, "bound", float(self.bound))
        if not all(math.isfinite(c) for c in self.coeffs_x + self.coeffs_u + (self.bound,)):
            raise ModelError("predicate coefficients must be finite")

    @property
    def coeffs(self) -> np.ndarray:
        return np.array(self.coeffs_x + self.coeffs_u)

    def margin(self, x, u=()) -> float:
        """``a.z - bound``; the predicate holds when this is <= 0 (< 0 if strict)."""
        return float(np.dot(self.coeffs_x, x) + (np.dot(self.coeffs_u, u) if self.coeffs_u else 0.0) - self.bound)

    def holds(self, x, u=(), tol: float = 0.0) -> bool:
        g = self.margin(x, u)
        return g < tol if self.strict else g <= tol

    def extend(self, coeffs_x, coeffs_u=None) -> "Predicate":
        return Predicate(coeffs_x, self.coeffs_u if coeffs_u is None else coeffs_u, self.bound, self.strict)

    def to_text(self, state_names: Sequence[str], input_names: Sequence[str] = ()) -> str:
        terms = []
        for c, nm in zip(self.coeffs_x + self.coeffs_u, list(state_names) + list(input_names)):
            if c == 0.0:
                continue
            if c == 1.0:
                terms.append(f"+ {nm}")
            elif c == -1.0:
                terms.append(f"- {nm}")
            elif c < 0:
                terms.append(f"- {-c!r}*{nm}")
            else:
                terms.append(f"+ {c!r}*{nm}")
        lhs = " ".join(terms).lstrip("+ ") if terms else "0"
        if lhs.startswith("- "):
            lhs = "-" + lhs[2:]
        return f"{lhs} {'<' if self.strict else '<='} {self.bound!r}"


def _exact_range(a: Sequence[float], lo: Sequence[float], hi: Sequence[float]):
    mn = Fraction(0)
    mx = Fraction(0)
    for ai, l, h in zip(a, lo, hi):
        fa = Fraction(ai)
        p1, p2 = fa * Fraction(l), fa * Fraction(h)
        mn += min(p1, p2)
        mx += max(p1, p2)
    return mn, mx


def predicate_status(pred: Predicate, lo, hi) -> str:
    """Exact check of one predicate over a box: 'all', 'none' or 'some' points satisfy it.

    ``lo``/``hi`` cover the concatenated (state, input) coordinates the predicate uses.
    """
    a = pred.coeffs
    lo = np.asarray(lo, dtype=float)[: a.size]
    hi = np.asarray(hi, dtype=float)[: a.size]
    pmin = np.minimum(a * lo, a * hi)
    pmax = np.maximum(a * lo, a * hi)
    smin, smax = float(np.sum(pmin)), float(np.sum(pmax))
    err = 4 * a.size * np.finfo(float).eps * float(np.sum(np.abs(pmin) + np.abs(pmax)) + abs(pred.bound))
    b = pred.bound
    if smin - b > err:
        return "none"
    if smax - b < -err:
        return "all"
    if smin - b < -err and smax - b > err:
        return "some"
    emin, emax = _exact_range(a, lo, hi)
    fb = Fraction(b)
    if pred.strict:
        if emin >= fb:
            return "none"
        return "all" if emax < fb else "some"
    if emin > fb:
        return "none"
    return "all" if emax <= fb else "some"


def parse_predicate(text: str, state_names: Sequence[str], input_names: Sequence[str] = (), constants=None) -> Predicate:
    """Parse ``lhs op rhs`` with op in <=, >=, <, > into an affine predicate."""
    parts = _REL_RE.split(text)
    if len(parts) != 3:
        raise ModelError(f"expected exactly one comparison in predicate {text!r}")
    lhs_t, op, rhs_t = parts
    op = {"=<": "<=", "=>": ">="}.get(op, op)
    lhs = ex.parse_expr(lhs_t, state_names, input_names, constants)
    rhs = ex.parse_expr(rhs_t, state_names, input_names, constants)
    d = ex.sub(lhs, rhs) if op in ("<=", "<") else ex.sub(rhs, lhs)
    n, m = len(state_names), len(input_names)
    cx, cu = [], []
    for var, out in [(StateVar(i), cx) for i in range(n)] + [(InputVar(j), cu) for j in range(m)]:
        dv = ex.differentiate(d, var)
        if not isinstance(dv, ex.Const):
            raise ModelError(f"predicate {text!r} is not affine")
        out.append(dv.value)
    const = ex.eval_point(d, [0.0] * n, [0.0] * m)
    return Predicate(tuple(cx), tuple(cu), -const, strict=op in ("<", ">"))


def conj_holds(preds: Sequence[Predicate], x, u=(), tol: float = 0.0) -> bool:
    return all(p.holds(x, u, tol) for p in preds)


def conj_may_intersect(preds: Sequence[Predicate], lo, hi) -> bool:
    """Conservative: False only if the box certainly misses the conjunction."""
    return all(predicate_status(p, lo, hi) != "none" for p in preds)


class Overlap(str, enum.Enum):
    DISJOINT = "disjoint"
    CONTAINED = "contained"
    OVERLAPPING = "overlapping"


def check_unsafe_intersection(box: Box, unsafe: Sequence[Predicate]) -> Overlap:
    """Classify a state box against the unsafe set (a conjunction of affine predicates)."""
    if not unsafe:
        return Overlap.DISJOINT
    lo, hi = box.lo, box.hi
    statuses = [predicate_status(p, lo, hi) for p in unsafe]
    if any(s == "none" for s in statuses):
        return Overlap.DISJOINT
    if all(s == "all" for s in statuses):
        return Overlap.CONTAINED
    if len(unsafe) > 1 and _lp_disjoint(unsafe, lo, hi):
        return Overlap.DISJOINT
    return Overlap.OVERLAPPING


def _lp_disjoint(unsafe, lo, hi) -> bool:
    """True only when an exactly checked Farkas certificate proves the box misses the conjunction.

    The LP maximises a common slack ``s`` in ``A z + s <= b`` over the box; its
    duals ``y >= 0`` give the implied inequality ``(yA) z <= yb``, which is then
    tested against the box in rational arithmetic, so LP tolerances never
    decide the answer.
    """
    from scipy.optimize import linprog

    n = lo.size
    A = np.array([p.coeffs[:n] for p in unsafe])
    b = np.array([p.bound for p in unsafe])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((len(unsafe), 1))])
    scale = 1.0 + float(np.abs(b).sum() + np.abs(A).sum() * np.abs(np.concatenate([lo, hi])).max(initial=0.0))
    bounds = [(l, h) for l, h in zip(lo, hi)] + [(-scale, scale)]
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0 or res.ineqlin is None:
        return False
    y = np.maximum(-np.asarray(res.ineqlin.marginals, dtype=float), 0.0)
    if not np.any(y > 0):
        return False
    coef = [sum((Fraction(float(yi)) * Fraction(float(A[i, k])) for i, yi in enumerate(y)), Fraction(0))
            for k in range(n)]
    bound = sum((Fraction(float(yi)) * Fraction(float(bi)) for yi, bi in zip(y, b)), Fraction(0))
    mn = Fraction(0)
    for ck, l, h in zip(coef, lo, hi):
        mn += min(ck * Fraction(float(l)), ck * Fraction(float(h)))
    strict = any(p.strict and yi > 0 for p, yi in zip(unsafe, y))
    return mn >= bound if strict else mn > bound


# ---------------------------------------------------------------------------
# modes and automata


class ContinuousMode:
    """A named vector field with an invariant (conjunction of affine predicates)."""

    def __init__(self, name: str, field: Sequence[Expr], invariant: Sequence[Predicate] = ()):
        self.name = str(name)
        self.field = tuple(ex.as_expr(f) for f in field)
        self.invariant = tuple(invariant)
        self._cache = {}

    @property
    def n(self) -> int:
        return len(self.field)

    def __getstate__(self):
        return {"name": self.name, "field": self.field, "invariant": self.invariant}

    def __setstate__(self, state):
        self.__init__(state["name"], state["field"], state["invariant"])

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def f(self):
        """Compiled scalar vector field ``f(x, u) -> ndarray``."""
        return self._cached("f", lambda: ex.compile_exprs(self.field, "math"))

    @property
    def f_batch(self):
        return self._cached("fb", lambda: ex.compile_exprs(self.field, "numpy"))

    def jacobian_exprs(self, m: int) -> tuple:
        """(J_x, J_u) symbolic Jacobians."""
        return self._cached(
            ("jac", m),
            lambda: (ex.jacobian(self.field, self.n, m, "state"), ex.jacobian(self.field, self.n, m, "input")),
        )

    def invariant_holds(self, x, u=(), tol: float = 0.0) -> bool:
        return conj_holds(self.invariant, x, u, tol)

    def __repr__(self):
        return f"ContinuousMode({self.name!r}, n={self.n})"


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "guard", tuple(self.guard))
        if self.source == self.target:
            raise ModelError(f"self-loop transition on mode {self.source!r}")

    def enabled(self, x, u=(), tol: float = 0.0) -> bool:
        return conj_holds(self.guard, x, u, tol)


class HybridAutomaton:
    """Modes over ``n`` state and ``m`` input variables with guarded identity-reset transitions."""

    def __init__(
        self,
        modes: Sequence[ContinuousMode],
        transitions: Sequence[Transition] = (),
        state_names: Sequence[str] | None = None,
        input_names: Sequence[str] | None = None,
        name: str = "",
    ):
        self.modes = list(modes)
        self.transitions = list(transitions)
        self.name = name
        if not self.modes:
            raise ModelError("a hybrid automaton needs at least one mode")
        self.n = self.modes[0].n
        self.state_names = list(state_names) if state_names is not None else [f"x{i}" for i in range(self.n)]
        if input_names is None:
            m = 0
            for md in self.modes:
                for fx in md.field:
                    m = max(m, ex.max_indices(fx)[1] + 1)
            input_names = [f"u{j}" for j in range(m)]
        self.input_names = list(input_names)
        self.m = len(self.input_names)
        if len(self.state_names) != self.n:
            raise ModelError(f"{len(self.state_names)} state names for dimension {self.n}")
        self._index = {}
        for k, md in enumerate(self.modes):
            if md.name in self._index:
                raise ModelError(f"duplicate mode name {md.name!r}")
            self._index[md.name] = k
            if md.n != self.n:
                raise ModelError(f"mode {md.name!r} has dimension {md.n}, expected {self.n}")
            for fx in md.field:
                try:
                    ex.check_well_formed(fx, self.n, self.m)
                except ExprError as exc:
                    raise ModelError(f"mode {md.name!r}: {exc}") from None
            for p in md.invariant:
                self._check_pred(p, f"invariant of {md.name!r}")
        self._outgoing = {md.name: [] for md in self.modes}
        for t in self.transitions:
            for end in (t.source, t.target):
                if end not in self._index:
                    raise ModelError(f"transition refers to unknown mode {end!r}")
            for p in t.guard:
                self._check_pred(p, f"guard {t.source}->{t.target}")
            self._outgoing[t.source].append(t)

    def _check_pred(self, p: Predicate, where: str):
        if len(p.coeffs_x) != self.n or len(p.coeffs_u) != self.m:
            raise ModelError(f"{where}: predicate dimension mismatch")

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items()}

    def mode(self, name: str) -> ContinuousMode:
        try:
            return self.modes[self._index[name]]
        except KeyError:
            raise ModelError(f"unknown mode {name!r}") from None

    def mode_index(self, name: str) -> int:
        return self._index[name]

    @property
    def mode_names(self) -> list:
        return [m.name for m in self.modes]

    def outgoing(self, name: str) -> list:
        return self._outgoing[name]

    def initial_mode(self, x, u=(), tol: float = 1e-12) -> str:
        """First mode (in declaration order) whose invariant holds at ``(x, u)``."""
        for md in self.modes:
            if md.invariant_holds(x, u, tol):
                return md.name
        raise ModelError(f"state {list(np.round(x, 6))} lies in no mode invariant")

    @property
    def arcs(self) -> set:
        return {(t.source, t.target) for t in self.transitions}

    def __repr__(self):
        return f"HybridAutomaton({self.name!r}, modes={len(self.modes)}, n={self.n}, m={self.m})"


def single_mode(field: Sequence[Expr], state_names=None, input_names=None, name: str = "main") -> HybridAutomaton:
    return HybridAutomaton([ContinuousMode(name, field)], [], state_names, input_names, name=name)


# ---------------------------------------------------------------------------
# input signals


class InputSignal:
    """A fixed input ``u(t)``: piecewise-linear interpolation of time-stamped samples."""

    def __init__(self, times, values, names: Sequence[str] | None = None, modes: Sequence[str] | None = None):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(1, -1) if vals.size == self.times.size else vals.reshape(-1, 1)
        self.values = vals
        if self.values.shape[1] != self.times.size:
            raise ModelError("input signal needs one sample column per time stamp")
        if self.times.size == 0 or np.any(np.diff(self.times) < 0):
            raise ModelError("input signal time stamps must be non-empty and non-decreasing")
        self.names = list(names) if names is not None else [f"u{j}" for j in range(self.m)]
        self.modes = list(modes) if modes is not None else None

    @classmethod
    def constant(cls, values, T: float = 1.0, names=None) -> "InputSignal":
        v = np.asarray(values, dtype=float).reshape(-1, 1)
        return cls([0.0, max(T, 0.0)], np.hstack([v, v]), names)

    @classmethod
    def empty(cls) -> "InputSignal":
        return cls([0.0], np.zeros((0, 1)))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, row) for row in self.values])

    def sample(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.array([np.interp(ts, self.times, row) for row in self.values]).reshape(self.m, *ts.shape)

    def box(self, t0: float, t1: float):
        lo, hi = self.boxes([t0], [t1])
        return lo[:, 0], hi[:, 0]

    def boxes(self, t0s, t1s):
        """Per-window (lo, hi) of u over ``[t0s[k], t1s[k]]``; arrays of shape (m, K)."""
        t0s = np.asarray(t0s, dtype=float)
        t1s = np.asarray(t1s, dtype=float)
        K = t0s.size
        lo = np.empty((self.m, K))
        hi = np.empty((self.m, K))
        if self.m == 0:
            return lo, hi
        v0 = self.sample(t0s)
        v1 = self.sample(t1s)
        lo[:] = np.minimum(v0, v1)
        hi[:] = np.maximum(v0, v1)
        i0 = np.searchsorted(self.times, t0s, side="right")
        i1 = np.searchsorted(self.times, t1s, side="left")
        for k in np.nonzero(i1 > i0)[0]:
            seg = self.values[:, i0[k] : i1[k]]
            lo[:, k] = np.minimum(lo[:, k], seg.min(axis=1))
            hi[:, k] = np.maximum(hi[:, k], seg.max(axis=1))
        return lo, hi

    def slope_bounds(self, t0s, t1s) -> np.ndarray:
        """Max |du/dt| per channel over each window; shape (m, K)."""
        t0s = np.asarray(t0s, dtype=float)
        t1s = np.asarray(t1s, dtype=float)
        out = np.zeros((self.m, t0s.size))
        if self.m == 0 or self.times.size < 2:
            return out
        dt = np.diff(self.times)
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.where(dt > 0, np.abs(np.diff(self.values, axis=1)) / np.where(dt > 0, dt, 1.0), 0.0)
        # segment j spans [times[j], times[j+1]]
        j0 = np.clip(np.searchsorted(self.times, t0s, side="right") - 1, 0, dt.size - 1)
        j1 = np.clip(np.searchsorted(self.times, t1s, side="left") - 1, 0, dt.size - 1)
        for k in range(t0s.size):
            out[:, k] = slopes[:, j0[k] : j1[k] + 1].max(axis=1)
        return out

    @property
    def T(self) -> float:
        return float(self.times[-1])


class InputSignalAutomaton:
    """An autonomous hybrid automaton whose ``outputs`` state components drive a plant."""

    def __init__(
        self,
        automaton: HybridAutomaton,
        initial_state,
        outputs: Sequence[int] = (0,),
        initial_mode: str | None = None,
        name: str = "",
        params: dict | None = None,
    ):
        if automaton.m != 0:
            raise ModelError("an input signal automaton must be autonomous (no inputs of its own)")
        self.automaton = automaton
        self.initial_state = np.asarray(initial_state, dtype=float)
        if self.initial_state.size != automaton.n:
            raise ModelError("initial input state has the wrong dimension")
        self.outputs = list(outputs)
        if any(not 0 <= k < automaton.n for k in self.outputs):
            raise ModelError("input automaton output index out of range")
        self.initial_mode = initial_mode or automaton.initial_mode(self.initial_state)
        self.name = name
        self.params = dict(params or {})

    @property
    def m(self) -> int:
        return len(self.outputs)

    @property
    def output_names(self) -> list:
        return [self.automaton.state_names[k] for k in self.outputs]

    def signal(self, T: float, max_step: float | None = None) -> InputSignal:
        """Simulate once and return the resulting piecewise-linear signal over [0, T]."""
        from .sim import point_simulate

        if max_step is None:
            max_step = max(T, 1e-9) / 2000.0
        # switch instants are pinned down tightly so levels do not overshoot
        res = point_simulate(self.automaton, self.initial_state, T, max_step=max_step, mode0=self.initial_mode,
                             loc_tol=1e-12 * max(T, 1.0))
        return InputSignal(res.times, res.states[self.outputs, :], self.output_names, res.modes)


# ---------------------------------------------------------------------------
# composition


def _shift(e: Expr, offset: int, input_map: Sequence[int] | None = None) -> Expr:
    def mapping(node):
        if isinstance(node, StateVar) and offset:
            return StateVar(node.index + offset)
        if isinstance(node, InputVar) and input_map is not None:
            return StateVar(input_map[node.index])
        return None

    return ex.substitute(e, mapping)


def compose(plant: HybridAutomaton, inp: InputSignalAutomaton) -> HybridAutomaton:
    """Product of a plant with its input automaton: a closed automaton over state (+) input state.

    Plant input ``j`` becomes state ``n + outputs[j]``.  A product transition fires
    when either factor's guard fires; the other factor keeps its mode.
    """
    if plant.m != inp.m:
        raise ModelError(f"plant expects {plant.m} inputs, input automaton provides {inp.m}")
    n, k = plant.n, inp.automaton.n
    in_map = [n + o for o in inp.outputs]

    def plant_pred(p: Predicate) -> Predicate:
        cx = list(p.coeffs_x) + [0.0] * k
        for j, c in enumerate(p.coeffs_u):
            cx[in_map[j]] += c
        return Predicate(cx, (), p.bound, p.strict)

    def input_pred(p: Predicate) -> Predicate:
        return Predicate([0.0] * n + list(p.coeffs_x), (), p.bound, p.strict)

    def pname(a, b):
        return f"{a}|{b}"

    modes = []
    for pm in plant.modes:
        pf = [_shift(fx, 0, in_map) for fx in pm.field]
        for qm in inp.automaton.modes:
            qf = [_shift(fx, n) for fx in qm.field]
            inv = [plant_pred(p) for p in pm.invariant] + [input_pred(p) for p in qm.invariant]
            modes.append(ContinuousMode(pname(pm.name, qm.name), pf + qf, inv))
    transitions = []
    for pm in plant.modes:
        for qm in inp.automaton.modes:
            for t in plant.outgoing(pm.name):
                transitions.append(
                    Transition(pname(pm.name, qm.name), pname(t.target, qm.name), [plant_pred(p) for p in t.guard])
                )
            for t in inp.automaton.outgoing(qm.name):
                transitions.append(
                    Transition(pname(pm.name, qm.name), pname(pm.name, t.target), [input_pred(p) for p in t.guard])
                )
    names = plant.state_names + inp.automaton.state_names
    return HybridAutomaton(modes, transitions, names, [], name=f"{plant.name}x{inp.name}")


# ---------------------------------------------------------------------------
# verification problem


@dataclass
class VerificationProblem:
    """Everything Algorithm-style verification needs: plant, fixed input, initial/unsafe sets."""

    plant: HybridAutomaton
    input: InputSignalAutomaton | InputSignal | None
    theta: Box
    unsafe: tuple
    T: float
    eps0: float = 0.01
    tau0: float = 0.05
    initial_mode: str | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.unsafe = tuple(self.unsafe)
        if self.theta.dim != self.plant.n:
            raise ModelError(f"initial set has dimension {self.theta.dim}, plant has {self.plant.n}")
        if not self.T >= 0:
            raise ModelError("time horizon must be non-negative")
        if not (self.eps0 > 0 and self.tau0 > 0):
            raise ModelError("eps0 and tau0 must be positive")
        m_in = 0 if self.input is None else self.input.m
        if m_in != self.plant.m:
            raise ModelError(f"plant expects {self.plant.m} inputs, input provides {m_in}")
        for p in self.unsafe:
            if len(p.coeffs_x) != self.plant.n or any(self.unsafe_input_coeffs(p)):
                raise ModelError("unsafe predicates must be over state variables only")
        if self.initial_mode is not None:
            self.plant.mode(self.initial_mode)

    @staticmethod
    def unsafe_input_coeffs(p: Predicate):
        return [c for c in p.coeffs_u if c != 0.0]

    def input_signal(self, max_step: float | None = None) -> InputSignal:
        if self.input is None:
            return InputSignal.empty()
        if isinstance(self.input, InputSignal):
            return self.input
        return self.input.signal(self.T, max_step)

    def with_(self, **changes) -> "VerificationProblem":
        import dataclasses

        return dataclasses.replace(self, **changes)


def classify_boxes(lo, hi, unsafe: Sequence[Predicate]) -> np.ndarray:
    """Vectorised :func:`check_unsafe_intersection` over K boxes (K x n); returns Overlap values."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    K = lo.shape[0]
    out = np.empty(K, dtype=object)
    if not unsafe:
        out[:] = Overlap.DISJOINT
        return out
    n = lo.shape[1]
    some_none = np.zeros(K, dtype=bool)
    all_all = np.ones(K, dtype=bool)
    unsure = np.zeros(K, dtype=bool)
    for p in unsafe:
        a = p.coeffs[:n]
        pmin = np.minimum(a * lo, a * hi)
        pmax = np.maximum(a * lo, a * hi)
        smin = pmin.sum(axis=1) - p.bound
        smax = pmax.sum(axis=1) - p.bound
        err = 4 * n * np.finfo(float).eps * ((np.abs(pmin) + np.abs(pmax)).sum(axis=1) + abs(p.bound))
        some_none |= smin > err
        all_all &= smax < -err
        unsure |= (np.abs(smin) <= err) | (np.abs(smax) <= err)
    for k in range(K):
        if unsure[k] or (not some_none[k] and not all_all[k] and len(unsafe) > 1):
            out[k] = check_unsafe_intersection(Box(lo[k], hi[k]), unsafe)
        elif some_none[k]:
            out[k] = Overlap.DISJOINT
        elif all_all[k]:
            out[k] = Overlap.CONTAINED
        else:
            out[k] = Overlap.OVERLAPPING
    return out
