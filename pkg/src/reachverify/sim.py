"""Validated simulation: time-stamped rectangles that provably contain one trajectory.

Two passes.  A point pass marches Dormand-Prince 5th-order steps with
embedded 4th-order error estimates (inflated by a safety factor of 2), bounded by
``tau`` in time and by half the precision ``eps`` in motion.  A vectorised
validation pass then, for every step at once,

* finds an a-priori enclosure ``B`` of all flows from the error box ``X_k``
  over the step (Picard inclusion ``X_k + [0,h] F(B) <= B``),
* bounds the one-sided Lipschitz constant (log-norm) over ``B x U_k``,
* propagates a global error ``err_{k+1} = e^{mu h} err_k + le_k`` and
* encloses the trajectory between step points by the hull of the two error
  boxes plus a chord remainder ``h^2/8 * sup|x''|``.

If an assumption fails (error larger than assumed, rectangle wider than
``eps``) the point pass is repeated with tighter settings.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import interval as ia
from .expr import DomainError, eval_interval_many
from .interval import Box
from .model import ContinuousMode, HybridAutomaton, InputSignal

SAFETY = 2.0
_MACH = np.finfo(float).eps


class SimulationError(RuntimeError):
    """The simulator could not produce a trace."""


class StiffnessError(SimulationError):
    """Step size fell below the configured floor."""


class LivelockError(SimulationError):
    """Too many mode switches inside one tau window (chattering guard)."""


class InvariantError(SimulationError):
    """The state left its mode's invariant and no outgoing guard was enabled."""


class ValidationError(SimulationError):
    """The a-posteriori enclosure could not be established within the retry budget."""


# Dormand-Prince 5(4) with the embedded 4th-order error estimate
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_DP_E = tuple(b5 - b4 for b5, b4 in zip(_DP_B + (0.0,), _DP_B4))


def _rk5(raw, x, t, h, uf, k1=None):
    ks = [k1 if k1 is not None else raw(x, uf(t))]
    n = len(x)
    for s in range(1, 6):
        a = _DP_A[s]
        xs = [x[i] + h * sum(a[j] * ks[j][i] for j in range(s)) for i in range(n)]
        ks.append(raw(xs, uf(t + _DP_C[s] * h)))
    return [x[i] + h * sum(_DP_B[j] * ks[j][i] for j in range(6)) for i in range(n)]


def _dp_step(raw, x, t, h, uf, k1=None):
    """Embedded Dormand-Prince step: (5th-order result, error bound, f at start, f at end)."""
    if k1 is None:
        k1 = raw(x, uf(t))
    ks = [k1]
    n = len(x)
    for s in range(1, 6):
        a = _DP_A[s]
        xs = [x[i] + h * sum(a[j] * ks[j][i] for j in range(s)) for i in range(n)]
        ks.append(raw(xs, uf(t + _DP_C[s] * h)))
    y = [x[i] + h * sum(_DP_B[j] * ks[j][i] for j in range(6)) for i in range(n)]
    k7 = raw(y, uf(t + h))
    ks.append(k7)
    # |y5 - y4| bounds the 5th-order error with a wide margin when h is in the asymptotic range
    diff = math.sqrt(sum((h * sum(_DP_E[j] * ks[j][i] for j in range(7))) ** 2 for i in range(n)))
    scale = max(1.0, math.sqrt(sum(v * v for v in y)))
    le = SAFETY * diff + 16.0 * n * _MACH * scale
    return y, le, k1, k7


def _safe_raw(raw):
    def f(x, u):
        try:
            out = raw(x, u)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"vector field evaluation failed: {exc}") from None
        for v in out:
            if not math.isfinite(v):
                raise DomainError("vector field evaluation produced a non-finite value")
        return out

    return f


def input_function(sig: InputSignal | None):
    """Fast scalar evaluator ``t -> tuple`` of a piecewise-linear input signal."""
    if sig is None or sig.m == 0:
        return lambda t: ()
    ts = sig.times.tolist()
    vs = [tuple(col) for col in sig.values.T.tolist()]
    last = len(ts) - 1
    if last == 0:
        const = vs[0]
        return lambda t: const

    def uf(t):
        i = bisect_right(ts, t) - 1
        if i < 0:
            return vs[0]
        if i >= last:
            return vs[last]
        t0, t1 = ts[i], ts[i + 1]
        a, b = vs[i], vs[i + 1]
        w = (t - t0) / (t1 - t0)
        return tuple(p + w * (q - p) for p, q in zip(a, b))

    return uf


def as_signal(u, T: float = 1.0) -> InputSignal | None:
    if u is None or isinstance(u, InputSignal):
        return u
    return InputSignal.constant(np.atleast_1d(np.asarray(u, dtype=float)), T)


class _Guards:
    """Outgoing transitions per mode as plain tuples for fast checks."""

    def __init__(self, aut: HybridAutomaton):
        self.out = []
        for md in aut.modes:
            lst = []
            for tr in aut.outgoing(md.name):
                preds = [(p.coeffs_x, p.coeffs_u, p.bound, p.strict) for p in tr.guard]
                lst.append((aut.mode_index(tr.target), preds))
            self.out.append(lst)
        self.inv = [[(p.coeffs_x, p.coeffs_u, p.bound, p.strict) for p in md.invariant] for md in aut.modes]

    @staticmethod
    def _holds(preds, x, u, tol=0.0):
        for cx, cu, b, strict in preds:
            g = sum(c * v for c, v in zip(cx, x)) + sum(c * v for c, v in zip(cu, u)) - b
            if g > tol or (strict and g == tol):
                return False
        return True

    def violated(self, q, x, u, tol=1e-9):
        """True when mode ``q``'s invariant fails by more than ``tol``."""
        for cx, cu, b, _ in self.inv[q]:
            g = sum(c * v for c, v in zip(cx, x)) + sum(c * v for c, v in zip(cu, u)) - b
            if g > tol * (1.0 + abs(b)):
                return True
        return False

    def first_enabled(self, q, x, u, skip=(), tol=0.0):
        for j, (target, preds) in enumerate(self.out[q]):
            if j not in skip and self._holds(preds, x, u, tol):
                return j, target
        return None

    def coeff_scale(self, q) -> float:
        return max((abs(c) for _, preds in self.out[q] for cx, cu, _, _ in preds for c in cx + cu), default=0.0)

    def enabled_set(self, q, x, u):
        return {j for j, (_, preds) in enumerate(self.out[q]) if self._holds(preds, x, u)}


@dataclass
class _March:
    times: list
    points: list
    le: list
    step_modes: list  # tuple of mode indices active during the step
    switch_dt: list
    modes: list  # mode index at each knot
    events: list


def _march(aut, x0, sig, T, *, hmax, tol, motion, mode0, switching, h_floor, loc_tol, livelock=10_000,
           align=False):
    uf = input_function(sig)
    # with align, steps end on the input's knots so no step straddles a kink
    knots = sig.times.tolist() if (align and sig is not None and sig.m and sig.times.size > 1) else []
    knot_eps = 1e-12 * max(T, 1.0)
    raws = [_safe_raw(md.f.raw) for md in aut.modes]
    guards = _Guards(aut)
    q = mode0
    x = [float(v) for v in x0]
    t = 0.0
    out = _March([0.0], [tuple(x)], [], [], [], [q], [])
    recent = deque()
    suppressed = set()
    fx = raws[q](x, uf(0.0))
    k1 = fx
    speed = math.sqrt(sum(v * v for v in fx))
    h = hmax if speed == 0 else min(hmax, motion / speed)
    h = max(h, 1e-6 * hmax)
    while T - t > 1e-13 * max(T, 1.0):
        h = min(h, hmax)
        if T - t - h <= 1e-9 * h:
            h = T - t
        if knots:
            j = bisect_right(knots, t + knot_eps)
            if j < len(knots) and knots[j] < t + h:
                h = knots[j] - t
        try:
            y, le, k1, k7 = _dp_step(raws[q], x, t, h, uf, k1)
        except DomainError:
            # an oversized trial step can leave the field's domain; retry smaller
            h *= 0.25
            if h < h_floor:
                raise
            continue
        dx = math.sqrt(sum((a - b) ** 2 for a, b in zip(y, x)))
        # an estimate at rounding level is accepted whatever the step length (it is still carried in le)
        rnd = 32.0 * len(x) * _MACH * max(1.0, max(abs(v) for v in y))
        ok_err = le <= tol * h or le <= rnd
        if not ok_err or dx > motion:
            f_err = 0.9 * (tol * h / le) ** 0.2 if not ok_err else 1.0
            f_mot = 0.9 * motion / dx if dx > motion else 1.0
            h *= max(0.1, min(f_err, f_mot, 0.9))
            if h < h_floor:
                raise StiffnessError(f"step size {h:.3e} below floor {h_floor:.3e} at t={t:.6g} (mode {aut.modes[q].name})")
            continue
        hit = guards.first_enabled(q, y, uf(t + h), suppressed) if switching else None
        leaving = hit is None and switching and guards.violated(q, y, uf(t + h))
        if hit is None and not leaving:
            out.times.append(t + h)
            out.points.append(tuple(y))
            out.le.append(le)
            out.step_modes.append((q,))
            out.switch_dt.append(0.0)
            out.modes.append(q)
            t += h
            x = y
            k1 = k7
            suppressed = set()
            grow = 5.0 if le <= rnd else min(5.0, 0.9 * (tol * h / le) ** 0.2)
            h *= max(1.0, grow) if dx < 0.5 * motion else 1.0
            continue
        # localize the crossing (or the invariant exit) by bisection on the step length
        a, b = 0.0, h
        ya = x
        while b - a > loc_tol:
            mid = 0.5 * (a + b)
            ym = _rk5(raws[q], x, t, mid, uf, k1)
            um = uf(t + mid)
            if guards.first_enabled(q, ym, um, suppressed) is None and not guards.violated(q, ym, um):
                a, ya = mid, ym
            else:
                b = mid
        y, le, _, _ = _dp_step(raws[q], x, t, b, uf, k1)
        ub = uf(t + b)
        hit = guards.first_enabled(q, y, ub, suppressed)
        if hit is None:
            # a thin guard region may lie inside [a, b]; allow the predicate drift over that bracket
            ua = uf(t + a)
            drift = sum(abs(p - r) for p, r in zip(y, ya)) + sum(abs(p - r) for p, r in zip(ub, ua))
            hit = guards.first_enabled(q, y, ub, suppressed, tol=2.0 * guards.coeff_scale(q) * drift + 1e-12)
        if hit is None:
            raise InvariantError(f"left the invariant of mode {aut.modes[q].name} near t={t + b:.6g} "
                                 f"with no enabled transition")
        target = hit[1]
        out.times.append(t + b)
        out.points.append(tuple(y))
        out.le.append(le)
        out.step_modes.append((q, target))
        out.switch_dt.append(b - a)
        out.modes.append(target)
        out.events.append((t + b, aut.modes[q].name, aut.modes[target].name))
        t += b
        x = y
        q = target
        k1 = raws[q](x, uf(t))
        suppressed = guards.enabled_set(q, x, uf(t))
        recent.append(t)
        while recent and recent[0] < t - hmax:
            recent.popleft()
        if len(recent) > livelock:
            raise LivelockError(f"more than {livelock} mode switches within tau={hmax:g} near t={t:.6g}")
    return out


# ---------------------------------------------------------------------------
# point simulation


@dataclass
class PointTrace:
    times: np.ndarray
    states: np.ndarray  # (n, K+1)
    modes: list  # mode name at each time stamp
    events: list

    def at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, row) for row in self.states])


def point_simulate(
    automaton: HybridAutomaton,
    x0,
    T: float,
    max_step: float = 0.01,
    mode0: str | None = None,
    u=None,
    tol: float = 1e-10,
    switching: bool = True,
    loc_tol: float | None = None,
) -> PointTrace:
    """Plain adaptive simulation with urgent guard semantics (no enclosure).

    Guard crossings are localised in time to ``loc_tol`` (default ``max_step / 64``).
    """
    sig = as_signal(u, T)
    q0 = automaton.mode_index(mode0 or automaton.initial_mode(x0, input_function(sig)(0.0)))
    if T <= 0:
        return PointTrace(np.zeros(1), np.asarray(x0, dtype=float).reshape(-1, 1), [automaton.modes[q0].name], [])
    mr = _march(
        automaton, x0, sig, T, hmax=max_step, tol=tol, motion=math.inf, mode0=q0, switching=switching,
        h_floor=1e-14 * max(T, 1.0), loc_tol=max_step / 64 if loc_tol is None else loc_tol, align=True,
    )
    names = [automaton.modes[q].name for q in mr.modes]
    return PointTrace(np.array(mr.times), np.array(mr.points).T, names, mr.events)


# ---------------------------------------------------------------------------
# validated traces


@dataclass(frozen=True)
class SimStep:
    rect: Box
    t_start: float
    t_end: float
    mode: str
    modes: tuple = ()


class SimTrace:
    """An (eps, tau, T)-simulation stored as arrays.

    ``lo``/``hi`` (K x n) are the rectangles, ``times`` (K+1) the time stamps,
    ``points`` the numerical solution at the stamps and ``errors`` its
    validated distance bound to the true trajectory.
    """

    def __init__(self, automaton, x0, times, points, errors, lo, hi, step_modes, u_lo, u_hi, u_slope,
                 eps, tau, T, events=(), stats=None):
        self.automaton = automaton
        self.x0 = np.asarray(x0, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.points = np.asarray(points, dtype=float)
        self.errors = np.asarray(errors, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.step_modes = [tuple(s) for s in step_modes]
        self.u_lo = np.asarray(u_lo, dtype=float)
        self.u_hi = np.asarray(u_hi, dtype=float)
        self.u_slope = np.asarray(u_slope, dtype=float)
        self.eps = float(eps)
        self.tau = float(tau)
        self.T = float(T)
        self.events = list(events)
        self.stats = dict(stats or {})

    def __len__(self):
        return self.lo.shape[0]

    @property
    def n(self) -> int:
        return self.lo.shape[1]

    @property
    def t_start(self) -> np.ndarray:
        return self.times[:-1] if len(self.times) > 1 else self.times

    @property
    def t_end(self) -> np.ndarray:
        return self.times[1:] if len(self.times) > 1 else self.times

    @property
    def mode_names(self) -> list:
        """Mode at the end of each step (the mode the point trajectory is in)."""
        return [self.automaton.modes[s[-1]].name for s in self.step_modes]

    @property
    def steps(self) -> list:
        names = [md.name for md in self.automaton.modes]
        return [
            SimStep(Box(self.lo[k], self.hi[k]), float(a), float(b), names[s[-1]], tuple(names[i] for i in s))
            for k, (a, b, s) in enumerate(zip(self.t_start, self.t_end, self.step_modes))
        ]

    def diameters(self) -> np.ndarray:
        return np.linalg.norm(self.hi - self.lo, axis=1)

    def max_diameter(self) -> float:
        return float(self.diameters().max()) if len(self) else 0.0

    def final_rect(self) -> Box:
        return Box(self.lo[-1], self.hi[-1])

    def rect_index(self, t: float) -> int:
        k = int(np.searchsorted(self.t_end, t, side="left"))
        return min(k, len(self) - 1)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.n
        w.writerow(["t_start", "t_end", "mode"] + [f"lo_{i + 1}" for i in range(n)] + [f"hi_{i + 1}" for i in range(n)])
        for k, name in enumerate(self.mode_names):
            w.writerow([repr(float(self.t_start[k])), repr(float(self.t_end[k])), name]
                       + [repr(float(v)) for v in self.lo[k]] + [repr(float(v)) for v in self.hi[k]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def __repr__(self):
        return f"SimTrace(steps={len(self)}, T={self.T:g}, eps={self.eps:g}, tau={self.tau:g})"


def _field_hull(aut, step_modes, lo, hi, ulo, uhi):
    """Interval hull of all fields active in each step, over boxes (n, K)."""
    K = lo.shape[1]
    F_lo = np.full((aut.n, K), np.inf)
    F_hi = np.full((aut.n, K), -np.inf)
    for q, idx in _mode_groups(step_modes).items():
        fl, fh = eval_interval_many(aut.modes[q].field, lo[:, idx], hi[:, idx], ulo[:, idx], uhi[:, idx])
        F_lo[:, idx] = np.minimum(F_lo[:, idx], fl)
        F_hi[:, idx] = np.maximum(F_hi[:, idx], fh)
    return F_lo, F_hi


def _mode_groups(step_modes) -> dict:
    groups: dict = {}
    for k, s in enumerate(step_modes):
        for q in set(s):
            groups.setdefault(q, []).append(k)
    return {q: np.array(v) for q, v in groups.items()}


def _jac_hull(aut, step_modes, lo, hi, ulo, uhi, wrt="state"):
    """Interval Jacobian hull per step; arrays (K, n, n) or (K, n, m)."""
    from .discrepancy import jacobian_bounds

    K = lo.shape[1]
    cols = aut.n if wrt == "state" else aut.m
    J_lo = np.full((K, aut.n, cols), np.inf)
    J_hi = np.full((K, aut.n, cols), -np.inf)
    for q, idx in _mode_groups(step_modes).items():
        jl, jh = jacobian_bounds(aut, q, lo[:, idx], hi[:, idx], ulo[:, idx], uhi[:, idx], wrt)
        J_lo[idx] = np.minimum(J_lo[idx], jl)
        J_hi[idx] = np.maximum(J_hi[idx], jh)
    return J_lo, J_hi


def _picard(aut, step_modes, X_lo, X_hi, H, ulo, uhi, max_iter=12):
    """A-priori enclosures for each step; returns (B_lo, B_hi, ok mask, F_lo, F_hi). Arrays (n, K)."""
    x0l, x0h = X_lo[:, :-1], X_hi[:, :-1]
    B_lo = np.minimum(x0l, X_lo[:, 1:])
    B_hi = np.maximum(x0h, X_hi[:, 1:])
    w = B_hi - B_lo
    B_lo = ia.down(B_lo - 0.1 * w - 1e-12 * (1 + np.abs(B_lo)))
    B_hi = ia.up(B_hi + 0.1 * w + 1e-12 * (1 + np.abs(B_hi)))
    K = H.size
    ok = np.zeros(K, dtype=bool)
    out_lo, out_hi = B_lo.copy(), B_hi.copy()
    F_out_lo = np.zeros_like(B_lo)
    F_out_hi = np.zeros_like(B_lo)
    todo = np.arange(K)
    for _ in range(max_iter):
        if todo.size == 0:
            break
        sm = [step_modes[k] for k in todo]
        try:
            F_lo, F_hi = _field_hull(aut, sm, B_lo[:, todo], B_hi[:, todo], ulo[:, todo], uhi[:, todo])
        except DomainError:
            break
        h = H[todo]
        N_lo = ia.down(x0l[:, todo] + ia.down(h * np.minimum(F_lo, 0.0)))
        N_hi = ia.up(x0h[:, todo] + ia.up(h * np.maximum(F_hi, 0.0)))
        inside = np.all((N_lo >= B_lo[:, todo]) & (N_hi <= B_hi[:, todo]), axis=0)
        done = todo[inside]
        out_lo[:, done] = N_lo[:, inside]
        out_hi[:, done] = N_hi[:, inside]
        F_out_lo[:, done] = F_lo[:, inside]
        F_out_hi[:, done] = F_hi[:, inside]
        ok[done] = True
        rest = todo[~inside]
        nl, nh = N_lo[:, ~inside], N_hi[:, ~inside]
        bl = np.minimum(B_lo[:, rest], nl)
        bh = np.maximum(B_hi[:, rest], nh)
        ww = bh - bl
        B_lo[:, rest] = ia.down(bl - 0.5 * ww - 1e-12)
        B_hi[:, rest] = ia.up(bh + 0.5 * ww + 1e-12)
        todo = rest
    return out_lo, out_hi, ok, F_out_lo, F_out_hi


def _validate(aut, sig, mr: _March, r: float, eps: float):
    from .discrepancy import gamma_bound_batch

    times = np.array(mr.times)
    pts = np.array(mr.points).T  # (n, K+1)
    H = np.diff(times)
    K = H.size
    m = aut.m
    if sig is not None and sig.m:
        ulo, uhi = sig.boxes(times[:-1], times[1:])
        uslope = sig.slope_bounds(times[:-1], times[1:])
    else:
        ulo = uhi = np.zeros((0, K))
        uslope = np.zeros((0, K))
    X_lo = ia.down(pts - r)
    X_hi = ia.up(pts + r)
    B_lo, B_hi, ok, F_lo, F_hi = _picard(aut, mr.step_modes, X_lo, X_hi, H, ulo, uhi)
    if not ok.all():
        return {"status": "picard", "bad": np.nonzero(~ok)[0]}
    try:
        Jl, Jh = _jac_hull(aut, mr.step_modes, B_lo, B_hi, ulo, uhi, "state")
        mu = gamma_bound_batch(Jl, Jh)
        if m:
            Ul, Uh = _jac_hull(aut, mr.step_modes, B_lo, B_hi, ulo, uhi, "input")
    except DomainError:
        return {"status": "picard", "bad": np.arange(K)}
    switch_dt = np.array(mr.switch_dt)
    sw = np.zeros(K)
    diffs = {}
    for k in np.nonzero(switch_dt > 0)[0]:
        pair = (mr.step_modes[k][0], mr.step_modes[k][-1])
        if pair not in diffs:
            # identical components cancel; the rest is bounded as one expression
            diffs[pair] = [ex.sub(a, b) if a != b else ex.ZERO
                           for a, b in zip(aut.modes[pair[0]].field, aut.modes[pair[1]].field)]
        bl, bh = B_lo[:, k : k + 1], B_hi[:, k : k + 1]
        d_lo, d_hi = eval_interval_many(diffs[pair], bl, bh, ulo[:, k : k + 1], uhi[:, k : k + 1])
        d = np.maximum(np.abs(d_lo), np.abs(d_hi))
        sw[k] = ia.up(switch_dt[k] * float(np.linalg.norm(d)))
    le = np.array(mr.le)
    growth = np.exp(np.clip(mu * H, -700, 700))
    err = np.zeros(K + 1)
    e = 0.0
    for k in range(K):
        e = float(ia.up(ia.up(growth[k] * e) + le[k] + sw[k]))
        err[k + 1] = e
    if err.max() > r:
        return {"status": "error", "ratio": float(err.max() / r)}
    # rectangles from the actual error radii
    E_lo = ia.down(pts - err)
    E_hi = ia.up(pts + err)
    H_lo = np.minimum(E_lo[:, :-1], E_lo[:, 1:])
    H_hi = np.maximum(E_hi[:, :-1], E_hi[:, 1:])
    Jabs = np.maximum(np.abs(Jl), np.abs(Jh))  # (K, n, n)
    Fabs = np.maximum(np.abs(F_lo), np.abs(F_hi)).T  # (K, n)
    acc = np.einsum("kij,kj->ki", Jabs, Fabs)
    if m:
        Uabs = np.maximum(np.abs(Ul), np.abs(Uh))
        acc = acc + np.einsum("kij,kj->ki", Uabs, uslope.T)
    rem = ia.up(acc * (H * H / 8.0)[:, None]).T  # (n, K)
    rem[:, switch_dt > 0] = np.inf
    R_lo = np.maximum(B_lo, ia.down(H_lo - rem))
    R_hi = np.minimum(B_hi, ia.up(H_hi + rem))
    diam = np.linalg.norm(R_hi - R_lo, axis=0)
    if diam.max() > eps:
        return {"status": "wide", "ratio": float(diam.max() / eps)}
    return {
        "status": "ok", "times": times, "points": pts.T, "errors": err, "lo": R_lo.T, "hi": R_hi.T,
        "u_lo": ulo.T, "u_hi": uhi.T, "u_slope": uslope.T, "mu": mu,
    }


def _resolve(system) -> HybridAutomaton:
    if isinstance(system, ContinuousMode):
        return HybridAutomaton([system], [])
    if isinstance(system, HybridAutomaton):
        return system
    raise TypeError("expected a ContinuousMode or HybridAutomaton")


def validated_simulate(
    system,
    x0,
    u,
    T: float,
    eps: float,
    tau: float,
    mode0: str | None = None,
    switching: bool = True,
    h_floor: float | None = None,
    max_retries: int = 10,
) -> SimTrace:
    """Shared driver for :func:`simulate` and :func:`hybrid_simulate`."""
    aut = _resolve(system)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != aut.n:
        raise ValueError(f"initial state has dimension {x0.size}, system has {aut.n}")
    if not (eps > 0 and tau > 0):
        raise ValueError("eps and tau must be positive")
    sig = as_signal(u, max(T, tau))
    if aut.m and (sig is None or sig.m != aut.m):
        raise ValueError(f"system needs {aut.m} inputs")
    uf = input_function(sig)
    q0 = aut.mode_index(mode0) if mode0 is not None else aut.mode_index(aut.initial_mode(x0, uf(0.0)))
    names = [q0]
    if T <= 0:
        u0 = np.array(uf(0.0), dtype=float)
        z = np.zeros((1, 0)) if not aut.m else u0[None, :]
        return SimTrace(aut, x0, [0.0], x0[None, :], [0.0], x0[None, :], x0[None, :], [tuple(names)],
                        z, z, np.zeros_like(z), eps, tau, 0.0)
    r = 0.1 * eps / math.sqrt(aut.n)
    tol = 0.2 * r / max(T, tau)
    motion = 0.5 * eps
    hmax = tau
    loc = tau / 64
    floor = h_floor if h_floor is not None else 1e-9 * max(T, 1.0)
    history = []
    for attempt in range(max_retries):
        mr = _march(aut, x0, sig, T, hmax=hmax, tol=tol, motion=motion, mode0=q0, switching=switching,
                    h_floor=floor, loc_tol=loc)
        res = _validate(aut, sig, mr, r, eps)
        history.append((res["status"], len(mr.le)))
        if res["status"] == "ok":
            return SimTrace(aut, x0, res["times"], res["points"], res["errors"], res["lo"], res["hi"],
                            mr.step_modes, res["u_lo"], res["u_hi"], res["u_slope"], eps, tau, T, mr.events,
                            {"attempts": attempt + 1, "history": history, "mu": res["mu"]})
        if res["status"] == "error":
            tol *= max(1e-3, min(0.5, 0.5 / res["ratio"]))
            loc *= max(1e-3, min(0.5, 0.5 / res["ratio"]))
        elif res["status"] == "wide":
            motion *= 0.5
            hmax *= 0.5
        else:
            hmax *= 0.5
            motion *= 0.5
        if hmax < floor:
            raise StiffnessError(f"step bound {hmax:.3e} fell below floor while validating")
    raise ValidationError(f"could not validate the simulation after {max_retries} attempts: {history}")


def simulate(system, x0, u, T: float, eps: float, tau: float, mode0: str | None = None, **kw) -> SimTrace:
    """(eps, tau, T)-simulation of a single mode (transitions are ignored)."""
    return validated_simulate(system, x0, u, T, eps, tau, mode0, switching=False, **kw)


def hybrid_simulate(x0, u, T: float, eps: float, tau: float, automaton: HybridAutomaton, mode0: str | None = None, **kw) -> SimTrace:
    """(eps, tau, T)-simulation following urgent guarded transitions."""
    return validated_simulate(automaton, x0, u, T, eps, tau, mode0, switching=True, **kw)


def exact_points_inside(trace: SimTrace, fn, samples_per_step: int = 3) -> bool:
    """Check a closed-form solution ``fn(t) -> state`` against every rectangle."""
    for k in range(len(trace)):
        for s in np.linspace(trace.t_start[k], trace.t_end[k], samples_per_step):
            x = np.asarray(fn(s))
            if np.any(x < trace.lo[k]) or np.any(x > trace.hi[k]):
                return False
    return True

