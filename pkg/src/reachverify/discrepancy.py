"""Input-aware discrepancy functions and reachtubes.

For a fixed input ``u(t)`` and a simulation rectangle sequence, each step gets
a coarse enclosure ``S`` of all trajectories from the initial ball, an interval
Jacobian over ``S x U`` and a bound ``gamma`` on the largest eigenvalue of the
symmetric part of any member.  Chaining ``beta * exp(gamma * h)`` gives a
piecewise-exponential discrepancy, linear in the initial radius.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import interval as ia
from .expr import DomainError, Expr, eval_interval_many, jacobian
from .interval import Box, IntervalMatrix

_MACH = np.finfo(float).eps
_TINY = np.finfo(float).tiny


class EnclosureError(RuntimeError):
    """The coarse enclosure did not reach a fixed point; the segment must be shortened."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


# ---------------------------------------------------------------------------
# interval Jacobians and gamma


def jacobian_bounds(aut, q: int, lo, hi, ulo, uhi, wrt: str = "state"):
    """Interval Jacobian of mode ``q`` over K boxes; returns (K, n, cols) lower/upper arrays."""
    md = aut.modes[q]
    Jx, Ju = md.jacobian_exprs(aut.m)
    J = Jx if wrt == "state" else Ju
    n = aut.n
    cols = n if wrt == "state" else aut.m
    K = np.asarray(lo).shape[1]
    if cols == 0:
        z = np.zeros((K, n, 0))
        return z, z
    flat = [e for row in J for e in row]
    fl, fh = eval_interval_many(flat, lo, hi, ulo, uhi)
    return fl.T.reshape(K, n, cols), fh.T.reshape(K, n, cols)


def interval_jacobian(f: Sequence[Expr], S, U=None) -> IntervalMatrix:
    """Element-wise enclosure ``[A_lo, A_hi]`` of ``J_x`` over ``S x U``."""
    S = S if isinstance(S, Box) else Box.from_intervals(S)
    n = S.dim
    m = 0
    ulo = uhi = np.zeros(0)
    if U is not None:
        U = U if isinstance(U, Box) else Box.from_intervals(U)
        m, ulo, uhi = U.dim, U.lo, U.hi
    J = jacobian(list(f), n, m, "state")
    flat = [e for row in J for e in row]
    lo, hi = eval_interval_many(flat, S.lo, S.hi, ulo, uhi)
    return IntervalMatrix(lo.reshape(n, n), hi.reshape(n, n))


def _frobenius(A):
    """Scaled Frobenius norm over the last two axes (no underflow of tiny entries)."""
    s = np.max(np.abs(A), axis=(-1, -2))
    safe = np.where(s > 0, s, 1.0)
    return s * np.sqrt(np.sum((A / safe[..., None, None]) ** 2, axis=(-1, -2)))


def gamma_bound_batch(lower, upper) -> np.ndarray:
    """Upper bounds on max eig((A + A^T)/2) over stacks of interval matrices (K, n, n).

    Weyl: eig_max(Sym(C + D)) <= eig_max(Sym C) + ||Sym D||_2 and the spectral
    norm of the symmetric half-width is bounded by min(Frobenius, max row sum).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.shape[-1]
    C = 0.5 * (lower + upper)
    E = ia.up(np.maximum(upper - C, C - lower))
    S = 0.5 * (C + np.swapaxes(C, -1, -2))
    lam = np.linalg.eigvalsh(S)[..., -1]
    normC = _frobenius(C)
    # the absolute term covers subnormal underflow in the products below
    guard = (n + 2) * _MACH * normC + n * _TINY
    Es = ia.up(0.5 * (E + np.swapaxes(E, -1, -2)))
    frob = ia.up(_frobenius(Es) * (1 + 4 * n * _MACH) + _TINY)
    row = ia.up(np.max(np.sum(np.abs(Es), axis=-1), axis=-1))
    g = ia.up(ia.up(lam + guard) + np.minimum(frob, row))
    if not np.all(np.isfinite(g)):
        raise DomainError("gamma bound is not finite")
    return g


def gamma_bound(M: IntervalMatrix) -> float:
    """gamma >= max eig((A + A^T)/2) for every A in M."""
    return float(gamma_bound_batch(M.lower[None], M.upper[None])[0])


def lipschitz_bound(M: IntervalMatrix) -> float:
    """Bound on ||A||_2 over M: min(Frobenius, sqrt(||A||_1 ||A||_inf)) of the magnitude matrix."""
    A = np.maximum(np.abs(M.lower), np.abs(M.upper))
    frob = float(np.sqrt(np.sum(A * A)))
    mix = math.sqrt(float(A.sum(axis=0).max()) * float(A.sum(axis=1).max()))
    return float(ia.up(min(frob, mix)))


def coarse_enclosure(rects, delta: float, L: float, T_s: float) -> Box:
    """``hull(rects) (+) box(delta * e^{L T_s})``.

    ``rects`` is a list of Box, SimStep or (lo, hi) pairs.
    """
    los, his = [], []
    for r in rects:
        if hasattr(r, "rect"):
            r = r.rect
        if isinstance(r, Box):
            los.append(r.lo)
            his.append(r.hi)
        else:
            los.append(np.asarray(r[0], dtype=float))
            his.append(np.asarray(r[1], dtype=float))
    lo = np.min(los, axis=0)
    hi = np.max(his, axis=0)
    if delta == 0:
        return Box(lo, hi)
    rad = float(ia.up(delta * math.exp(L * T_s)))
    return Box(lo, hi).bloat(rad)


# ---------------------------------------------------------------------------
# piecewise discrepancy


@dataclass(frozen=True)
class DiscrepancyPiece:
    gamma: float
    t_start: float
    t_end: float
    beta_start: float

    def value(self, t: float) -> float:
        return self.beta_start * math.exp(self.gamma * (t - self.t_start))

    @property
    def beta_end(self) -> float:
        return self.value(self.t_end)


def _chain(gammas, H):
    """Unit-radius beta at step starts (K+1), rounded up on every product."""
    g = np.exp(np.clip(gammas * H, -745, 709)) * (1 + 4 * _MACH)
    out = np.empty(H.size + 1)
    out[0] = 1.0
    acc = 1.0
    with np.errstate(over="ignore"):
        for k in range(H.size):
            acc = float(ia.up(acc * g[k]))
            if not math.isfinite(acc):
                acc = math.inf
            out[k + 1] = acc
    return out


class PiecewiseDiscrepancy:
    """beta(delta, t): continuous, piecewise exponential, linear in delta."""

    def __init__(self, times, gammas, delta0: float, groups=None, modes_possible=None, S_lo=None, S_hi=None):
        self.times = np.asarray(times, dtype=float)
        self.step_gamma = np.asarray(gammas, dtype=float)
        self.delta0 = float(delta0)
        H = np.diff(self.times)
        self.unit = _chain(self.step_gamma, H)
        if groups is None:
            groups = [(k, k + 1) for k in range(H.size)]
        self.groups = list(groups)
        self.modes_possible = modes_possible
        self.S_lo = S_lo
        self.S_hi = S_hi

    @property
    def pieces(self) -> list:
        out = []
        for a, b in self.groups:
            out.append(DiscrepancyPiece(float(self.step_gamma[a]), float(self.times[a]), float(self.times[b]),
                                        self.delta0 * float(self.unit[a])))
        return out

    def __call__(self, delta: float, t: float) -> float:
        return delta * self._unit_at(t)

    def value(self, t: float) -> float:
        """beta(delta0, t)."""
        return self(self.delta0, t)

    def _unit_at(self, t: float) -> float:
        if self.times.size == 1 or t <= self.times[0]:
            return float(self.unit[0])
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(k, self.step_gamma.size - 1)
        return float(self.unit[k] * math.exp(self.step_gamma[k] * (t - self.times[k])))

    def window_max(self, delta: float) -> np.ndarray:
        """Max of beta(delta, .) over each step window (attained at an endpoint)."""
        if self.times.size == 1:
            return np.array([delta * self.unit[0]])
        return delta * np.maximum(self.unit[:-1], self.unit[1:])

    @property
    def gammas(self) -> np.ndarray:
        return self.step_gamma


def _modes_possible(aut, S_lo, S_hi, U_lo, U_hi) -> np.ndarray:
    """(Q, K) mask: mode invariant may intersect S x U (conservative)."""
    K = S_lo.shape[0]
    lo = np.hstack([S_lo, U_lo])
    hi = np.hstack([S_hi, U_hi])
    mask = np.ones((len(aut.modes), K), dtype=bool)
    for q, md in enumerate(aut.modes):
        for p in md.invariant:
            a = p.coeffs
            mn = np.sum(np.minimum(a * lo, a * hi), axis=1) - p.bound
            slack = 1e-12 * (1 + np.sum(np.abs(a * lo) + np.abs(a * hi), axis=1) + abs(p.bound))
            mask[q] &= mn <= slack
    return mask


def _step_gammas(trace, S_lo, S_hi, U_lo, U_hi):
    aut = trace.automaton
    K = S_lo.shape[0]
    if len(aut.modes) == 1:
        possible = np.ones((1, K), dtype=bool)
    else:
        possible = _modes_possible(aut, S_lo, S_hi, U_lo, U_hi)
        for k, s in enumerate(trace.step_modes):
            possible[list(s), k] = True
    Jl = np.full((K, aut.n, aut.n), np.inf)
    Jh = np.full((K, aut.n, aut.n), -np.inf)
    for q in range(len(aut.modes)):
        idx = np.nonzero(possible[q])[0]
        if idx.size == 0:
            continue
        jl, jh = jacobian_bounds(aut, q, S_lo[idx].T, S_hi[idx].T, U_lo[idx].T, U_hi[idx].T)
        Jl[idx] = np.minimum(Jl[idx], jl)
        Jh[idx] = np.maximum(Jh[idx], jh)
    return gamma_bound_batch(Jl, Jh), possible


def _merge_groups(gam, step_modes, max_len=10, rel=0.05):
    groups = []
    a = 0
    K = gam.size
    for k in range(1, K + 1):
        if k == K or k - a >= max_len or step_modes[k] != step_modes[a] or abs(gam[k] - gam[a]) > rel * max(abs(gam[a]), 1e-9):
            groups.append((a, k))
            a = k
    return groups


def discrepancy_for_trace(trace, delta: float, U_box=None, merge: bool = True, max_passes: int = 20) -> PiecewiseDiscrepancy:
    """Piecewise-exponential discrepancy along ``trace`` for initial radius ``delta``.

    Each step's enclosure ``S_k = R_k (+) box(rho_k)`` must contain every
    trajectory from the ball; ``rho_k`` is grown until
    ``rho_k >= max beta over the step`` holds for all steps simultaneously.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    K = len(trace)
    times = trace.times if len(trace.times) > 1 else np.array([0.0])
    if len(trace.times) == 1:
        return PiecewiseDiscrepancy(times, np.zeros(0), delta)
    H = np.diff(times)
    R_lo, R_hi = trace.lo, trace.hi
    if U_box is not None:
        ul, uh = (U_box.lo, U_box.hi) if isinstance(U_box, Box) else (np.atleast_1d(U_box[0]), np.atleast_1d(U_box[1]))
        U_lo = np.tile(np.asarray(ul, dtype=float), (K, 1))
        U_hi = np.tile(np.asarray(uh, dtype=float), (K, 1))
    else:
        U_lo, U_hi = trace.u_lo.reshape(K, -1), trace.u_hi.reshape(K, -1)
    rho = np.full(K, delta * 1.05 + 1e-12)
    geff = np.zeros(K)
    for _ in range(max_passes):
        S_lo = ia.down(R_lo - rho[:, None])
        S_hi = ia.up(R_hi + rho[:, None])
        try:
            gam, possible = _step_gammas(trace, S_lo, S_hi, U_lo, U_hi)
        except DomainError as exc:
            raise EnclosureError(f"Jacobian enclosure failed: {exc}") from exc
        groups = _merge_groups(gam, trace.step_modes) if merge else [(k, k + 1) for k in range(K)]
        geff = gam.copy()
        for a, b in groups:
            geff[a:b] = gam[a:b].max()
        unit = _chain(geff, H)
        need = delta * np.maximum(unit[:-1], unit[1:])
        if not np.all(np.isfinite(need)):
            bad = int(np.argmax(~np.isfinite(need)))
            raise EnclosureError("discrepancy overflowed", bad)
        if np.all(need <= rho):
            disc = PiecewiseDiscrepancy(times, geff, delta, groups, possible, S_lo, S_hi)
            return disc
        viol = need > rho
        rho = np.where(viol, need * 1.25 + 1e-12, rho)
    bad = int(np.argmax(viol))
    raise EnclosureError(f"coarse enclosure did not stabilise after {max_passes} passes", bad)


# ---------------------------------------------------------------------------
# reachtubes


@dataclass
class Reachtube:
    """Boxes ``O_i`` over windows ``[t_start_i, t_end_i]`` with the genuine mode and all possible modes."""

    t_start: np.ndarray
    t_end: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    modes: list
    possible_modes: list = field(default_factory=list)
    state_names: list = field(default_factory=list)

    def __len__(self):
        return self.lo.shape[0]

    @property
    def segments(self) -> list:
        return [(Box(self.lo[k], self.hi[k]), float(self.t_start[k]), float(self.t_end[k]), self.modes[k])
                for k in range(len(self))]

    def diameters(self) -> np.ndarray:
        return np.linalg.norm(self.hi - self.lo, axis=1)

    def final_diameter(self) -> float:
        return float(self.diameters()[-1])

    def contains(self, t: float, x, tol: float = 0.0) -> bool:
        """Some segment whose window holds ``t`` contains ``x``."""
        x = np.asarray(x, dtype=float)
        idx = np.nonzero((self.t_start <= t) & (t <= self.t_end))[0]
        for k in idx:
            if np.all(x >= self.lo[k] - tol) and np.all(x <= self.hi[k] + tol):
                return True
        return False

    def contains_many(self, ts, xs) -> np.ndarray:
        """Vectorised :meth:`contains` for points ``xs`` (P, n) at times ``ts`` (P,)."""
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float)
        ok = np.zeros(ts.size, dtype=bool)
        k_lo = np.searchsorted(self.t_end, ts, side="left")
        k_hi = np.searchsorted(self.t_start, ts, side="right")
        for off in range(0, 3):
            for k_arr in (k_lo + off, k_lo - off):
                valid = (k_arr >= 0) & (k_arr < len(self)) & (k_arr < k_hi)
                k = np.clip(k_arr, 0, len(self) - 1)
                inside = valid & (self.t_start[k] <= ts) & (ts <= self.t_end[k])
                inside &= np.all((xs >= self.lo[k]) & (xs <= self.hi[k]), axis=1)
                ok |= inside
        rest = np.nonzero(~ok)[0]
        for p in rest:
            ok[p] = self.contains(ts[p], xs[p])
        return ok

    def hull(self) -> Box:
        return Box(self.lo.min(axis=0), self.hi.max(axis=0))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.lo.shape[1]
        w.writerow(["t_start", "t_end", "mode"] + [f"lo_{i + 1}" for i in range(n)] + [f"hi_{i + 1}" for i in range(n)])
        for k in range(len(self)):
            w.writerow([repr(float(self.t_start[k])), repr(float(self.t_end[k])), self.modes[k]]
                       + [repr(float(v)) for v in self.lo[k]] + [repr(float(v)) for v in self.hi[k]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def bloat(trace, delta: float, eps: float, disc: PiecewiseDiscrepancy) -> Reachtube:
    """``O_k = R_k (+) box(max beta(delta + eps, t) over the step window)``.

    Our rectangles already enclose the trajectory over the whole step window,
    so ``R_k`` plays the part of ``hull(R_{k-1}, R_k)``.
    """
    names = [md.name for md in trace.automaton.modes]
    rad = disc.window_max(delta + eps) if (delta + eps) > 0 else np.zeros(len(trace))
    rad = np.asarray(rad, dtype=float)[: len(trace)]
    if np.any(rad > 0):
        lo = ia.down(trace.lo - rad[:, None])
        hi = ia.up(trace.hi + rad[:, None])
    else:
        lo, hi = trace.lo.copy(), trace.hi.copy()
    modes = [names[s[-1]] for s in trace.step_modes]
    if disc.modes_possible is not None and len(names) > 1:
        possible = [tuple(names[q] for q in np.nonzero(disc.modes_possible[:, k])[0]) for k in range(len(trace))]
    else:
        possible = [tuple(names[q] for q in sorted(set(s))) for s in trace.step_modes]
    return Reachtube(np.array(trace.t_start, dtype=float), np.array(trace.t_end, dtype=float), lo, hi, modes, possible,
                     list(trace.automaton.state_names))


def reachtube(trace, delta: float, eps: float = 0.0, **kw):
    """Convenience: discrepancy for radius ``delta + eps`` followed by :func:`bloat`."""
    disc = discrepancy_for_trace(trace, delta + eps, **kw)
    return bloat(trace, delta, eps, disc), disc
