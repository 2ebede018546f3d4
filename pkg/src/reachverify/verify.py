"""Cover, simulate, bloat, classify, refine.

The initial set is covered by grid cells, each owning a triple ``<x, delta,
eps>`` whose ball contains the cell.  A cell whose reachtube misses the
unsafe set is stored; a simulation rectangle inside the unsafe set is a
counterexample; anything else is split with ``delta/2, eps/2, tau/2``.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discrepancy import EnclosureError, Reachtube, _step_gammas, bloat, discrepancy_for_trace
from .expr import DomainError
from .interval import Box
from .model import (
    InputSignal,
    Overlap,
    VerificationProblem,
    check_unsafe_intersection,
    classify_boxes,
    compose,
)
from .sim import SimTrace, SimulationError, hybrid_simulate, input_function, point_simulate


@dataclass(frozen=True)
class CoverTriple:
    center: tuple
    delta: float
    eps: float
    tau: float = 0.0
    depth: int = 0
    cell_lo: tuple = ()
    cell_hi: tuple = ()

    @property
    def cell(self) -> Box:
        return Box(self.cell_lo, self.cell_hi)


def _grid(lo, hi, delta):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    spacing = 2.0 * delta / math.sqrt(n)
    w = hi - lo
    counts = [max(1, int(math.ceil(wi / spacing * (1 - 1e-12)))) if wi > 0 else 1 for wi in w]
    axes = []
    for i, c in enumerate(counts):
        edges = np.linspace(lo[i], hi[i], c + 1)
        edges[0], edges[-1] = lo[i], hi[i]
        axes.append(list(zip(edges[:-1], edges[1:])))
    return axes


def cover(theta: Box, delta: float, eps: float, tau: float = 0.0, depth: int = 0) -> list:
    """Grid cells of ``theta`` with spacing at most ``2 delta / sqrt(n)``; each cell lies in its triple's ball."""
    if not (delta > 0 and eps > 0):
        raise ValueError("delta and eps must be positive")
    out = []
    for cell in itertools.product(*_grid(theta.lo, theta.hi, delta)):
        clo = tuple(float(a) for a, _ in cell)
        chi = tuple(float(b) for _, b in cell)
        c = tuple(0.5 * (a + b) for a, b in zip(clo, chi))
        out.append(CoverTriple(c, delta, eps, tau, depth, clo, chi))
    return out


def cover_ball(center, radius: float, delta: float, eps: float, tau: float = 0.0, depth: int = 0) -> list:
    """Triples whose balls cover ``B_radius(center)`` (via its bounding box)."""
    c = np.asarray(center, dtype=float)
    return cover(Box(c - radius, c + radius), delta, eps, tau, depth)


def refine(tr: CoverTriple) -> list:
    return cover(tr.cell, tr.delta / 2, tr.eps / 2, tr.tau / 2, tr.depth + 1)


class Verdict(str, enum.Enum):
    SAFE = "SAFE"
    UNSAFE = "UNSAFE"
    BUDGET_EXCEEDED = "BUDGET_EXCEEDED"


class TubeStore:
    """Append-only collection of reachtubes verified disjoint from the unsafe set."""

    def __init__(self):
        self.entries: list = []

    def add(self, triple: CoverTriple, tube: Reachtube):
        self.entries.append((triple, tube))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def tubes(self) -> list:
        return [t for _, t in self.entries]

    def covering(self, x) -> list:
        """Tubes whose cover cell contains initial state ``x``."""
        x = np.asarray(x, dtype=float)
        return [tube for tr, tube in self.entries if np.all(x >= tr.cell_lo) and np.all(x <= tr.cell_hi)]

    def contains(self, t: float, x) -> bool:
        return any(tube.contains(t, x) for tube in self.tubes)

    def contains_many(self, ts, xs) -> np.ndarray:
        ok = np.zeros(len(ts), dtype=bool)
        for tube in self.tubes:
            rest = np.nonzero(~ok)[0]
            if rest.size == 0:
                break
            ok[rest] = tube.contains_many(np.asarray(ts)[rest], np.asarray(xs)[rest])
        return ok

    def hull(self) -> Box:
        boxes = [tube.hull() for tube in self.tubes]
        out = boxes[0]
        for b in boxes[1:]:
            out = out.hull(b)
        return out


@dataclass
class VerificationResult:
    verdict: Verdict
    store: TubeStore
    witness: SimTrace | None = None
    witness_x0: np.ndarray | None = None
    remaining: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    problem_name: str = ""

    @property
    def tubes(self) -> list:
        return self.store.tubes

    def summary(self) -> dict:
        s = {
            "problem": self.problem_name,
            "verdict": self.verdict.value,
            "triples": self.stats.get("triples", 0),
            "safe_triples": len(self.store),
            "max_depth": self.stats.get("max_depth", 0),
            "steps": self.stats.get("steps", 0),
            "inconclusive": self.stats.get("inconclusive", 0),
            "remaining": len(self.remaining),
            "time_sim": round(self.stats.get("time_sim", 0.0), 4),
            "time_discrepancy": round(self.stats.get("time_discrepancy", 0.0), 4),
            "time_io": round(self.stats.get("time_io", 0.0), 4),
            "time_total": round(self.stats.get("time_total", 0.0), 4),
        }
        if self.witness_x0 is not None:
            s["witness_x0"] = [float(v) for v in self.witness_x0]
        return s

    def report(self) -> str:
        s = self.summary()
        lines = [
            f"problem      {s['problem']}",
            f"verdict      {s['verdict']}",
            f"triples      {s['triples']} processed, {s['safe_triples']} stored, {s['remaining']} left",
            f"depth        {s['max_depth']}",
            f"steps        {s['steps']}",
            f"timing [s]   sim {s['time_sim']:.3f}  discr {s['time_discrepancy']:.3f}  "
            f"io {s['time_io']:.3f}  total {s['time_total']:.3f}",
        ]
        if "witness_x0" in s:
            lines.append(f"witness x0   {s['witness_x0']}")
        return "\n".join(lines)


# outcome codes from one triple
_SAFE, _UNSAFE, _REFINE = "safe", "unsafe", "refine"


def _initial_mode(problem: VerificationProblem, sig, x0):
    if problem.initial_mode is not None:
        return problem.initial_mode
    return problem.plant.initial_mode(x0, input_function(sig)(0.0))


def process_triple(problem: VerificationProblem, sig: InputSignal | None, tr: CoverTriple):
    """Simulate, bloat and classify one triple; returns (outcome, payload, timings)."""
    tm = {"sim": 0.0, "disc": 0.0, "steps": 0}
    t0 = time.perf_counter()
    x0 = np.array(tr.center)
    try:
        trace = hybrid_simulate(x0, sig, problem.T, tr.eps, tr.tau, problem.plant, _initial_mode(problem, sig, x0))
    except (SimulationError, DomainError) as exc:
        tm["sim"] = time.perf_counter() - t0
        return _REFINE, f"simulation: {exc}", tm
    t1 = time.perf_counter()
    tm["sim"] = t1 - t0
    tm["steps"] = len(trace)
    try:
        disc = discrepancy_for_trace(trace, tr.delta + tr.eps)
        tube = bloat(trace, tr.delta, tr.eps, disc)
    except (EnclosureError, DomainError) as exc:
        tm["disc"] = time.perf_counter() - t1
        # the simulation may still be a counterexample
        if _rect_in_unsafe(trace, problem.unsafe) is not None:
            return _UNSAFE, (trace, x0), tm
        return _REFINE, f"discrepancy: {exc}", tm
    tm["disc"] = time.perf_counter() - t1
    codes = classify_boxes(tube.lo, tube.hi, problem.unsafe)
    if all(c == Overlap.DISJOINT for c in codes):
        return _SAFE, tube, tm
    if _rect_in_unsafe(trace, problem.unsafe) is not None:
        return _UNSAFE, (trace, x0), tm
    return _REFINE, "tube meets the unsafe set", tm


def _rect_in_unsafe(trace: SimTrace, unsafe) -> int | None:
    codes = classify_boxes(trace.lo, trace.hi, unsafe)
    for k, c in enumerate(codes):
        if c == Overlap.CONTAINED:
            return k
    return None


def _worker(args):
    return process_triple(*args)


def verify(problem: VerificationProblem, budget: int = 12, jobs: int = 1, delta0: float | None = None,
           max_triples: int | None = None) -> VerificationResult:
    """Run the refinement loop until SAFE, UNSAFE or the depth budget is spent."""
    t_start = time.perf_counter()
    sig = problem.input_signal(problem.tau0 / 8)
    theta = problem.theta
    if delta0 is None:
        delta0 = max(theta.diameter / 2, 1e-12)
    queue: list = []
    seq = itertools.count()

    def push(triples):
        for tr in triples:
            heapq.heappush(queue, (-tr.delta, next(seq), tr))

    push(cover(theta, delta0, problem.eps0, problem.tau0, 0))
    store = TubeStore()
    remaining = []
    stats = {"triples": 0, "max_depth": 0, "steps": 0, "inconclusive": 0, "time_sim": 0.0,
             "time_discrepancy": 0.0, "time_io": 0.0, "reasons": {}}
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs and jobs > 1 else None

    def finish(verdict, witness=None, wx0=None):
        if pool is not None:
            pool.shutdown(cancel_futures=True)
        stats["time_total"] = time.perf_counter() - t_start
        rem = remaining + [tr for _, _, tr in sorted(queue)] if verdict == Verdict.BUDGET_EXCEEDED else []
        return VerificationResult(verdict, store, witness, wx0, rem, stats, problem.name)

    try:
        while queue:
            batch = []
            while queue and len(batch) < max(1, jobs or 1):
                batch.append(heapq.heappop(queue)[2])
            runnable = [tr for tr in batch if tr.depth <= budget]
            remaining.extend(tr for tr in batch if tr.depth > budget)
            if pool is not None and len(runnable) > 1:
                outcomes = list(pool.map(_worker, [(problem, sig, tr) for tr in runnable]))
            else:
                outcomes = [process_triple(problem, sig, tr) for tr in runnable]
            for tr, (kind, payload, tm) in zip(runnable, outcomes):
                stats["triples"] += 1
                stats["max_depth"] = max(stats["max_depth"], tr.depth)
                stats["time_sim"] += tm["sim"]
                stats["time_discrepancy"] += tm["disc"]
                stats["steps"] += tm["steps"]
                if kind == _SAFE:
                    store.add(tr, payload)
                elif kind == _UNSAFE:
                    trace, x0 = payload
                    return finish(Verdict.UNSAFE, trace, x0)
                else:
                    stats["inconclusive"] += 1
                    key = payload.split(":")[0]
                    stats["reasons"][key] = stats["reasons"].get(key, 0) + 1
                    push(refine(tr))
            if max_triples is not None and stats["triples"] >= max_triples:
                break
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    if remaining or queue:
        return finish(Verdict.BUDGET_EXCEEDED)
    return finish(Verdict.SAFE)


def confirm_witness(problem: VerificationProblem, result: VerificationResult, factor: int = 4) -> bool:
    """Re-simulate the counterexample at ``factor`` times finer eps and tau."""
    if result.witness is None:
        return False
    w = result.witness
    sig = problem.input_signal(problem.tau0 / 8)
    x0 = result.witness_x0
    trace = hybrid_simulate(x0, sig, problem.T, w.eps / factor, w.tau / factor, problem.plant,
                            _initial_mode(problem, sig, x0))
    return _rect_in_unsafe(trace, problem.unsafe) is not None


def seed_from_env(default: int = 0) -> int:
    """Seed for Monte-Carlo checks, taken from ``REACHVERIFY_SEED`` when set."""
    try:
        return int(os.environ.get("REACHVERIFY_SEED", default))
    except ValueError:
        return default


def monte_carlo_check(problem: VerificationProblem, result: VerificationResult, samples: int = 100,
                      seed: int | None = None, max_step: float | None = None):
    """Simulate ``samples`` random initial states and count points outside the stored tubes.

    Returns ``(points_checked, points_outside)``.
    """
    rng = np.random.default_rng(seed_from_env() if seed is None else seed)
    sig = problem.input_signal(problem.tau0 / 8)
    theta = problem.theta
    checked = outside = 0
    for _ in range(samples):
        x0 = rng.uniform(theta.lo, theta.hi)
        pt = point_simulate(problem.plant, x0, problem.T, max_step or problem.tau0, _initial_mode(problem, sig, x0),
                            sig if problem.plant.m else None)
        ok = result.store.contains_many(pt.times, pt.states.T)
        checked += ok.size
        outside += int((~ok).sum())
    return checked, outside


# ---------------------------------------------------------------------------
# closed-model comparison


@dataclass
class ClosedComparison:
    delta: float
    fixed_diameter: float
    closed_diameter: float
    closed_overflow: bool
    fixed_gamma_max: float
    closed_gamma_max: float

    @property
    def ratio(self) -> float:
        if self.closed_overflow:
            return math.inf
        if self.fixed_diameter == 0:
            return math.inf if self.closed_diameter > 0 else 1.0
        return self.closed_diameter / self.fixed_diameter

    def report(self) -> str:
        cd = "overflow" if self.closed_overflow else f"{self.closed_diameter:.6g}"
        return "\n".join([
            f"delta                 {self.delta:g}",
            f"fixed-input diameter  {self.fixed_diameter:.6g}  (max gamma {self.fixed_gamma_max:.4g})",
            f"closed-model diameter {cd}  (max gamma {self.closed_gamma_max:.4g})",
            f"ratio closed/fixed    {self.ratio:.6g}",
        ])


def closed_model_comparison(problem: VerificationProblem, delta: float | None = None, eps: float | None = None,
                            tau: float | None = None) -> ClosedComparison:
    """Final tube diameters of the fixed-input method versus the input-as-state closed model.

    Both tubes start from the centre of the initial set with radius ``delta``
    in the plant coordinates; the closed model's input state starts exactly at
    the input automaton's initial state.  Diameters are measured on the plant
    coordinates at the horizon.
    """
    if problem.input is None or isinstance(problem.input, InputSignal):
        raise ValueError("closed-model comparison needs an input automaton")
    if delta is None:
        delta = problem.meta.get("ball", (None, problem.theta.diameter / 2))[1]
    eps = problem.eps0 if eps is None else eps
    tau = problem.tau0 if tau is None else tau
    n = problem.plant.n
    x0 = problem.theta.center
    sig = problem.input_signal(tau / 8)
    mode0 = _initial_mode(problem, sig, x0)
    tr = hybrid_simulate(x0, sig, problem.T, eps, tau, problem.plant, mode0)
    if delta > 0:
        disc = discrepancy_for_trace(tr, delta)
        tube = bloat(tr, delta, 0.0, disc)
        fixed = float(np.linalg.norm(tube.hi[-1] - tube.lo[-1]))
        g_fixed = float(disc.step_gamma.max())
    else:
        fixed = float(np.linalg.norm(tr.hi[-1] - tr.lo[-1]))
        g_fixed = float("nan")
    closed_aut = compose(problem.plant, problem.input)
    z0 = np.concatenate([x0, problem.input.initial_state])
    cmode = f"{mode0}|{problem.input.initial_mode}"
    ctr = hybrid_simulate(z0, None, problem.T, eps, tau, closed_aut, cmode)
    overflow = False
    g_closed = float("nan")
    if delta > 0:
        try:
            cdisc = discrepancy_for_trace(ctr, delta)
            ctube = bloat(ctr, delta, 0.0, cdisc)
            closed = float(np.linalg.norm(ctube.hi[-1, :n] - ctube.lo[-1, :n]))
            g_closed = float(cdisc.step_gamma.max())
            overflow = not math.isfinite(closed)
        except (EnclosureError, DomainError, OverflowError):
            closed, overflow = math.inf, True
            # rates along the simulation itself, the zero-radius limit
            K = len(ctr)
            gam, _ = _step_gammas(ctr, ctr.lo, ctr.hi, ctr.u_lo.reshape(K, -1), ctr.u_hi.reshape(K, -1))
            g_closed = float(gam.max())
    else:
        closed = float(np.linalg.norm(ctr.hi[-1, :n] - ctr.lo[-1, :n]))
    return ClosedComparison(delta, fixed, closed, overflow, g_fixed, g_closed)
