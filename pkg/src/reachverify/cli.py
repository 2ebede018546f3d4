"""Command-line frontend.

    reachverify simulate builtin:cardiac --out run1
    reachverify verify builtin:inv-uniform --input sig
    reachverify gamma builtin:cardiac --box x1=0.4:0.6 --ubox 0.1:0.2
    reachverify compare-closed builtin:cardiac
    reachverify verify models/nor.model --budget 8 --jobs 2

Exit status: 0 SAFE or success, 1 UNSAFE, 2 BUDGET_EXCEEDED, 3 any error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import plot
from .circuits import BUILTINS, builtin_problem, ramp_input, sig_input
from .discrepancy import EnclosureError, discrepancy_for_trace, gamma_bound, interval_jacobian
from .expr import DomainError, ParseError
from .interval import Box
from .model import InputSignal, InputSignalAutomaton, ModelError, VerificationProblem
from .modelfile import load_problem
from .sim import SimulationError, hybrid_simulate
from .verify import Verdict, closed_model_comparison, monte_carlo_check, verify

EXIT_SAFE, EXIT_UNSAFE, EXIT_BUDGET, EXIT_ERROR = 0, 1, 2, 3
_EXIT = {Verdict.SAFE: EXIT_SAFE, Verdict.UNSAFE: EXIT_UNSAFE, Verdict.BUDGET_EXCEEDED: EXIT_BUDGET}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as BUDGET_EXCEEDED
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _nonneg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return v


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return v


def _range(text: str):
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise CliError(f"bad range {text!r}, expected lo:hi") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or vals[0] > vals[1]:
        raise CliError(f"bad range {text!r}, expected lo:hi with lo <= hi")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reachverify", description="Bounded-time safety verification with fixed input signals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("model", help="model file path or builtin:NAME (" + ", ".join(sorted(BUILTINS)) + ")")
        sp.add_argument("--input", default=None,
                        help="input signal: ramp, sig, or a file (model file with an [input] section, or CSV t,u...)")
        sp.add_argument("--horizon", type=_nonneg, default=None, help="time horizon override")
        sp.add_argument("--eps0", type=_positive, default=None, help="initial simulation precision")
        sp.add_argument("--tau0", type=_positive, default=None, help="initial time step bound")
        sp.add_argument("--out", default=None, help="output directory for CSV/SVG artifacts")
        sp.add_argument("--no-plot", action="store_true", help="skip SVG output")

    sp = sub.add_parser("simulate", help="validated simulation from the centre of the initial set")
    common(sp)
    sp = sub.add_parser("verify", help="run the refinement loop and report a verdict")
    common(sp)
    sp.add_argument("--budget", type=_pos_int, default=12, help="maximum refinement depth (default 12)")
    sp.add_argument("--jobs", type=_pos_int, default=1, help="worker processes")
    sp.add_argument("--monte-carlo", type=_pos_int, default=0, metavar="N",
                    help="check N random trajectories against the stored tubes (seed: REACHVERIFY_SEED)")
    sp = sub.add_parser("gamma", help="print exponential rates: over a box, or per trace segment")
    common(sp)
    sp.add_argument("--box", action="append", default=[], metavar="VAR=LO:HI", help="state box (repeatable)")
    sp.add_argument("--ubox", action="append", default=[], metavar="[VAR=]LO:HI", help="input box (repeatable)")
    sp.add_argument("--mode", default=None, help="mode whose field is used with --box")
    sp.add_argument("--delta", type=_nonneg, default=None, help="initial radius for per-segment rates")
    sp = sub.add_parser("compare-closed", help="fixed-input tube vs. input-as-state closed model")
    common(sp)
    sp.add_argument("--delta", type=_nonneg, default=None, help="initial radius (default: from the problem)")
    return p


# ---------------------------------------------------------------------------
# loading


def _read_csv_input(path: str, names) -> InputSignal:
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#",
                      skiprows=1 if _has_header(path) else 0)
    if data.shape[1] < 2:
        raise CliError(f"{path}: need a time column and at least one input column")
    return InputSignal(data[:, 0], data[:, 1:].T, names)


def _has_header(path: str) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                try:
                    [float(v) for v in line.split(",")]
                    return False
                except ValueError:
                    return True
    return False


def _input_from(spec: str, problem: VerificationProblem | None):
    if spec == "ramp":
        return ramp_input()
    if spec in ("sig", "sigmoid"):
        return sig_input()
    if not os.path.exists(spec):
        raise CliError(f"--input: no such file {spec!r} (or use ramp / sig)")
    if spec.endswith(".csv"):
        return _read_csv_input(spec, problem.plant.input_names if problem else None)
    other = load_problem(spec)
    if other.input is None:
        raise CliError(f"{spec}: file has no [input] section")
    return other.input


def load_source(source: str, input_spec: str | None = None) -> VerificationProblem:
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        kind = input_spec if input_spec in ("ramp", "sig") else None
        problem = builtin_problem(name, kind)
        if input_spec is not None and kind is None:
            problem = problem.with_(input=_input_from(input_spec, problem))
        return problem
    if not os.path.exists(source):
        raise CliError(f"no such model file: {source}")
    problem = load_problem(source)
    if input_spec is not None:
        problem = problem.with_(input=_input_from(input_spec, problem))
    return problem


def _apply_overrides(problem: VerificationProblem, args) -> VerificationProblem:
    changes = {}
    if args.horizon is not None:
        changes["T"] = args.horizon
    if args.eps0 is not None:
        changes["eps0"] = args.eps0
    if args.tau0 is not None:
        changes["tau0"] = args.tau0
    return problem.with_(**changes) if changes else problem


def _outdir(args, default: str) -> str:
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out!r} is not writable")
    return out


def _threshold(problem: VerificationProblem, dim: int):
    """Value of the first single-variable unsafe bound on ``dim``, for plotting."""
    for p in problem.unsafe:
        nz = [i for i, c in enumerate(p.coeffs_x) if c != 0.0]
        if nz == [dim]:
            return p.bound / p.coeffs_x[dim]
    return None


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(problem: VerificationProblem, args) -> int:
    sig = problem.input_signal(problem.tau0 / 8)
    x0 = problem.theta.center
    mode0 = problem.initial_mode
    trace = hybrid_simulate(x0, sig if problem.plant.m else None, problem.T, problem.eps0, problem.tau0,
                            problem.plant, mode0)
    out = _outdir(args, "reachverify-out")
    trace.to_csv(os.path.join(out, "trace.csv"))
    if not args.no_plot:
        for i, name in enumerate(problem.plant.state_names):
            plot.save(plot.trace_svg(trace, i, f"{problem.name or 'model'}: simulation", _threshold(problem, i)),
                      os.path.join(out, f"trace_{name}.svg"))
    print(f"{len(trace)} rectangles, max diameter {trace.max_diameter():.4g}, horizon {problem.T:g}")
    print(f"wrote {os.path.join(out, 'trace.csv')}")
    return EXIT_SAFE


def cmd_verify(problem: VerificationProblem, args) -> int:
    result = verify(problem, budget=args.budget, jobs=args.jobs)
    t_io = time.perf_counter()
    out = _outdir(args, "reachverify-out")
    rows = []
    for k, tube in enumerate(result.tubes):
        text = tube.to_csv()
        lines = text.splitlines()
        if k == 0:
            rows.append("tube," + lines[0])
        rows.extend(f"{k}," + ln for ln in lines[1:])
    with open(os.path.join(out, "tubes.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + ("\n" if rows else ""))
    if result.witness is not None:
        result.witness.to_csv(os.path.join(out, "witness.csv"))
    if not args.no_plot:
        for i, name in enumerate(problem.plant.state_names):
            plot.save(plot.tubes_svg(result.tubes, i, f"{problem.name or 'model'}: reachtubes",
                                     _threshold(problem, i), problem.plant.state_names),
                      os.path.join(out, f"tube_{name}.svg"))
    result.stats["time_io"] = result.stats.get("time_io", 0.0) + time.perf_counter() - t_io
    summary = result.summary()
    if args.monte_carlo and result.verdict == Verdict.SAFE:
        checked, outside = monte_carlo_check(problem, result, args.monte_carlo)
        summary["monte_carlo"] = {"points": checked, "outside": outside}
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(result.report())
    if "monte_carlo" in summary:
        mc = summary["monte_carlo"]
        print(f"monte carlo  {mc['outside']} of {mc['points']} sampled points outside the tubes")
    return _EXIT[result.verdict]


def _parse_boxes(problem: VerificationProblem, args):
    names = problem.plant.state_names
    lo, hi = problem.theta.lo.copy(), problem.theta.hi.copy()
    for item in args.box:
        if "=" not in item:
            raise CliError(f"--box expects VAR=LO:HI, got {item!r}")
        var, rng = item.split("=", 1)
        if var not in names:
            raise CliError(f"--box: unknown state variable {var!r}")
        i = names.index(var)
        lo[i], hi[i] = _range(rng)
    ins = problem.plant.input_names
    if problem.plant.m:
        sig = problem.input_signal(problem.tau0 / 8)
        ulo, uhi = sig.box(0.0, problem.T)
    else:
        ulo, uhi = np.zeros(0), np.zeros(0)
    ulo, uhi = np.array(ulo, dtype=float), np.array(uhi, dtype=float)
    for j, item in enumerate(args.ubox):
        if "=" in item:
            var, rng = item.split("=", 1)
            if var not in ins:
                raise CliError(f"--ubox: unknown input variable {var!r}")
            j = ins.index(var)
        else:
            rng = item
        if j >= len(ins):
            raise CliError("--ubox: more ranges than inputs")
        ulo[j], uhi[j] = _range(rng)
    return Box(lo, hi), (Box(ulo, uhi) if ins else None)


def cmd_gamma(problem: VerificationProblem, args) -> int:
    if args.box or args.ubox:
        S, U = _parse_boxes(problem, args)
        aut = problem.plant
        modes = [aut.mode(args.mode)] if args.mode else aut.modes
        worst = -math.inf
        for md in modes:
            M = interval_jacobian(md.field, S, U)
            g = gamma_bound(M)
            worst = max(worst, g)
            print(f"mode {md.name}")
            print("  lower " + np.array2string(M.lower, precision=6, separator=", ").replace("\n", "\n        "))
            print("  upper " + np.array2string(M.upper, precision=6, separator=", ").replace("\n", "\n        "))
            print(f"  gamma {g:.6f}")
        if len(modes) > 1:
            print(f"gamma (all modes) {worst:.6f}")
        return EXIT_SAFE
    sig = problem.input_signal(problem.tau0 / 8)
    x0 = problem.theta.center
    trace = hybrid_simulate(x0, sig if problem.plant.m else None, problem.T, problem.eps0, problem.tau0,
                            problem.plant, problem.initial_mode)
    delta = args.delta if args.delta is not None else problem.theta.diameter / 2
    disc = discrepancy_for_trace(trace, delta)
    print("t_start,t_end,gamma,beta_end")
    for pc in disc.pieces:
        print(f"{pc.t_start!r},{pc.t_end!r},{pc.gamma!r},{pc.beta_end!r}")
    return EXIT_SAFE


def cmd_compare(problem: VerificationProblem, args) -> int:
    if not isinstance(problem.input, InputSignalAutomaton):
        raise CliError("compare-closed needs an input automaton (ramp, sig, pulse or an inline [input])")
    cmp = closed_model_comparison(problem, args.delta)
    text = cmp.report()
    out = _outdir(args, "reachverify-out")
    with open(os.path.join(out, "compare_closed.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_SAFE


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "gamma": cmd_gamma, "compare-closed": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        problem = _apply_overrides(load_source(args.model, args.input), args)
        return COMMANDS[args.command](problem, args)
    except (CliError, ModelError, ParseError, OSError) as exc:
        print(f"reachverify: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SimulationError, EnclosureError, DomainError, ValueError) as exc:
        print(f"reachverify: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
