"""Plain-text model files.

Example::

    # cardiac oscillator driven by the logistic pulse
    [dimensions]
    state = x1, x2
    input = u

    [mode main]
    d/dt x1 = -x1*(x1^2 + 0.9*x1 + 0.9) + 2*x2*u + 1
    d/dt x2 = x1 - 2*x2

    [input]
    builtin = sig
    u0 = 0.1
    t_fall = 5

    [initial]
    x1 = 0.4 : 0.6
    x2 = 0.14 : 0.34

    [unsafe]
    x1 >= 2

    [horizon]
    10

    [params]
    eps0 = 0.01
    tau0 = 0.05

Sections: ``[dimensions]``, ``[constants]``, ``[mode NAME]`` (``d/dt VAR = EXPR``
lines plus ``invariant: PRED``), ``[transition]`` (``from``, ``to``,
``guard: PRED``), ``[input]`` (``builtin = ramp|sig|pulse`` with parameters,
or an inline automaton via ``state``/``output``/``initial`` keys and
``[input mode NAME]`` / ``[input transition]`` sections), ``[initial]``
(``VAR = lo : hi`` or a single value, or a ball via ``center = ...`` and
``radius = r`` kept as its bounding box; optional ``mode = NAME``),
``[unsafe]`` (one affine inequality per line, conjoined), ``[horizon]`` and
``[params]`` (``eps0``, ``tau0``).
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from . import expr as ex
from .expr import ParseError
from .interval import Box
from .model import (
    ContinuousMode,
    HybridAutomaton,
    InputSignal,
    InputSignalAutomaton,
    ModelError,
    Transition,
    VerificationProblem,
    parse_predicate,
)


class ModelFileError(ModelError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = f"{path or '<model>'}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)(?:\s+([A-Za-z0-9_.|,()\-]+))?(?:\s+([A-Za-z0-9_.|,()\-]+))?\s*\]$")
_DERIV_RE = re.compile(r"^d\s*/\s*dt\s+([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(.+)$")


def _sections(text: str):
    """Yield (kind, arg, [(lineno, line)]) blocks."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            kind = m.group(1).lower()
            arg = m.group(2)
            if kind == "input" and arg in ("mode", "transition"):
                kind, arg = f"input {arg}", m.group(3)
            elif m.group(3) is not None:
                raise ModelFileError(f"malformed section header {line!r}", lineno)
            current = [kind, arg, lineno, []]
            yield current
            continue
        if current is None:
            raise ModelFileError("content before the first section", lineno)
        current[3].append((lineno, line))


def _kv(line: str, lineno: int):
    if "=" not in line:
        raise ModelFileError(f"expected 'key = value', got {line!r}", lineno)
    k, v = line.split("=", 1)
    return k.strip(), v.strip()


def _names(v: str) -> list:
    return [s.strip() for s in v.split(",") if s.strip()]


def _float(v: str, lineno: int, constants=None) -> float:
    try:
        e = ex.parse_expr(v, (), (), constants)
    except ParseError as exc:
        raise ModelFileError(f"bad number {v!r}: {exc}", lineno) from None
    if not isinstance(e, ex.Const):
        raise ModelFileError(f"expected a number, got {v!r}", lineno)
    return e.value


def _interval(v: str, lineno: int, constants):
    v = v.strip()
    if v.startswith("[") and v.endswith("]"):
        parts = v[1:-1].split(",")
    else:
        parts = v.split(":")
    vals = [_float(p, lineno, constants) for p in parts]
    if len(vals) == 1:
        return vals[0], vals[0]
    if len(vals) != 2:
        raise ModelFileError(f"expected 'lo : hi', got {v!r}", lineno)
    if vals[0] > vals[1]:
        raise ModelFileError(f"empty interval {v!r}", lineno)
    return vals[0], vals[1]


def _mode(name, lines, state, inputs, constants):
    field = {}
    invariant = []
    for lineno, line in lines:
        if line.lower().startswith("invariant"):
            body = line.split(":", 1)[1] if ":" in line else line.split("=", 1)[-1]
            invariant.append(_pred(body, lineno, state, inputs, constants))
            continue
        m = _DERIV_RE.match(line)
        if not m:
            raise ModelFileError(f"expected 'd/dt VAR = EXPR' or 'invariant: PRED', got {line!r}", lineno)
        var, rhs = m.group(1), m.group(2)
        if var not in state:
            raise ModelFileError(f"unknown state variable {var!r}", lineno)
        if var in field:
            raise ModelFileError(f"duplicate derivative for {var!r}", lineno)
        try:
            field[var] = ex.parse_expr(rhs, state, inputs, constants)
        except ParseError as exc:
            raise ModelFileError(str(exc), lineno) from None
    missing = [v for v in state if v not in field]
    if missing:
        raise ModelFileError(f"mode {name!r} has no derivative for {', '.join(missing)}", lines[0][0] if lines else None)
    return ContinuousMode(name, [field[v] for v in state], invariant)


def _pred(text, lineno, state, inputs, constants):
    try:
        return parse_predicate(text, state, inputs, constants)
    except (ParseError, ModelError) as exc:
        raise ModelFileError(str(exc), lineno) from None


def _transition(lines, state, inputs, constants):
    src = dst = None
    guard = []
    for lineno, line in lines:
        low = line.lower()
        if low.startswith("guard"):
            body = line.split(":", 1)[1] if ":" in line else line.split("=", 1)[-1]
            guard.append(_pred(body, lineno, state, inputs, constants))
            continue
        k, v = _kv(line, lineno)
        if k == "from":
            src = v
        elif k == "to":
            dst = v
        else:
            raise ModelFileError(f"unknown transition key {k!r}", lineno)
    if src is None or dst is None:
        raise ModelFileError("transition needs 'from' and 'to'", lines[0][0] if lines else None)
    return Transition(src, dst, guard)


def _builtin_input(kv: dict, lineno: int, constants):
    from . import circuits

    kind = kv.pop("builtin")
    params = {k: _float(v, lineno, constants) for k, v in kv.items()}
    try:
        if kind == "ramp":
            return circuits.ramp_input(**params)
        if kind in ("sig", "sigmoid"):
            return circuits.sig_input(**params)
        if kind == "pulse":
            return circuits.pulse_input(**params)
    except TypeError as exc:
        raise ModelFileError(f"bad {kind} parameter: {exc}", lineno) from None
    raise ModelFileError(f"unknown builtin input {kind!r} (ramp, sig, pulse)", lineno)


def loads(text: str, path: str | None = None, input_override=None) -> VerificationProblem:
    """Parse model-file text into a validated :class:`VerificationProblem`."""
    blocks = list(_sections(text))
    state, inputs = [], []
    constants: dict = {}
    modes, trans = [], []
    in_kv: dict = {}
    in_line = None
    in_modes, in_trans = [], []
    theta = {}
    mode0 = None
    center = radius = None
    center_line = None
    unsafe_lines = []
    T = None
    eps0, tau0 = 0.01, 0.05
    name = Path(path).stem if path else ""
    try:
        for kind, arg, lineno, lines in blocks:
            if kind == "dimensions":
                for ln, line in lines:
                    k, v = _kv(line, ln)
                    if k in ("state", "states"):
                        state = _names(v)
                    elif k in ("input", "inputs"):
                        inputs = _names(v)
                    elif k == "name":
                        name = v
                    else:
                        raise ModelFileError(f"unknown dimensions key {k!r}", ln)
                if not state:
                    raise ModelFileError("no state variables declared", lineno)
        for kind, arg, lineno, lines in blocks:
            if kind == "constants":
                for ln, line in lines:
                    k, v = _kv(line, ln)
                    constants[k] = _float(v, ln, constants)
        for kind, arg, lineno, lines in blocks:
            if kind in ("dimensions", "constants"):
                continue
            if kind == "mode":
                modes.append(_mode(arg or f"m{len(modes)}", lines, state, inputs, constants))
            elif kind == "transition":
                trans.append((lineno, lines))
            elif kind == "input":
                in_line = lineno
                for ln, line in lines:
                    k, v = _kv(line, ln)
                    in_kv[k] = v
            elif kind == "input mode":
                in_modes.append((arg, lines))
            elif kind == "input transition":
                in_trans.append(lines)
            elif kind == "initial":
                for ln, line in lines:
                    k, v = _kv(line, ln)
                    if k == "mode":
                        mode0 = v
                    elif k == "center":
                        center = [_float(c, ln, constants) for c in _names(v)]
                        center_line = ln
                    elif k == "radius":
                        radius = _float(v, ln, constants)
                    elif k not in state:
                        raise ModelFileError(f"unknown state variable {k!r}", ln)
                    else:
                        theta[k] = _interval(v, ln, constants)
            elif kind == "unsafe":
                unsafe_lines.extend(lines)
            elif kind == "horizon":
                for ln, line in lines:
                    v = _kv(line, ln)[1] if "=" in line else line
                    T = _float(v, ln, constants)
            elif kind == "params":
                for ln, line in lines:
                    k, v = _kv(line, ln)
                    if k == "eps0":
                        eps0 = _float(v, ln, constants)
                    elif k == "tau0":
                        tau0 = _float(v, ln, constants)
                    else:
                        raise ModelFileError(f"unknown parameter {k!r}", ln)
            else:
                raise ModelFileError(f"unknown section [{kind}]", lineno)
        if not modes:
            raise ModelFileError("no [mode] section")
        transitions = [_transition(lines, state, inputs, constants) for _, lines in trans]
        plant = HybridAutomaton(modes, transitions, state, inputs, name=name)
        inp = input_override
        if inp is None and in_kv:
            if "builtin" in in_kv:
                inp = _builtin_input(dict(in_kv), in_line, constants)
            else:
                inp = _inline_input(in_kv, in_line, in_modes, in_trans, constants)
        meta = {}
        if center is not None or radius is not None:
            # a ball B_radius(center), kept as its bounding box
            if center is None or radius is None or len(center) != len(state) or radius < 0:
                raise ModelFileError("[initial] ball needs 'center' (one value per state) and 'radius' >= 0",
                                     center_line)
            for i, v in enumerate(state):
                theta.setdefault(v, (center[i] - radius, center[i] + radius))
            meta["ball"] = (tuple(center), radius)
        missing = [v for v in state if v not in theta]
        if missing:
            raise ModelFileError(f"[initial] gives no interval for {', '.join(missing)}")
        lo = [theta[v][0] for v in state]
        hi = [theta[v][1] for v in state]
        unsafe = [_pred(line, ln, state, inputs, constants) for ln, line in unsafe_lines]
        if T is None:
            raise ModelFileError("missing [horizon]")
        return VerificationProblem(plant, inp, Box(lo, hi), unsafe, T, eps0, tau0, mode0, name=name, meta=meta)
    except ModelFileError as exc:
        if path and exc.line is not None and not str(exc).startswith(str(path)):
            raise ModelFileError(str(exc).split(": ", 1)[-1], exc.line, path) from None
        raise
    except (ModelError, ValueError) as exc:
        raise ModelFileError(str(exc), None, path) from None


def _inline_input(kv, lineno, in_modes, in_trans, constants) -> InputSignalAutomaton:
    st = _names(kv.get("state", ""))
    if not st:
        raise ModelFileError("inline [input] needs 'state = ...'", lineno)
    outs = _names(kv.get("output", st[0]))
    for o in outs:
        if o not in st:
            raise ModelFileError(f"input output {o!r} is not an input state", lineno)
    init = [_float(v, lineno, constants) for v in _names(kv.get("initial", ""))]
    if len(init) != len(st):
        raise ModelFileError("inline [input] 'initial' must list one value per input state", lineno)
    modes = [_mode(nm, lines, st, [], constants) for nm, lines in in_modes]
    if not modes:
        raise ModelFileError("inline [input] needs at least one [input mode NAME] section", lineno)
    trans = [_transition(lines, st, [], constants) for lines in in_trans]
    aut = HybridAutomaton(modes, trans, st, [], name=kv.get("name", "input"))
    return InputSignalAutomaton(aut, init, [st.index(o) for o in outs], kv.get("initial_mode"), name=kv.get("name", "input"))


def load_problem(path, input_override=None) -> VerificationProblem:
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads(text, path, input_override)


# ---------------------------------------------------------------------------
# writing


def _mode_text(md: ContinuousMode, state, inputs, header: str) -> list:
    lines = [header]
    for v, fx in zip(state, md.field):
        lines.append(f"d/dt {v} = {ex.to_string(fx, state, inputs)}")
    for p in md.invariant:
        lines.append(f"invariant: {p.to_text(state, inputs)}")
    return lines + [""]


def _trans_text(t: Transition, state, inputs, header: str) -> list:
    lines = [header, f"from = {t.source}", f"to = {t.target}"]
    lines += [f"guard: {p.to_text(state, inputs)}" for p in t.guard]
    return lines + [""]


def dumps(problem: VerificationProblem, comment: str = "") -> str:
    """Model-file text that :func:`loads` reads back into an equivalent problem."""
    plant = problem.plant
    st, ins = plant.state_names, plant.input_names
    out = []
    if comment:
        out += [f"# {line}" for line in comment.splitlines()]
    out += ["[dimensions]", f"state = {', '.join(st)}"]
    if ins:
        out.append(f"input = {', '.join(ins)}")
    if problem.name:
        out.append(f"name = {problem.name}")
    out.append("")
    for md in plant.modes:
        out += _mode_text(md, st, ins, f"[mode {md.name}]")
    for t in plant.transitions:
        out += _trans_text(t, st, ins, "[transition]")
    inp = problem.input
    if isinstance(inp, InputSignalAutomaton):
        if inp.name in ("ramp", "sig", "pulse") and inp.params:
            out += ["[input]", f"builtin = {inp.name}"]
            out += [f"{k} = {v!r}" for k, v in inp.params.items()]
            out.append("")
        else:
            a = inp.automaton
            out += ["[input]", f"name = {inp.name or 'input'}", f"state = {', '.join(a.state_names)}",
                    f"output = {', '.join(inp.output_names)}",
                    f"initial = {', '.join(repr(float(v)) for v in inp.initial_state)}",
                    f"initial_mode = {inp.initial_mode}", ""]
            for md in a.modes:
                out += _mode_text(md, a.state_names, [], f"[input mode {md.name}]")
            for t in a.transitions:
                out += _trans_text(t, a.state_names, [], "[input transition]")
    elif isinstance(inp, InputSignal):
        raise ModelError("sampled input signals have no model-file form")
    out.append("[initial]")
    ball = problem.meta.get("ball")
    if ball is not None and np.allclose(Box.around(ball[0], ball[1]).lo, problem.theta.lo, rtol=0, atol=1e-12) \
            and np.allclose(Box.around(ball[0], ball[1]).hi, problem.theta.hi, rtol=0, atol=1e-12):
        out.append(f"center = {', '.join(repr(float(c)) for c in ball[0])}")
        out.append(f"radius = {float(ball[1])!r}")
    else:
        for v, a, b in zip(st, problem.theta.lo, problem.theta.hi):
            out.append(f"{v} = {float(a)!r} : {float(b)!r}")
    if problem.initial_mode:
        out.append(f"mode = {problem.initial_mode}")
    out.append("")
    if problem.unsafe:
        out.append("[unsafe]")
        out += [p.to_text(st, ins) for p in problem.unsafe]
        out.append("")
    out += ["[horizon]", repr(float(problem.T)), "", "[params]", f"eps0 = {problem.eps0!r}", f"tau0 = {problem.tau0!r}", ""]
    return "\n".join(out)


def dump_problem(problem: VerificationProblem, path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(problem, comment))
