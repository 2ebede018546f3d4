"""Symbolic scalar expressions over state and input variables.

Expressions are immutable trees (in practice DAGs: derivatives share the
subtrees they were built from).  The module provides a text parser, a printer,
exact differentiation with structural simplification, IEEE point evaluation,
outward-rounded interval evaluation and code generation for fast evaluation
inside the integrator.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?          # exponent must fold to an integer constant
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := 'exp' | 'log'
    NUMBER  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]

``^`` is right-associative and binds tighter than unary minus, so
``-x^2 == -(x^2)`` and ``2^3^2 == 2^9``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import interval as ia
from .interval import Box, Interval, IntervalError


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError, ValueError):
    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at column {position + 1})"
        super().__init__(message)


class DomainError(ExprError, ArithmeticError):
    """Evaluation hit log of a non-positive value, a zero divisor or an overflow."""

    def __init__(self, message: str, node: "Expr | None" = None):
        self.node = node
        super().__init__(message)


# ---------------------------------------------------------------------------
# AST


class Expr:
    __slots__ = ("_hash",)
    # precedence used by the printer
    prec = 100

    def children(self) -> tuple:
        return ()

    def _key(self) -> tuple:
        raise NotImplementedError

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._key() == other._key()

    def __ne__(self, other):
        return not self == other

    # operator overloading builds simplified trees
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        if isinstance(p, float) and p.is_integer():
            p = int(p)
        if not isinstance(p, int):
            raise TypeError("only integer powers are supported")
        return power(self, p)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self._hash = hash(("c", self.value))

    def _key(self):
        return (self.value,)


class StateVar(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = int(index)
        self._hash = hash(("x", self.index))

    def _key(self):
        return (self.index,)


class InputVar(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = int(index)
        self._hash = hash(("u", self.index))

    def _key(self):
        return (self.index,)


class _Binary(Expr):
    __slots__ = ("a", "b")
    tag = "?"

    def __init__(self, a: Expr, b: Expr):
        self.a = a
        self.b = b
        self._hash = hash((self.tag, a._hash, b._hash))

    def children(self):
        return (self.a, self.b)

    def _key(self):
        return (self.a, self.b)


class Add(_Binary):
    __slots__ = ()
    tag = "+"
    prec = 1


class Sub(_Binary):
    __slots__ = ()
    tag = "-"
    prec = 1


class Mul(_Binary):
    __slots__ = ()
    tag = "*"
    prec = 2


class Div(_Binary):
    __slots__ = ()
    tag = "/"
    prec = 2


class Pow(Expr):
    __slots__ = ("base", "exponent")
    prec = 4

    def __init__(self, base: Expr, exponent: int):
        if isinstance(exponent, float):
            if not exponent.is_integer():
                raise ExprError(f"non-integer exponent {exponent}")
            exponent = int(exponent)
        self.base = base
        self.exponent = int(exponent)
        self._hash = hash(("^", base._hash, self.exponent))

    def children(self):
        return (self.base,)

    def _key(self):
        return (self.base, self.exponent)


class _Unary(Expr):
    __slots__ = ("arg",)
    tag = "?"

    def __init__(self, arg: Expr):
        self.arg = arg
        self._hash = hash((self.tag, arg._hash))

    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.arg,)


class Exp(_Unary):
    __slots__ = ()
    tag = "exp"


class Log(_Unary):
    __slots__ = ()
    tag = "log"


class Neg(_Unary):
    __slots__ = ()
    tag = "neg"
    prec = 3


# ---------------------------------------------------------------------------
# smart constructors (structural simplification only)

ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Const(float(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


def _is_const(e, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    return Div(a, b)


def power(a: Expr, p: int) -> Expr:
    if p == 0:
        return ONE
    if p == 1:
        return a
    if _is_const(a) and not (a.value == 0.0 and p < 0):
        return Const(a.value ** p)
    return Pow(a, p)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def exp(a):
    """``exp`` that works on plain numbers and on expressions."""
    if isinstance(a, Expr):
        return Exp(a)
    return math.exp(a)


def log(a):
    """``log`` that works on plain numbers and on expressions."""
    if isinstance(a, Expr):
        return Log(a)
    return math.log(a)


# ---------------------------------------------------------------------------
# traversal helpers


def postorder(roots: Iterable[Expr]) -> list:
    """Unique nodes reachable from ``roots`` in dependency order (children first)."""
    seen = set()
    order = []
    for root in roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for ch in reversed(node.children()):
                if id(ch) not in seen:
                    stack.append((ch, False))
    return order


def node_count(e: Expr) -> int:
    return len(postorder([e]))


def max_indices(e: Expr) -> tuple:
    """Largest (state, input) variable index used, -1 when absent."""
    xs, us = -1, -1
    for node in postorder([e]):
        if isinstance(node, StateVar):
            xs = max(xs, node.index)
        elif isinstance(node, InputVar):
            us = max(us, node.index)
    return xs, us


def check_well_formed(e: Expr, n: int, m: int) -> None:
    xs, us = max_indices(e)
    if xs >= n:
        raise ExprError(f"state variable index {xs} out of range for dimension {n}")
    if us >= m:
        raise ExprError(f"input variable index {us} out of range for input dimension {m}")


def substitute(e: Expr, mapping: Callable[[Expr], Expr | None]) -> Expr:
    """Rebuild ``e`` bottom-up, replacing leaves for which ``mapping`` returns an Expr."""
    memo: dict = {}
    for node in postorder([e]):
        if isinstance(node, (Const, StateVar, InputVar)):
            rep = mapping(node)
            memo[id(node)] = node if rep is None else rep
        elif isinstance(node, _Binary):
            a, b = memo[id(node.a)], memo[id(node.b)]
            memo[id(node)] = {Add: add, Sub: sub, Mul: mul, Div: div}[type(node)](a, b)
        elif isinstance(node, Pow):
            memo[id(node)] = power(memo[id(node.base)], node.exponent)
        elif isinstance(node, Neg):
            memo[id(node)] = neg(memo[id(node.arg)])
        elif isinstance(node, Exp):
            memo[id(node)] = Exp(memo[id(node.arg)])
        elif isinstance(node, Log):
            memo[id(node)] = Log(memo[id(node.arg)])
    return memo[id(e)]


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_WS_RE = re.compile(r"\s*")
_FUNCS = {"exp": Exp, "log": Log}


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        pos = _WS_RE.match(text, pos).end()
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, state_names, input_names, constants):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.vars = {}
        for k, name in enumerate(state_names):
            self.vars[name] = StateVar(k)
        for k, name in enumerate(input_names):
            if name in self.vars:
                raise ParseError(f"name {name!r} declared as both state and input")
            self.vars[name] = InputVar(k)
        self.constants = dict(constants or {})

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.next()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.next()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.next()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return neg(self.unary())
        if kind == "op" and val == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            pos = self.next()[2]
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise ParseError("exponent must be a constant integer", pos, self.text)
            if not float(exponent.value).is_integer():
                raise ParseError(f"non-integer exponent {exponent.value!r}", pos, self.text)
            return power(base, int(exponent.value))
        return base

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _FUNCS[val](arg)
            if val in self.vars:
                return self.vars[val]
            if val in self.constants:
                return Const(self.constants[val])
            raise ParseError(f"unknown identifier {val!r}", pos, self.text)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos, self.text)


def parse_expr(
    text: str,
    state_names: Sequence[str] = (),
    input_names: Sequence[str] = (),
    constants: Mapping[str, float] | None = None,
) -> Expr:
    """Parse ``text`` into an expression over the named state and input variables.

    ``constants`` optionally binds extra identifiers to numeric values.
    Raises :class:`ParseError` with the offending column on bad input.
    """
    return _Parser(text, list(state_names), list(input_names), constants).parse()


# ---------------------------------------------------------------------------
# printing


def _fmt_const(v: float) -> str:
    s = repr(float(v))
    if s in ("inf", "-inf", "nan"):
        raise ExprError(f"cannot print non-finite constant {s}")
    return s


def to_string(e: Expr, state_names: Sequence[str] | None = None, input_names: Sequence[str] | None = None) -> str:
    """Render ``e`` in the parser's grammar so ``parse_expr`` reads it back."""

    def name(node):
        if isinstance(node, StateVar):
            return state_names[node.index] if state_names else f"x{node.index}"
        return input_names[node.index] if input_names else f"u{node.index}"

    def go(node, parent_prec, right_side=False):
        if isinstance(node, Const):
            s = _fmt_const(node.value)
            return f"({s})" if node.value < 0 or s.startswith("-") else s
        if isinstance(node, (StateVar, InputVar)):
            return name(node)
        if isinstance(node, (Exp, Log)):
            return f"{node.tag}({go(node.arg, 0)})"
        if isinstance(node, Neg):
            s = "-" + go(node.arg, Neg.prec)
            return f"({s})" if parent_prec >= Neg.prec else s
        if isinstance(node, Pow):
            p = node.exponent
            ps = str(p) if p >= 0 else f"({p})"
            s = f"{go(node.base, Pow.prec + 1)}^{ps}"
            return f"({s})" if parent_prec > Pow.prec else s
        prec = node.prec
        left = go(node.a, prec)
        right = go(node.b, prec + 1)
        s = f"{left} {node.tag} {right}"
        return f"({s})" if parent_prec > prec or (right_side and parent_prec == prec) else s

    return go(e, 0)


# ---------------------------------------------------------------------------
# differentiation


def _softplus_arg(arg: Expr):
    """``z`` when ``arg`` is ``1 + exp(z)`` (either order), else None."""
    if isinstance(arg, Add):
        for c, e in ((arg.a, arg.b), (arg.b, arg.a)):
            if _is_const(c, 1.0) and isinstance(e, Exp):
                return e.arg
    return None


def differentiate(e: Expr, var: Expr) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``var`` (a StateVar or InputVar)."""
    if not isinstance(var, (StateVar, InputVar)):
        raise TypeError("differentiation variable must be a StateVar or InputVar")
    memo: dict = {}
    for node in postorder([e]):
        if isinstance(node, Const):
            d = ZERO
        elif isinstance(node, (StateVar, InputVar)):
            d = ONE if node == var else ZERO
        elif isinstance(node, Add):
            d = add(memo[id(node.a)], memo[id(node.b)])
        elif isinstance(node, Sub):
            d = sub(memo[id(node.a)], memo[id(node.b)])
        elif isinstance(node, Mul):
            da, db = memo[id(node.a)], memo[id(node.b)]
            d = add(mul(da, node.b), mul(node.a, db))
        elif isinstance(node, Div):
            da, db = memo[id(node.a)], memo[id(node.b)]
            d = sub(div(da, node.b), div(mul(node.a, db), power(node.b, 2)))
        elif isinstance(node, Pow):
            db = memo[id(node.base)]
            p = node.exponent
            d = mul(mul(Const(p), power(node.base, p - 1)), db)
        elif isinstance(node, Exp):
            d = mul(node, memo[id(node.arg)])
        elif isinstance(node, Log):
            z = _softplus_arg(node.arg)
            if z is not None:
                # z' / (1 + exp(-z)): one occurrence of z, so interval evaluation stays tight
                d = div(memo[id(z)], add(ONE, exp(neg(z))))
            else:
                d = div(memo[id(node.arg)], node.arg)
        elif isinstance(node, Neg):
            d = neg(memo[id(node.arg)])
        else:  # pragma: no cover
            raise ExprError(f"unknown node {type(node).__name__}")
        memo[id(node)] = d
    return memo[id(e)]


def jacobian(f: Sequence[Expr], n: int, m: int = 0, wrt: str = "state") -> list:
    """Symbolic Jacobian of the vector field ``f`` w.r.t. the state (n x n) or input (n x m)."""
    if wrt == "state":
        vars_ = [StateVar(j) for j in range(n)]
    elif wrt == "input":
        vars_ = [InputVar(j) for j in range(m)]
    else:
        raise ValueError("wrt must be 'state' or 'input'")
    return [[differentiate(fi, v) for v in vars_] for fi in f]


# ---------------------------------------------------------------------------
# point evaluation


@dataclass(frozen=True)
class Valuation:
    state: tuple
    input: tuple = ()

    def __init__(self, state, input=()):
        object.__setattr__(self, "state", tuple(float(v) for v in state))
        object.__setattr__(self, "input", tuple(float(v) for v in input))


def eval_point(e: Expr, v: Valuation | Sequence[float], u: Sequence[float] = ()) -> float:
    """IEEE double evaluation of ``e`` at a valuation.

    Raises :class:`DomainError` naming the offending subtree for log of a
    non-positive value, division by zero or overflow.
    """
    if isinstance(v, Valuation):
        x, u = v.state, v.input
    else:
        x = tuple(v)
    memo: dict = {}
    for node in postorder([e]):
        if isinstance(node, Const):
            r = node.value
        elif isinstance(node, StateVar):
            r = float(x[node.index])
        elif isinstance(node, InputVar):
            r = float(u[node.index])
        elif isinstance(node, Add):
            r = memo[id(node.a)] + memo[id(node.b)]
        elif isinstance(node, Sub):
            r = memo[id(node.a)] - memo[id(node.b)]
        elif isinstance(node, Mul):
            r = memo[id(node.a)] * memo[id(node.b)]
        elif isinstance(node, Div):
            den = memo[id(node.b)]
            if den == 0.0:
                raise DomainError(f"division by zero in {to_string(node)}", node)
            r = memo[id(node.a)] / den
        elif isinstance(node, Pow):
            b = memo[id(node.base)]
            if b == 0.0 and node.exponent < 0:
                raise DomainError(f"zero to a negative power in {to_string(node)}", node)
            try:
                r = b ** node.exponent
            except OverflowError:
                raise DomainError(f"overflow in {to_string(node)}", node) from None
        elif isinstance(node, Exp):
            try:
                r = math.exp(memo[id(node.arg)])
            except OverflowError:
                raise DomainError(f"overflow in {to_string(node)}", node) from None
        elif isinstance(node, Log):
            a = memo[id(node.arg)]
            if not a > 0.0:
                raise DomainError(f"log of non-positive value {a!r} in {to_string(node)}", node)
            r = math.log(a)
        elif isinstance(node, Neg):
            r = -memo[id(node.arg)]
        memo[id(node)] = r
    return memo[id(e)]


# ---------------------------------------------------------------------------
# interval evaluation


def eval_interval_many(exprs: Sequence[Expr], x_lo, x_hi, u_lo=None, u_hi=None):
    """Enclose many expressions over a batch of boxes in one pass.

    ``x_lo``/``x_hi`` have shape ``(n,)`` or ``(n, K)`` (K boxes); inputs likewise
    ``(m,)``/``(m, K)``.  Returns ``(lo, hi)`` arrays of shape ``(len(exprs),)``
    or ``(len(exprs), K)``.  Shared subtrees are evaluated once.
    """
    x_lo = np.asarray(x_lo, dtype=float)
    x_hi = np.asarray(x_hi, dtype=float)
    if u_lo is None:
        u_lo = np.zeros((0,) + x_lo.shape[1:])
        u_hi = u_lo
    u_lo = np.asarray(u_lo, dtype=float)
    u_hi = np.asarray(u_hi, dtype=float)
    batch = np.broadcast_shapes(x_lo.shape[1:], u_lo.shape[1:])
    memo: dict = {}
    for node in postorder(exprs):
        if isinstance(node, Const):
            v = np.full(batch, node.value)
            r = (v, v)
        elif isinstance(node, StateVar):
            r = (x_lo[node.index], x_hi[node.index])
        elif isinstance(node, InputVar):
            r = (u_lo[node.index], u_hi[node.index])
        elif isinstance(node, Add):
            r = ia.iadd(*memo[id(node.a)], *memo[id(node.b)])
        elif isinstance(node, Sub):
            r = ia.isub(*memo[id(node.a)], *memo[id(node.b)])
        elif isinstance(node, Mul):
            r = ia.imul(*memo[id(node.a)], *memo[id(node.b)])
        elif isinstance(node, Div):
            blo, bhi = memo[id(node.b)]
            if np.any(ia.contains_zero(blo, bhi)):
                raise DomainError(f"denominator interval contains zero in {to_string(node)}", node)
            r = ia.idiv(*memo[id(node.a)], blo, bhi)
        elif isinstance(node, Pow):
            blo, bhi = memo[id(node.base)]
            if node.exponent < 0 and np.any(ia.contains_zero(blo, bhi)):
                raise DomainError(f"negative power of an interval containing zero in {to_string(node)}", node)
            r = ia.ipow(blo, bhi, node.exponent)
        elif isinstance(node, Exp):
            try:
                r = ia.iexp(*memo[id(node.arg)])
            except IntervalError:
                raise DomainError(f"overflow in {to_string(node)}", node) from None
        elif isinstance(node, Log):
            alo, ahi = memo[id(node.arg)]
            if np.any(alo <= 0.0):
                raise DomainError(f"log argument interval not bounded away from zero in {to_string(node)}", node)
            r = ia.ilog(alo, ahi)
        elif isinstance(node, Neg):
            r = ia.ineg(*memo[id(node.arg)])
        memo[id(node)] = r
    lo = np.empty((len(exprs),) + batch)
    hi = np.empty_like(lo)
    for k, e in enumerate(exprs):
        lo[k], hi[k] = memo[id(e)]
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DomainError("interval evaluation produced a non-finite bound")
    return lo, hi


def _as_bounds(box) -> tuple:
    if box is None:
        return np.zeros(0), np.zeros(0)
    if isinstance(box, Box):
        return box.lo, box.hi
    ivs = [iv if isinstance(iv, Interval) else Interval(*iv) for iv in box]
    return np.array([iv.lo for iv in ivs]), np.array([iv.hi for iv in ivs])


def eval_interval(e: Expr, state_box, input_box=None) -> Interval:
    """Sound enclosure of ``e`` over a state box and an input box.

    Boxes may be :class:`Box` objects or sequences of :class:`Interval`/pairs.
    """
    xl, xh = _as_bounds(state_box)
    ul, uh = _as_bounds(input_box)
    lo, hi = eval_interval_many([e], xl, xh, ul, uh)
    return Interval(float(lo[0]), float(hi[0]))


# ---------------------------------------------------------------------------
# code generation


def compile_exprs(exprs: Sequence[Expr], backend: str = "math") -> Callable:
    """Generate a Python function ``f(x, u)`` returning all ``exprs`` at once.

    ``backend="math"`` evaluates scalars (fast inside the integrator loop);
    ``backend="numpy"`` accepts arrays of shape ``(n, ...)`` and returns an array
    of shape ``(len(exprs), ...)``.
    """
    if backend not in ("math", "numpy"):
        raise ValueError("backend must be 'math' or 'numpy'")
    lib = "_m" if backend == "math" else "_np"
    names: dict = {}
    lines = []
    counter = 0
    for node in postorder(exprs):
        if isinstance(node, Const):
            names[id(node)] = f"({_fmt_const(node.value)})"
            continue
        if isinstance(node, StateVar):
            names[id(node)] = f"x[{node.index}]"
            continue
        if isinstance(node, InputVar):
            names[id(node)] = f"u[{node.index}]"
            continue
        if isinstance(node, _Binary):
            rhs = f"{names[id(node.a)]} {node.tag} {names[id(node.b)]}"
        elif isinstance(node, Pow):
            rhs = f"{names[id(node.base)]} ** {node.exponent}"
        elif isinstance(node, Exp):
            rhs = f"{lib}.exp({names[id(node.arg)]})"
        elif isinstance(node, Log):
            rhs = f"{lib}.log({names[id(node.arg)]})"
        elif isinstance(node, Neg):
            rhs = f"-{names[id(node.arg)]}"
        tmp = f"t{counter}"
        counter += 1
        lines.append(f"    {tmp} = {rhs}")
        names[id(node)] = tmp
    outs = ", ".join(names[id(e)] for e in exprs)
    src = "def _f(x, u):\n" + "\n".join(lines) + f"\n    return ({outs}{',' if len(exprs) == 1 else ''})\n"
    env = {"_m": math, "_np": np}
    exec(compile(src, "<reachverify-generated>", "exec"), env)
    raw = env["_f"]
    k = len(exprs)

    if backend == "math":

        def f(x, u=()):
            try:
                return np.array(raw(x, u), dtype=float)
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise DomainError(f"evaluation failed: {exc}") from None

        f.raw = raw
        return f

    def fv(x, u=None):
        x = np.asarray(x, dtype=float)
        if u is None:
            u = np.zeros((0,) + x.shape[1:])
        u = np.asarray(u, dtype=float)
        batch = np.broadcast_shapes(x.shape[1:], u.shape[1:])
        out = np.empty((k,) + batch)
        with np.errstate(all="ignore"):
            res = raw(x, u)
        for i, r in enumerate(res):
            out[i] = r
        return out

    return fv
