"""A tiny expression language for the scalar data of a problem.

Grammar (EBNF)::

    expr   = term { ("+" | "-") term } ;
    term   = unary { ("*" | "/") unary } ;
    unary  = ("-" | "+") unary | power ;
    power  = atom [ "^" unary ] ;             (* right associative *)
    atom   = number | name | name "(" expr { "," expr } ")" | "(" expr ")" ;

Names are variables (a caller-supplied subset of ``t, z, y, s, R``) or the
constant ``pi``.  Functions: ``abs sqrt cbrt sin cos sinh log exp atan``
(one argument), ``min max pow`` (two), and ``indicator(lo, hi)`` which is 1
for ``lo <= t <= hi`` and 0 otherwise (``indicator(v, lo, hi)`` tests an
explicit argument instead of ``t``).

Evaluation is IEEE double precision and accepts numpy arrays as bindings.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import ExprDomainError, ExprSyntaxError

VARIABLES = frozenset({"t", "z", "y", "s", "R"})
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {
    "abs": (1,),
    "sqrt": (1,),
    "cbrt": (1,),
    "sin": (1,),
    "cos": (1,),
    "sinh": (1,),
    "log": (1,),
    "exp": (1,),
    "atan": (1,),
    "min": (2,),
    "max": (2,),
    "pow": (2,),
    "indicator": (2, 3),
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, what: str):
        tok = self.peek()
        if tok is None:
            where = self.tokens[-1][2] if self.tokens else 0
            after = f" after {self.tokens[-1][1]!r}" if self.tokens else ""
            raise ExprSyntaxError(f"unexpected end of input{after}, expected {what}", where)
        self.i += 1
        return tok

    def expect_op(self, op: str):
        tok = self.next(f"'{op}'")
        if tok[0] != "op" or tok[1] != op:
            raise ExprSyntaxError(f"expected '{op}', found {tok[1]!r}", tok[2])

    def parse(self) -> Expr:
        if not self.tokens:
            raise ExprSyntaxError("empty expression", 0)
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while (tok := self.peek()) is not None and tok[0] == "op" and tok[1] in "+-":
            self.i += 1
            node = BinOp(tok[1], node, self.term())
        return node

    def term(self):
        node = self.unary()
        while (tok := self.peek()) is not None and tok[0] == "op" and tok[1] in "*/":
            self.i += 1
            node = BinOp(tok[1], node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            self.i += 1
            operand = self.unary()
            return Neg(operand) if tok[1] == "-" else operand
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] == "^":
            self.i += 1
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.next("an operand")
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nxt = self.peek()
            if nxt is not None and nxt[0] == "op" and nxt[1] == "(":
                self.i += 1
                args = [self.expr()]
                while (tok := self.peek()) is not None and tok[0] == "op" and tok[1] == ",":
                    self.i += 1
                    args.append(self.expr())
                self.expect_op(")")
                return _Located(Call(text, tuple(args)), pos)
            return _Located(Var(text), pos)
        if text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"unexpected {text!r}, expected an operand", pos)


class _Located:
    """Parser-internal wrapper remembering where a name appeared."""

    __slots__ = ("node", "pos")

    def __init__(self, node, pos):
        self.node = node
        self.pos = pos


def _resolve(node, allowed: frozenset):
    """Strip location wrappers and check names and arities."""
    if isinstance(node, _Located):
        inner, pos = node.node, node.pos
        if isinstance(inner, Var):
            if inner.name in CONSTANTS:
                return Num(CONSTANTS[inner.name])
            if inner.name not in allowed:
                raise ExprSyntaxError(f"unknown identifier {inner.name!r}", pos)
            return inner
        if inner.name not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {inner.name!r}", pos)
        if len(inner.args) not in FUNCTIONS[inner.name]:
            want = " or ".join(str(k) for k in FUNCTIONS[inner.name])
            raise ExprSyntaxError(
                f"{inner.name}() takes {want} argument(s), got {len(inner.args)}", pos
            )
        if inner.name == "indicator" and len(inner.args) == 2 and "t" not in allowed:
            raise ExprSyntaxError("indicator(lo, hi) needs the variable 't'", pos)
        return Call(inner.name, tuple(_resolve(a, allowed) for a in inner.args))
    if isinstance(node, Neg):
        return Neg(_resolve(node.operand, allowed))
    if isinstance(node, BinOp):
        return BinOp(node.op, _resolve(node.left, allowed), _resolve(node.right, allowed))
    return node


def parse(src: str, allowed_vars=("t",)) -> Expr:
    """Parse ``src``; identifiers outside ``allowed_vars`` are rejected."""
    if not isinstance(src, str):
        src = repr(float(src))
    allowed = frozenset(allowed_vars)
    unknown = allowed - VARIABLES
    if unknown:
        raise ValueError(f"unsupported variable names {sorted(unknown)}")
    return _resolve(_Parser(src).parse(), allowed)


def to_source(e: Expr) -> str:
    """Fully parenthesized source text that parses back to an equal-valued tree.

    A negative literal prints as ``(-c)`` and so reparses as ``Neg(Num(c))``.
    """
    if isinstance(e, Num):
        text = repr(float(e.value))
        return f"({text})" if math.copysign(1.0, e.value) < 0 else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    return f"{e.name}({', '.join(to_source(a) for a in e.args)})"


def variables(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Call):
        out = frozenset({"t"}) if e.name == "indicator" and len(e.args) == 2 else frozenset()
        for a in e.args:
            out |= variables(a)
        return out
    return frozenset()


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of variable ``name`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, name, replacement))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, name, replacement), substitute(e.right, name, replacement))
    if isinstance(e, Call):
        if e.name == "indicator" and len(e.args) == 2 and name == "t":
            e = Call("indicator", (Var("t"),) + e.args)
        return Call(e.name, tuple(substitute(a, name, replacement) for a in e.args))
    return e


def _domain(mask, message, node):
    if np.any(mask):
        raise ExprDomainError(message, to_source(node))


def _power(base, expo, node):
    base = np.asarray(base, dtype=float)
    expo = np.asarray(expo, dtype=float)
    fractional = expo != np.round(expo)
    _domain((base < 0) & fractional, "negative base raised to a fractional power", node)
    _domain((base == 0) & (expo < 0), "division by zero", node)
    return np.power(base, expo)


def _eval(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -np.asarray(_eval(e.operand, env), dtype=float)
    if isinstance(e, BinOp):
        lhs = np.asarray(_eval(e.left, env), dtype=float)
        rhs = np.asarray(_eval(e.right, env), dtype=float)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if e.op == "/":
            _domain(rhs == 0, "division by zero", e)
            return lhs / rhs
        return _power(lhs, rhs, e)
    args = [np.asarray(_eval(a, env), dtype=float) for a in e.args]
    name = e.name
    if name == "abs":
        return np.abs(args[0])
    if name == "sqrt":
        _domain(args[0] < 0, "square root of a negative number", e)
        return np.sqrt(args[0])
    if name == "cbrt":
        return np.cbrt(args[0])
    if name == "sin":
        return np.sin(args[0])
    if name == "cos":
        return np.cos(args[0])
    if name == "sinh":
        return np.sinh(args[0])
    if name == "log":
        _domain(args[0] <= 0, "logarithm of a non-positive number", e)
        return np.log(args[0])
    if name == "exp":
        return np.exp(args[0])
    if name == "atan":
        return np.arctan(args[0])
    if name == "min":
        return np.minimum(args[0], args[1])
    if name == "max":
        return np.maximum(args[0], args[1])
    if name == "pow":
        return _power(args[0], args[1], e)
    if len(args) == 2:
        v, lo, hi = np.asarray(env["t"], dtype=float), args[0], args[1]
    else:
        v, lo, hi = args
    return np.where((v >= lo) & (v <= hi), 1.0, 0.0)


def evaluate(e: Expr, bindings: Mapping[str, object] | None = None, **kw):
    """Evaluate ``e``; bindings may be floats or broadcastable arrays.

    Raises :class:`ExprDomainError` on a math-domain violation, naming the
    offending subexpression.
    """
    env = dict(bindings or {})
    env.update(kw)
    missing = variables(e) - env.keys()
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    with np.errstate(all="ignore"):
        out = np.asarray(_eval(e, env), dtype=float)
    if np.any(np.isnan(out)):
        raise ExprDomainError("undefined value (nan)", to_source(e))
    shape = np.broadcast_shapes(*(np.shape(env[v]) for v in variables(e))) if variables(e) else ()
    out = np.broadcast_to(out, shape) if out.shape != shape else out
    return out if out.ndim else float(out)


def constant_value(src) -> float:
    """Value of a closed expression such as ``'2*pi'`` or a plain number."""
    if isinstance(src, (int, float)):
        return float(src)
    return float(evaluate(parse(str(src), ())))
