"""Scalar expressions over chart coordinates: tree, parser, printer, calculus.

Grammar (ASCII only)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = atom [ "^" unary ] ;          (* right associative *)
    atom     = number | coordinate | function "(" expr ")" | "(" expr ")" ;
    function = "exp" | "log" | "sin" | "cos" | "tan" | "sinh" | "cosh" | "sqrt" ;
    number   = digits [ "." digits ] [ exponent ] | "." digits [ exponent ] ;
    name     = ( letter | "_" ) { letter | digit | "_" } ;

Exponents must fold to a numeric constant.  ``-x^2`` parses as ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets
from .errors import ArityError, DomainError, ExprSyntaxError, UnknownIdentifierError

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "sqrt")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class Expr:
    """Base class of expression nodes.  Nodes are immutable and compare structurally."""

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, exponent):
        return Pow(self, float(exponent))

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(float(x))


def variables(e: Expr) -> set:
    """Coordinate indices referenced by ``e``."""
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.index)
        elif isinstance(node, (Neg, Call)):
            stack.append(node.arg)
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
    return out


# --- parsing --------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", position=pos, text=text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, coords):
        self.text = text
        self.coords = {name: i for i, name in enumerate(coords)}
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def error(self, message, pos, cls=ExprSyntaxError):
        return cls(message, position=pos, column=pos + 1, text=self.text)

    def expect(self, value):
        kind, tok, pos = self.take()
        if tok != value:
            found = "end of input" if kind == "end" else repr(tok)
            raise self.error(f"expected {value!r}, found {found}", pos)

    def parse(self):
        e = self.expr()
        kind, tok, pos = self.peek()
        if kind != "end":
            raise self.error(f"unexpected {tok!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            pos = self.peek()[2]
            exponent = self.unary()
            if variables(exponent):
                raise self.error("exponent must be a numeric constant", pos)
            try:
                value = evaluate(exponent, ())
            except DomainError as exc:
                raise self.error(f"exponent is not a finite number: {exc}", pos) from None
            return Pow(base, value)
        return base

    def atom(self):
        kind, tok, pos = self.take()
        if kind == "num":
            value = float(tok)
            if not math.isfinite(value):
                raise self.error(f"literal {tok} is not finite", pos)
            return Const(value)
        if kind == "name":
            is_call = self.peek()[:2] == ("op", "(")
            if tok in FUNCTIONS:
                if not is_call:
                    raise self.error(f"function {tok!r} needs exactly one argument", pos, ArityError)
                return self.call(tok, pos)
            if tok in self.coords:
                if is_call:
                    raise self.error(f"coordinate {tok!r} is not a function", self.peek()[2])
                return Var(self.coords[tok], tok)
            raise self.error(f"unknown identifier {tok!r}", pos, UnknownIdentifierError)
        if (kind, tok) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(tok)
        raise self.error(f"unexpected {found}", pos)

    def call(self, name, pos):
        self.take()  # "("
        args = []
        if self.peek()[:2] != ("op", ")"):
            args.append(self.expr())
            while self.peek()[:2] == ("op", ","):
                self.take()
                args.append(self.expr())
        self.expect(")")
        if len(args) != 1:
            raise self.error(f"function {name!r} takes 1 argument, got {len(args)}", pos, ArityError)
        return Call(name, args[0])


def check_coordinate_names(coords: Sequence[str]) -> tuple:
    coords = tuple(coords)
    for c in coords:
        if not isinstance(c, str) or not _NAME_RE.match(c):
            raise ValueError(f"invalid coordinate name {c!r}")
        if c in FUNCTIONS:
            raise ValueError(f"coordinate name {c!r} clashes with a function name")
    if len(set(coords)) != len(coords):
        raise ValueError(f"coordinate names must be distinct: {coords}")
    return coords


def parse_expression(text: str, coords: Sequence[str]) -> Expr:
    """Parse ``text`` into an expression tree over the named coordinates."""
    coords = check_coordinate_names(coords)
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", position=0, column=1, text=text)
    if not text.isascii():
        bad = next(i for i, ch in enumerate(text) if not ch.isascii())
        raise ExprSyntaxError("non-ASCII character", position=bad, column=bad + 1, text=text)
    return _Parser(text, coords).parse()


# --- printing -------------------------------------------------------------------

def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e):
    return _PREC.get(type(e), 5)


def to_text(e: Expr) -> str:
    """Render ``e`` so that :func:`parse_expression` rebuilds the same tree."""

    def wrap(sub, min_prec):
        s = to_text(sub)
        return f"({s})" if _prec(sub) < min_prec else s

    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, 3)
    if isinstance(e, Pow):
        return f"{wrap(e.base, 5)}^{_fmt_number(e.exponent)}"
    op = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(e)]
    p = _prec(e)
    return wrap(e.left, p) + op + wrap(e.right, p + 1)


# --- evaluation -----------------------------------------------------------------

def _check_finite(v, what):
    if not math.isfinite(v):
        raise DomainError(f"{what} produced a non-finite value")
    return v


def _pow_value(b, c):
    if b == 0.0 and c < 0:
        raise DomainError("division by zero: zero raised to a negative power")
    if b < 0.0 and not float(c).is_integer():
        raise DomainError("negative base raised to a non-integer power")
    try:
        return _check_finite(b ** c, "power")
    except OverflowError:
        raise DomainError("power overflow") from None


def _call_value(name, x):
    if name == "log":
        if x <= 0.0:
            raise DomainError(f"log of non-positive value {x!r}")
        return math.log(x)
    if name == "sqrt":
        if x < 0.0:
            raise DomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    try:
        v = getattr(math, name)(x)
    except OverflowError:
        raise DomainError(f"{name} overflow at {x!r}") from None
    if name == "tan" and math.cos(x) == 0.0:
        raise DomainError("tan at a pole")
    return _check_finite(v, name)


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at a coordinate point."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(point[e.index])
    if isinstance(e, Neg):
        return -evaluate(e.arg, point)
    if isinstance(e, Add):
        return _check_finite(evaluate(e.left, point) + evaluate(e.right, point), "addition")
    if isinstance(e, Sub):
        return _check_finite(evaluate(e.left, point) - evaluate(e.right, point), "subtraction")
    if isinstance(e, Mul):
        return _check_finite(evaluate(e.left, point) * evaluate(e.right, point), "product")
    if isinstance(e, Div):
        den = evaluate(e.right, point)
        if den == 0.0:
            raise DomainError("division by zero")
        return _check_finite(evaluate(e.left, point) / den, "division")
    if isinstance(e, Pow):
        return _pow_value(evaluate(e.base, point), e.exponent)
    if isinstance(e, Call):
        return _call_value(e.func, evaluate(e.arg, point))
    raise TypeError(f"not an expression node: {e!r}")


# --- symbolic differentiation ---------------------------------------------------

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(e, v):
    return isinstance(e, Const) and e.value == v


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Neg(b)
    return Sub(a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def _neg(a):
    if _is_const(a, 0.0):
        return _ZERO
    return Neg(a)


def differentiate(e: Expr, coord: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``coord``.

    Only zero/one folding is applied; the result is otherwise unsimplified.
    """
    if isinstance(e, Const):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.index == coord else _ZERO
    if isinstance(e, Neg):
        return _neg(differentiate(e.arg, coord))
    if isinstance(e, Add):
        return _add(differentiate(e.left, coord), differentiate(e.right, coord))
    if isinstance(e, Sub):
        return _sub(differentiate(e.left, coord), differentiate(e.right, coord))
    if isinstance(e, Mul):
        return _add(_mul(differentiate(e.left, coord), e.right),
                    _mul(e.left, differentiate(e.right, coord)))
    if isinstance(e, Div):
        du = differentiate(e.left, coord)
        dv = differentiate(e.right, coord)
        first = _ZERO if _is_const(du, 0.0) else Div(du, e.right)
        second = _ZERO if _is_const(dv, 0.0) else Div(_mul(e.left, dv), Pow(e.right, 2.0))
        return _sub(first, second)
    if isinstance(e, Pow):
        du = differentiate(e.base, coord)
        c = e.exponent
        if c == 0.0 or _is_const(du, 0.0):
            return _ZERO
        inner = _ONE if c == 1.0 else (e.base if c == 2.0 else Pow(e.base, c - 1.0))
        return _mul(_mul(Const(c), inner), du)
    if isinstance(e, Call):
        u = e.arg
        du = differentiate(u, coord)
        if _is_const(du, 0.0):
            return _ZERO
        f = e.func
        if f == "exp":
            outer = e
        elif f == "log":
            return Div(du, u)
        elif f == "sin":
            outer = Call("cos", u)
        elif f == "cos":
            outer = Neg(Call("sin", u))
        elif f == "tan":
            outer = Add(_ONE, Pow(Call("tan", u), 2.0))
        elif f == "sinh":
            outer = Call("cosh", u)
        elif f == "cosh":
            outer = Call("sinh", u)
        elif f == "sqrt":
            return Div(du, Mul(Const(2.0), e))
        else:
            raise TypeError(f"unknown function {f!r}")
        return _mul(outer, du)
    raise TypeError(f"not an expression node: {e!r}")


# --- jets -----------------------------------------------------------------------

def _falling(c, k):
    out = 1.0
    for i in range(k):
        out *= c - i
    return out


def _pow_derivs(u0, c, order):
    is_nonneg_int = float(c).is_integer() and c >= 0
    if u0 < 0.0 and not float(c).is_integer():
        raise DomainError("negative base raised to a non-integer power")
    out = []
    for k in range(order + 1):
        coef = _falling(c, k)
        if coef == 0.0:
            out.append(0.0)
            continue
        if u0 == 0.0 and (c - k) < 0:
            if is_nonneg_int:
                out.append(0.0)
                continue
            raise DomainError("derivative of a power is unbounded at zero base")
        out.append(_check_finite(coef * u0 ** (c - k), "power"))
    return out


def _tan_derivs(t, order):
    # d/dx P(tan x) = P'(t) (1 + t^2)
    poly = np.polynomial.Polynomial([0.0, 1.0])
    one_plus = np.polynomial.Polynomial([1.0, 0.0, 1.0])
    out = []
    for _ in range(order + 1):
        out.append(float(poly(t)))
        poly = poly.deriv() * one_plus
    return out


def _call_derivs(name, u0, order):
    if name == "exp":
        v = _call_value("exp", u0)
        return [v] * (order + 1)
    if name in ("sin", "cos"):
        s, c = math.sin(u0), math.cos(u0)
        cycle = [s, c, -s, -c] if name == "sin" else [c, -s, -c, s]
        return [cycle[k % 4] for k in range(order + 1)]
    if name in ("sinh", "cosh"):
        sh, ch = _call_value("sinh", u0), _call_value("cosh", u0)
        pair = [sh, ch] if name == "sinh" else [ch, sh]
        return [pair[k % 2] for k in range(order + 1)]
    if name == "log":
        if u0 <= 0.0:
            raise DomainError(f"log of non-positive value {u0!r}")
        out = [math.log(u0)]
        for k in range(1, order + 1):
            out.append((-1) ** (k - 1) * math.factorial(k - 1) / u0 ** k)
        return out
    if name == "sqrt":
        if u0 < 0.0:
            raise DomainError(f"sqrt of negative value {u0!r}")
        if u0 == 0.0 and order > 0:
            raise DomainError("sqrt is not differentiable at zero")
        return _pow_derivs(u0, 0.5, order)
    if name == "tan":
        if math.cos(u0) == 0.0:
            raise DomainError("tan at a pole")
        return _tan_derivs(math.tan(u0), order)
    raise TypeError(f"unknown function {name!r}")


def _jet_array(e, point, space, memo):
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(e, Const):
        out = jets.constant(e.value, space)
    elif isinstance(e, Var):
        out = jets.coordinate(e.index, point[e.index], space)
    elif isinstance(e, Neg):
        out = -_jet_array(e.arg, point, space, memo)
    elif isinstance(e, (Add, Sub, Mul)):
        a = _jet_array(e.left, point, space, memo)
        b = _jet_array(e.right, point, space, memo)
        if isinstance(e, Add):
            out = a + b
        elif isinstance(e, Sub):
            out = a - b
        else:
            out = jets.jet_mul(a, b, space)
    elif isinstance(e, Div):
        a = _jet_array(e.left, point, space, memo)
        b = _jet_array(e.right, point, space, memo)
        if b[0] == 0.0:
            raise DomainError("division by zero")
        out = jets.jet_mul(a, jets.compose(b, _pow_derivs(b[0], -1.0, space.order), space), space)
    elif isinstance(e, Pow):
        b = _jet_array(e.base, point, space, memo)
        out = jets.compose(b, _pow_derivs(b[0], e.exponent, space.order), space)
    elif isinstance(e, Call):
        u = _jet_array(e.arg, point, space, memo)
        out = jets.compose(u, _call_derivs(e.func, u[0], space.order), space)
    else:
        raise TypeError(f"not an expression node: {e!r}")
    if not np.all(np.isfinite(out)):
        raise DomainError("jet evaluation produced a non-finite coefficient")
    memo[key] = (e, out)  # keep e alive so id() stays unique
    return out


def jet_array(e: Expr, point: Sequence[float], space: jets.JetSpace, memo=None) -> np.ndarray:
    """Raw jet coefficients of ``e`` at ``point`` in ``space`` (a flat array)."""
    if len(point) != space.n:
        raise ValueError(f"point has {len(point)} coordinates, jet space has {space.n}")
    if memo is None:
        memo = {}
    return _jet_array(e, tuple(float(x) for x in point), space, memo)


def jet_evaluate(e: Expr, point: Sequence[float], order: int) -> jets.Jet:
    """All partial derivatives of ``e`` up to ``order`` at ``point``."""
    space = jets.jet_space(len(point), order)
    return jets.Jet(tuple(point), order, jet_array(e, point, space))
