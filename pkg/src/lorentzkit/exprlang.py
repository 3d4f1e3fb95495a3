"""Expression trees over chart coordinates.

Formulas such as ``exp(w1 + 1)`` are parsed into immutable trees which can be
differentiated symbolically, folded, printed back to text and evaluated at a
point.  Evaluation has two paths: :func:`evaluate` walks the tree and reports
the offending node on a domain error, and :func:`compile_many` generates a
plain Python function for the hot loops, falling back to the walker when
anything goes wrong so the error message is the same.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

__all__ = [
    "Expr", "Const", "Coord", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "FUNCTIONS", "ParseError", "ExprSyntaxError", "UnknownIdentifierError",
    "ArityError", "EvalDomainError", "parse", "diff", "simplify", "evaluate",
    "to_text", "compile_expr", "compile_many", "coordinates_in", "is_constant",
    "max_coord_index", "substitute",
]

FUNCTIONS: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "sqrt": math.sqrt,
}

NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}


class ParseError(ValueError):
    """Raised for any malformed formula."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ParseError):
    pass


class EvalDomainError(ValueError):
    def __init__(self, message: str, node: "Expr"):
        self.node = node
        super().__init__(f"{message} in '{to_text(node)}'")


# ---------------------------------------------------------------------------
# nodes


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float
    name: str | None = None


@dataclass(frozen=True, slots=True)
class Coord(Expr):
    index: int
    name: str = ""


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: Expr  # never contains a Coord


@dataclass(frozen=True, slots=True)
class Call(Expr):
    func: str
    arg: Expr


ZERO = Const(0.0)
ONE = Const(1.0)
_BINARY = (Add, Sub, Mul, Div)


def coordinates_in(e: Expr) -> set[int]:
    match e:
        case Coord(index=i):
            return {i}
        case Const():
            return set()
        case Neg(arg=a) | Call(arg=a):
            return coordinates_in(a)
        case Pow(base=b, exponent=x):
            return coordinates_in(b) | coordinates_in(x)
        case Add(left=l, right=r) | Sub(left=l, right=r) | Mul(left=l, right=r) | Div(left=l, right=r):
            return coordinates_in(l) | coordinates_in(r)
    raise TypeError(f"not an expression node: {e!r}")


def is_constant(e: Expr) -> bool:
    return not coordinates_in(e)


def max_coord_index(e: Expr) -> int:
    """Largest coordinate index referenced, or -1 for a constant."""
    return max(coordinates_in(e), default=-1)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    # Precedence, loosest first: + -, * /, unary -, ^ (right associative).

    def __init__(self, text, coords, constants):
        self.tokens = _tokenize(text)
        self.i = 0
        self.coords = {name: k for k, name in enumerate(coords)}
        self.constants = dict(constants or {})

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            what = "end of input" if kind == "end" else f"token {text!r}"
            raise ExprSyntaxError(f"expected {value!r} but found {what}", pos)

    def parse(self) -> Expr:
        e = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def sum(self) -> Expr:
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.product()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def product(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            exponent = self.unary()
            if not is_constant(exponent):
                raise ExprSyntaxError("exponent must be a constant expression", pos)
            return Pow(base, exponent)
        return base

    def primary(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {text!r}", pos)
                self.take()
                if self.peek()[1] == ")":
                    raise ArityError(f"{text}() takes exactly 1 argument, got 0", pos)
                args = [self.sum()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.sum())
                self.expect(")")
                if len(args) != 1:
                    raise ArityError(f"{text}() takes exactly 1 argument, got {len(args)}", pos)
                return Call(text, args[0])
            if text in self.coords:
                return Coord(self.coords[text], text)
            if text in self.constants:
                return Const(float(self.constants[text]), text)
            if text in NAMED_CONSTANTS:
                return Const(NAMED_CONSTANTS[text], text)
            if text in FUNCTIONS:
                raise ArityError(f"{text}() takes exactly 1 argument, got 0", pos)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            e = self.sum()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else f"token {text!r}"
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str, coords: Sequence[str], constants: Mapping[str, float] | None = None) -> Expr:
    """Parse ``text`` into an expression over the coordinate names ``coords``.

    ``constants`` adds named numeric parameters on top of the reserved ``pi``
    and ``e``; coordinate names shadow both.
    """
    return _Parser(text, coords, constants).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}
_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 else s


def to_text(e: Expr) -> str:
    """Render ``e`` with the minimum of parentheses needed to reparse it."""
    match e:
        case Const(value=v, name=name):
            return name if name else _fmt_number(v)
        case Coord(index=i, name=name):
            return name or f"w{i + 1}"
        case Call(func=f, arg=a):
            return f"{f}({to_text(a)})"
        case Neg(arg=a):
            inner = to_text(a)
            if _PREC.get(type(a), 5) < _PREC[Neg]:
                inner = f"({inner})"
            return f"-{inner}"
        case Pow(base=b, exponent=x):
            bs = to_text(b)
            if type(b) in _PREC:
                bs = f"({bs})"
            xs = to_text(x)
            if type(x) in _PREC and type(x) is not Pow:
                xs = f"({xs})"
            return f"{bs}^{xs}"
    if isinstance(e, _BINARY):
        prec = _PREC[type(e)]
        ls, rs = to_text(e.left), to_text(e.right)
        if _PREC.get(type(e.left), 5) < prec:
            ls = f"({ls})"
        # left-associative: same-precedence right operands need brackets
        if _PREC.get(type(e.right), 5) <= prec:
            rs = f"({rs})"
        return f"{ls} {_SYMBOL[type(e)]} {rs}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# simplification


def _fold(node: Expr, fn, *args) -> Expr:
    try:
        value = fn(*args)
    except (ArithmeticError, ValueError):
        return node
    if isinstance(value, complex) or not math.isfinite(value):
        return node
    return Const(float(value))


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def simplify(e: Expr) -> Expr:
    """Constant folding plus the 0/1 identities; no algebraic rewriting."""
    match e:
        case Const() | Coord():
            return e
        case Neg(arg=a):
            a = simplify(a)
            if isinstance(a, Const):
                return Const(-a.value)
            if isinstance(a, Neg):
                return a.arg
            return Neg(a)
        case Call(func=f, arg=a):
            a = simplify(a)
            node = Call(f, a)
            if isinstance(a, Const):
                return _fold(node, FUNCTIONS[f], a.value)
            return node
        case Pow(base=b, exponent=x):
            b, x = simplify(b), simplify(x)
            if _is(x, 1.0):
                return b
            if _is(x, 0.0):
                return ONE
            node = Pow(b, x)
            if isinstance(b, Const) and isinstance(x, Const):
                return _fold(node, math.pow, b.value, x.value)
            return node
    l, r = simplify(e.left), simplify(e.right)
    both = isinstance(l, Const) and isinstance(r, Const)
    match e:
        case Add():
            if both:
                return _fold(Add(l, r), lambda p, q: p + q, l.value, r.value)
            if _is(l, 0.0):
                return r
            if _is(r, 0.0):
                return l
            return Add(l, r)
        case Sub():
            if both:
                return _fold(Sub(l, r), lambda p, q: p - q, l.value, r.value)
            if _is(r, 0.0):
                return l
            if _is(l, 0.0):
                return simplify(Neg(r))
            return Sub(l, r)
        case Mul():
            if _is(l, 0.0) or _is(r, 0.0):
                return ZERO
            if both:
                return _fold(Mul(l, r), lambda p, q: p * q, l.value, r.value)
            if _is(l, 1.0):
                return r
            if _is(r, 1.0):
                return l
            if _is(l, -1.0):
                return simplify(Neg(r))
            if _is(r, -1.0):
                return simplify(Neg(l))
            return Mul(l, r)
        case Div():
            if both:
                return _fold(Div(l, r), lambda p, q: p / q, l.value, r.value)
            if _is(r, 1.0):
                return l
            if _is(l, 0.0) and not _is(r, 0.0):
                return ZERO
            return Div(l, r)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# differentiation


def _d(e: Expr, i: int) -> Expr:
    match e:
        case Const():
            return ZERO
        case Coord(index=j):
            return ONE if j == i else ZERO
        case Neg(arg=a):
            return Neg(_d(a, i))
        case Add(left=l, right=r):
            return Add(_d(l, i), _d(r, i))
        case Sub(left=l, right=r):
            return Sub(_d(l, i), _d(r, i))
        case Mul(left=l, right=r):
            return Add(Mul(_d(l, i), r), Mul(l, _d(r, i)))
        case Div(left=l, right=r):
            return Div(Sub(Mul(_d(l, i), r), Mul(l, _d(r, i))), Pow(r, Const(2.0)))
        case Pow(base=b, exponent=x):
            lowered = simplify(Sub(x, ONE))
            return Mul(Mul(x, Pow(b, lowered)), _d(b, i))
        case Call(func=f, arg=a):
            da = _d(a, i)
            if f == "exp":
                outer = e
            elif f == "log":
                return Div(da, a)
            elif f == "sin":
                outer = Call("cos", a)
            elif f == "cos":
                outer = Neg(Call("sin", a))
            elif f == "tan":
                outer = Div(ONE, Pow(Call("cos", a), Const(2.0)))
            elif f == "sinh":
                outer = Call("cosh", a)
            elif f == "cosh":
                outer = Call("sinh", a)
            elif f == "tanh":
                outer = Sub(ONE, Pow(e, Const(2.0)))
            elif f == "sqrt":
                return Div(da, Mul(Const(2.0), e))
            else:  # pragma: no cover - parser rejects unknown names
                raise ValueError(f"unknown function {f!r}")
            return Mul(outer, da)
    raise TypeError(f"not an expression node: {e!r}")


def diff(e: Expr, i: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``i``."""
    if i not in coordinates_in(e):
        return ZERO
    return simplify(_d(e, i))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate ``e`` at ``point``; raise :class:`EvalDomainError` on bad input."""
    match e:
        case Const(value=v):
            return v
        case Coord(index=i):
            if i >= len(point):
                raise IndexError(f"coordinate index {i} outside point of length {len(point)}")
            return float(point[i])
        case Neg(arg=a):
            return -evaluate(a, point)
        case Add(left=l, right=r):
            return evaluate(l, point) + evaluate(r, point)
        case Sub(left=l, right=r):
            return evaluate(l, point) - evaluate(r, point)
        case Mul(left=l, right=r):
            return evaluate(l, point) * evaluate(r, point)
        case Div(left=l, right=r):
            den = evaluate(r, point)
            num = evaluate(l, point)
            if den == 0.0:
                raise EvalDomainError("division by zero", e)
            return num / den
        case Pow(base=b, exponent=x):
            bv, xv = evaluate(b, point), evaluate(x, point)
            try:
                return math.pow(bv, xv)
            except (ValueError, OverflowError) as exc:
                raise EvalDomainError(f"invalid power {bv!r}^{xv!r}", e) from exc
        case Call(func=f, arg=a):
            av = evaluate(a, point)
            try:
                return FUNCTIONS[f](av)
            except (ValueError, OverflowError) as exc:
                raise EvalDomainError(f"{f} undefined at {av!r}", e) from exc
    raise TypeError(f"not an expression node: {e!r}")


def _codegen(e: Expr) -> str:
    match e:
        case Const(value=v):
            return repr(v)
        case Coord(index=i):
            return f"w[{i}]"
        case Neg(arg=a):
            return f"(-{_codegen(a)})"
        case Add(left=l, right=r):
            return f"({_codegen(l)} + {_codegen(r)})"
        case Sub(left=l, right=r):
            return f"({_codegen(l)} - {_codegen(r)})"
        case Mul(left=l, right=r):
            return f"({_codegen(l)} * {_codegen(r)})"
        case Div(left=l, right=r):
            return f"({_codegen(l)} / {_codegen(r)})"
        case Pow(base=b, exponent=x):
            return f"_pow({_codegen(b)}, {_codegen(x)})"
        case Call(func=f, arg=a):
            return f"_{f}({_codegen(a)})"
    raise TypeError(f"not an expression node: {e!r}")


_CODE_NS = {f"_{name}": fn for name, fn in FUNCTIONS.items()}
_CODE_NS["_pow"] = math.pow


def compile_many(exprs: Sequence[Expr]) -> Callable[[Sequence[float]], tuple[float, ...]]:
    """Compile a batch of expressions into one function of the point.

    The returned callable gives a tuple with one float per expression.  Errors
    are re-raised as :class:`EvalDomainError` naming the failing node.
    """
    exprs = tuple(exprs)
    body = ", ".join(_codegen(e) for e in exprs)
    source = f"def _f(w):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    ns = dict(_CODE_NS)
    exec(compile(source, "<lorentzkit-expr>", "exec"), ns)
    fast = ns["_f"]

    def run(point: Sequence[float]) -> tuple[float, ...]:
        point = tuple(float(x) for x in point)
        try:
            return fast(point)
        except (ArithmeticError, ValueError):
            # slow path only to name the node; raises if anything is invalid
            return tuple(evaluate(e, point) for e in exprs)

    return run


def compile_expr(e: Expr) -> Callable[[Sequence[float]], float]:
    batch = compile_many([e])
    return lambda point: batch(point)[0]


def substitute(e: Expr, index: int, replacement: Expr) -> Expr:
    """Replace every ``Coord(index)`` in ``e`` by ``replacement``."""
    match e:
        case Coord(index=i):
            return replacement if i == index else e
        case Const():
            return e
        case Neg(arg=a):
            return Neg(substitute(a, index, replacement))
        case Call(func=f, arg=a):
            return Call(f, substitute(a, index, replacement))
        case Pow(base=b, exponent=x):
            return Pow(substitute(b, index, replacement), x)
    return type(e)(substitute(e.left, index, replacement), substitute(e.right, index, replacement))
