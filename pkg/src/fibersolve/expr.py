"""Scalar expressions in one variable ``x``.

Expressions are immutable trees built from the node classes below. They are
created with :func:`parse_expr`, printed with ``str``, evaluated with
:func:`eval_expr` (scalars or numpy arrays) and differentiated symbolically
with :func:`differentiate`.

Grammar::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := "-" factor | power
    power  := atom ("^" integer)?
    atom   := number | "x" | func "(" expr ")" | "(" expr ")"
    func   := "sin" | "cos" | "exp" | "log" | "sqrt" | "abs"
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Neg", "Func", "BinOp", "Pow",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "DomainError",
    "NotDifferentiableError",
    "parse_expr", "eval_expr", "differentiate", "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Raised for malformed input; carries the byte offset and expected tokens."""

    def __init__(self, text, offset, expected):
        self.text = text
        self.offset = offset
        self.expected = tuple(sorted(expected))
        raw = text.encode()
        found = (raw[offset:offset + 10].decode(errors="replace")
                 if offset < len(raw) else "end of input")
        super().__init__(
            f"syntax error at byte {offset}: expected one of "
            f"{', '.join(self.expected)}; found {found!r}"
        )


class UnknownIdentifierError(ExprError):
    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain or produced a non-finite value."""


class NotDifferentiableError(ExprError):
    pass


# ---------------------------------------------------------------------------
# AST

class Expr:
    """Base class of all expression nodes."""

    # binding strength used by the printer
    precedence = 100

    def __str__(self):
        return _format(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or v < 0:
            # negative constants are spelled Neg(Num(c)) so that printing
            # and re-parsing gives back the same tree
            raise ValueError(f"Num requires a finite non-negative value, got {v}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    precedence = 3


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


_BINARY_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in _BINARY_PRECEDENCE:
            raise ValueError(f"unknown binary operator {self.op!r}")

    @property
    def precedence(self):
        return _BINARY_PRECEDENCE[self.op]


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence = 4

    def __post_init__(self):
        if isinstance(self.exponent, bool) or not isinstance(self.exponent, int):
            raise TypeError("Pow exponent must be an int")


# ---------------------------------------------------------------------------
# printing

def _format_number(v):
    if v.is_integer() and v < 1e15:
        return str(int(v))
    return repr(v)


def _format(e):
    if isinstance(e, Num):
        return _format_number(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Func):
        return f"{e.name}({_format(e.arg)})"
    if isinstance(e, Neg):
        # operand of unary minus must itself be a factor
        inner = _format(e.arg)
        if isinstance(e.arg, BinOp):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, Pow):
        base = _format(e.base)
        if not isinstance(e.base, (Num, Var, Func)):
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, BinOp):
        p = e.precedence
        left = _format(e.left)
        if isinstance(e.left, BinOp) and e.left.precedence < p:
            left = f"({left})"
        right = _format(e.right)
        # same-precedence right operands need parentheses to keep the
        # left-associated tree shape
        if isinstance(e.right, BinOp) and e.right.precedence <= p:
            right = f"({right})"
        if p == 1:
            return f"{left} {e.op} {right}"
        return f"{left}*{right}" if e.op == "*" else f"{left}/{right}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "number", "x", "func", "op", "end"
    text: str
    offset: int


def _tokenize(text):
    tokens = []
    pos = 0
    # offsets are reported in bytes of the UTF-8 encoding
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(text, len(text[:pos].encode()),
                                  {"number", "x", "function", "operator"})
        kind = m.lastgroup
        tok = m.group()
        offset = len(text[:pos].encode())
        if kind == "ident":
            if tok == "x":
                tokens.append(_Token("x", tok, offset))
            elif tok in FUNCTIONS:
                tokens.append(_Token("func", tok, offset))
            else:
                raise UnknownIdentifierError(tok, offset)
        elif kind != "ws":
            tokens.append(_Token(kind, tok, offset))
        pos = m.end()
    tokens.append(_Token("end", "", len(text.encode())))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, expected):
        raise ExprSyntaxError(self.text, self.tok.offset, expected)

    def accept(self, *ops):
        if self.tok.kind == "op" and self.tok.text in ops:
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, op):
        if self.accept(op) is None:
            self.error({repr(op)})

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            self.error({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while (t := self.accept("+", "-")) is not None:
            e = BinOp(t.text, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while (t := self.accept("*", "/")) is not None:
            e = BinOp(t.text, e, self.factor())
        return e

    def factor(self):
        if self.accept("-") is not None:
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^") is None:
            return base
        sign = -1 if self.accept("-") is not None else 1
        t = self.tok
        if t.kind != "number" or not t.text.isdigit():
            self.error({"integer"})
        self.i += 1
        return Pow(base, sign * int(t.text))

    def atom(self):
        t = self.tok
        if t.kind == "number":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "x":
            self.i += 1
            return Var()
        if t.kind == "func":
            self.i += 1
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Func(t.text, arg)
        if self.accept("(") is not None:
            e = self.expr()
            self.expect(")")
            return e
        self.error({"number", "'x'", "function", "'('", "'-'"})


def parse_expr(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with ``offset`` and ``expected``) for
    malformed input and :class:`UnknownIdentifierError` for names other than
    ``x`` and the supported functions.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# evaluation

def _eval(e, x):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -_eval(e.arg, x)
    if isinstance(e, BinOp):
        a = _eval(e.left, x)
        b = _eval(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise DomainError(f"division by zero in {e}")
        return a / b
    if isinstance(e, Pow):
        a = _eval(e.base, x)
        if e.exponent < 0:
            if np.any(np.asarray(a) == 0):
                raise DomainError(f"zero raised to a negative power in {e}")
            return 1.0 / a ** (-e.exponent)
        return a ** e.exponent
    if isinstance(e, Func):
        a = _eval(e.arg, x)
        if e.name == "log" and np.any(np.asarray(a) <= 0):
            raise DomainError(f"log of a non-positive value in {e}")
        if e.name == "sqrt" and np.any(np.asarray(a) < 0):
            raise DomainError(f"sqrt of a negative value in {e}")
        return getattr(np, e.name if e.name != "abs" else "absolute")(a)
    raise TypeError(f"not an expression node: {e!r}")


def eval_expr(e: Expr, x):
    """Evaluate ``e`` at ``x`` (a float or a numpy array).

    Raises :class:`DomainError` instead of returning a non-finite value.
    """
    scalar = np.ndim(x) == 0
    # numpy scalars overflow to inf (flagged below) where Python floats raise
    xv = np.float64(x) if scalar else np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xv)):
        raise DomainError("non-finite evaluation point")
    with np.errstate(all="ignore"):
        # broadcast constants so an array input always yields an array
        out = _eval(e, xv) + (0.0 if scalar else np.zeros_like(xv))
    if not np.all(np.isfinite(out)):
        raise DomainError(f"non-finite value (overflow) evaluating {e}")
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# differentiation

ZERO = Num(0.0)
ONE = Num(1.0)


def _const(e):
    """Numeric value of a constant node (possibly negated), else None."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        return -e.arg.value
    return None


def _num(v):
    v = float(v)
    return Num(v) if v >= 0 else Neg(Num(-v))


def _neg(a):
    c = _const(a)
    if c is not None:
        return _num(-c) if c != 0 else ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return _num(ca + cb)
    if ca == 0:
        return b
    if cb == 0:
        return a
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def _sub(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return _num(ca - cb)
    if cb == 0:
        return a
    if ca == 0:
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return _num(ca * cb)
    if ca == 0 or cb == 0:
        return ZERO
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca == -1:
        return _neg(b)
    if cb == -1:
        return _neg(a)
    return BinOp("*", a, b)


def _div(a, b):
    ca, cb = _const(a), _const(b)
    if ca == 0:
        return ZERO
    if cb == 1:
        return a
    if ca is not None and cb is not None and cb != 0:
        return _num(ca / cb)
    return BinOp("/", a, b)


def _pow(a, n):
    if n == 0:
        return ONE
    if n == 1:
        return a
    c = _const(a)
    if c is not None and (c != 0 or n > 0):
        return _num(c ** n)
    return Pow(a, n)


def differentiate(e: Expr) -> Expr:
    """Symbolic derivative with respect to ``x``, lightly simplified.

    ``abs`` is rejected with :class:`NotDifferentiableError`.
    """
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return _neg(differentiate(e.arg))
    if isinstance(e, BinOp):
        u, v = e.left, e.right
        du, dv = differentiate(u), differentiate(v)
        if e.op == "+":
            return _add(du, dv)
        if e.op == "-":
            return _sub(du, dv)
        if e.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, 2))
    if isinstance(e, Pow):
        n = e.exponent
        if n == 0:
            return ZERO
        return _mul(_mul(_num(n), _pow(e.base, n - 1)), differentiate(e.base))
    if isinstance(e, Func):
        u = e.arg
        du = differentiate(u) if e.name != "abs" else None
        if e.name == "sin":
            return _mul(Func("cos", u), du)
        if e.name == "cos":
            return _neg(_mul(Func("sin", u), du))
        if e.name == "exp":
            return _mul(Func("exp", u), du)
        if e.name == "log":
            return _div(du, u)
        if e.name == "sqrt":
            return _div(du, _mul(Num(2.0), Func("sqrt", u)))
        raise NotDifferentiableError(f"abs is not differentiable: {e}")
    raise TypeError(f"not an expression node: {e!r}")
