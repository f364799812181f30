"""Scalar arithmetic expressions in the variables t, x, y.

Grammar, tightest binding first::

    ^            right associative
    unary -
    * /          left associative
    + -          left associative

Functions: sin cos exp abs sqrt sign (one argument), min max (two).
Constants: pi, e.  Implicit multiplication is rejected.

Evaluation follows IEEE double semantics: division by zero, overflow and
domain errors give inf/nan instead of raising.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

from .errors import ParseError

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expr",
    "ExpressionSyntaxError", "UnknownIdentifier",
    "parse_expression", "eval_expression", "pretty", "compile_expression",
    "variables_of", "ExprFunction",
]

VARIABLES = ("t", "x", "y")
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "sqrt": 1, "sign": 1, "min": 2, "max": 2}
MAX_DEPTH = 64


class ExpressionSyntaxError(ParseError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownIdentifier(ParseError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} (at byte {offset})")
        self.name = name
        self.offset = offset


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


# --- IEEE helpers shared by the tree walker and the compiled closures -------

def _div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        if a != a or a == 0.0:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _pow(a, b):
    if b == 2.0:
        return a * a
    if b == 3.0:
        return a * a * a
    try:
        return math.pow(a, b)
    except ValueError:
        if a == 0.0 and b < 0.0:
            odd = b == math.floor(b) and int(b) % 2 == 1
            return math.copysign(math.inf, a) if odd else math.inf
        return math.nan
    except OverflowError:
        odd = b == math.floor(b) and int(b) % 2 == 1
        return -math.inf if (a < 0.0 and odd) else math.inf


def _guard(fn, overflow=math.inf):
    def wrapped(a):
        try:
            return fn(a)
        except ValueError:
            return math.nan
        except OverflowError:
            return overflow
    return wrapped


def _sign(a):
    if a > 0.0:
        return 1.0
    if a < 0.0:
        return -1.0
    return a  # keeps 0.0, -0.0 and nan


_RUNTIME = {
    "_div": _div,
    "_pow": _pow,
    "_sin": _guard(math.sin),
    "_cos": _guard(math.cos),
    "_exp": _guard(math.exp),
    "_sqrt": _guard(math.sqrt),
    "_abs": abs,
    "_sign": _sign,
    "_min": min,
    "_max": max,
}


# --- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    offsets = _byte_offsets(src)
    while True:
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            rest = src[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {src[bad]!r}", offsets[bad])
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), offsets[start]))
        pos = m.end()
    tokens.append(("end", "", offsets[len(src)]))
    return tokens


def _byte_offsets(src: str):
    out = [0] * (len(src) + 1)
    acc = 0
    for i, ch in enumerate(src):
        out[i] = acc
        acc += len(ch.encode("utf-8", "surrogatepass"))
    out[len(src)] = acc
    return out


# --- Pratt parser -----------------------------------------------------------

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, text, off = self.advance()
        if kind != "op" or text != op:
            raise ExpressionSyntaxError(f"expected {op!r}, found {text or 'end of input'!r}", off)

    def expression(self, rbp=0):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExpressionSyntaxError("expression nested too deeply", self.peek()[2])
        left = self.nud(self.advance())
        while True:
            kind, text, off = self.peek()
            if kind == "op" and text in _INFIX:
                lbp = _INFIX[text]
                if lbp <= rbp:
                    break
                self.advance()
                # ^ is right associative: parse its right side one notch weaker
                right = self.expression(lbp - 1 if text == "^" else lbp)
                left = BinOp(text, left, right)
            elif kind in ("end",) or (kind == "op" and text in "),"):
                break
            else:
                raise ExpressionSyntaxError(f"unexpected token {text!r}", off)
        self.depth -= 1
        return left

    def nud(self, tok):
        kind, text, off = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in VARIABLES:
                return Var(text)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if text in FUNCTIONS:
                return self.call(text, off)
            raise UnknownIdentifier(text, off)
        if kind == "op" and text == "-":
            return Neg(self.expression(_UNARY_BP))
        if kind == "op" and text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        raise ExpressionSyntaxError(f"unexpected {text or 'end of input'!r}", off)

    def call(self, name, off):
        kind, text, _ = self.peek()
        if kind != "op" or text != "(":
            raise ExpressionSyntaxError(f"function {name!r} must be called", off)
        self.advance()
        args = [self.expression(0)]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            args.append(self.expression(0))
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ExpressionSyntaxError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", off)
        return Call(name, tuple(args))


def parse_expression(src) -> Expr:
    """Parse ``src`` (str or UTF-8 bytes) into an expression tree."""
    if isinstance(src, (bytes, bytearray)):
        try:
            src = bytes(src).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ExpressionSyntaxError("invalid UTF-8", exc.start) from None
    if not src.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    parser = _Parser(_tokenize(src))
    tree = parser.expression(0)
    kind, text, off = parser.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"unexpected token {text!r}", off)
    if _depth(tree) > MAX_DEPTH:
        raise ExpressionSyntaxError("expression nested too deeply", 0)
    return tree


def _depth(e) -> int:
    if isinstance(e, (Num, Var)):
        return 1
    if isinstance(e, Neg):
        return 1 + _depth(e.operand)
    if isinstance(e, BinOp):
        return 1 + max(_depth(e.left), _depth(e.right))
    return 1 + max(_depth(a) for a in e.args)


def variables_of(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables_of(e.operand)
    if isinstance(e, BinOp):
        return variables_of(e.left) | variables_of(e.right)
    return set().union(*(variables_of(a) for a in e.args))


# --- evaluation -------------------------------------------------------------

_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


def eval_expression(e: Expr, t: float, x: float, y: float) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return {"t": t, "x": x, "y": y}[e.name]
    if isinstance(e, Neg):
        return -eval_expression(e.operand, t, x, y)
    if isinstance(e, BinOp):
        a = eval_expression(e.left, t, x, y)
        b = eval_expression(e.right, t, x, y)
        return _BINARY[e.op](a, b)
    args = [eval_expression(a, t, x, y) for a in e.args]
    return _RUNTIME["_" + e.name](*args)


def _source(e) -> str:
    if isinstance(e, Num):
        return repr(e.value) if math.isfinite(e.value) else f"float({str(e.value)!r})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_source(e.operand)})"
    if isinstance(e, BinOp):
        a, b = _source(e.left), _source(e.right)
        if e.op == "/":
            return f"_div({a}, {b})"
        if e.op == "^":
            if isinstance(e.right, Num) and e.right.value == 2.0:
                return f"(({a})*({a}))" if isinstance(e.left, (Num, Var)) else f"_pow({a}, 2.0)"
            if isinstance(e.right, Num) and e.right.value == 3.0 and isinstance(e.left, (Num, Var)):
                return f"({a}*{a}*{a})"
            return f"_pow({a}, {b})"
        return f"({a} {e.op} {b})"
    return f"_{e.name}({', '.join(_source(a) for a in e.args)})"


def compile_expression(e: Expr, args=("t", "x", "y")) -> Callable:
    """Compile to a plain Python function of ``args``; agrees bitwise with eval_expression."""
    free = variables_of(e) - set(args)
    if free:
        raise ValueError(f"expression uses {sorted(free)} outside the arguments {args}")
    code = f"lambda {', '.join(args)}: {_source(e)}"
    return eval(code, dict(_RUNTIME, __builtins__={"float": float}))


# --- pretty printing --------------------------------------------------------

def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _INFIX[e.op]
    if isinstance(e, Neg):
        return _UNARY_BP
    return 100


def pretty(e: Expr) -> str:
    if isinstance(e, Num):
        text = repr(e.value)
        return f"({text})" if e.value < 0 or text.startswith("-") else text
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.name}({', '.join(pretty(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = pretty(e.operand)
        return f"-({inner})" if _prec(e.operand) < _UNARY_BP else f"-{inner}"
    p = _INFIX[e.op]
    left, right = pretty(e.left), pretty(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p and not isinstance(e.right, Neg):
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {e.op} {right}"


class ExprFunction:
    """Picklable callable wrapping a parsed expression.

    ``args`` picks the call signature: ("t", "x") for restoring forces,
    ("t", "x", "y") for perturbations, ("t",) for periodic functions.
    """

    def __init__(self, source: str, args=("t", "x", "y"), params=None):
        self.source = source
        self.args = tuple(args)
        self.params = dict(params or {})
        text = source
        for name, value in self.params.items():
            text = re.sub(rf"\b{re.escape(name)}\b", f"({float(value)!r})", text)
        self.tree = parse_expression(text)
        self._fast = None

    @property
    def fast(self):
        if self._fast is None:
            self._fast = compile_expression(self.tree, self.args)
        return self._fast

    def __call__(self, *values):
        return self.fast(*values)

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_fast"] = None
        return state

    def __repr__(self):
        return f"ExprFunction({self.source!r}, params={self.params})"
