"""Arithmetic expressions for function contractivity factors.

Grammar (standard precedence, left associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | atom
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Evaluation is vectorised over numpy arrays so a factor can be sampled on a
whole grid in one call.
"""

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ExprDomainError, ExprSyntaxError, UnknownFunction, UnknownIdentifier

DIV_EPS = 1e-12
DEFAULT_SAMPLES = 4096
MIN_SAMPLES = 256

CONSTANTS = {"pi": math.pi}
FUNCTIONS = ("sin", "cos", "abs", "exp")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class FactorExpr:
    """A parsed factor together with the variables it may reference."""

    root: Node
    variables: tuple = ("x",)
    source: str = ""

    def __str__(self):
        return to_text(self.root)

    def __add__(self, other):
        return FactorExpr(BinOp("+", self.root, other.root), self.variables,
                          f"({self.source or self})+({other.source or other})")

    def __call__(self, *args):
        return evaluate(self, *args)

    def free_variables(self):
        return _free(self.root)

    def is_constant(self):
        return not self.free_variables()


@dataclass(frozen=True)
class FactorProfile:
    """Sampled extrema of a factor over one region.

    All values are estimates from a finite uniform grid (endpoints included).
    """

    sup_abs: float
    inf_abs: float
    sup_signed: float
    inf_signed: float
    lipschitz: float
    interval: tuple
    samples: int
    estimated: bool = True


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace only
            break
        number, name, char = m.groups()
        start = m.start(m.lastindex)
        if number is not None:
            tokens.append(("num", number, start))
        elif name is not None:
            tokens.append(("name", name, start))
        elif char in "+-*/()":
            tokens.append((char, char, start))
        else:
            raise ExprSyntaxError(f"unexpected character {char!r}", _byte_offset(text, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text, char_index):
    return len(text[:char_index].encode("utf-8"))


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, _byte_offset(self.text, tok[2]))

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        kind, text = tok[0], tok[1]
        if kind == "num":
            return Num(float(text))
        if kind == "(":
            node = self.expr()
            if self.take()[0] != ")":
                self.fail("expected ')'", self.tokens[self.i - 1])
            return node
        if kind == "name":
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunction(text)
                self.take()
                arg = self.expr()
                if self.take()[0] != ")":
                    self.fail("expected ')'", self.tokens[self.i - 1])
                return Call(text, arg)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if text in FUNCTIONS:
                self.fail(f"function {text!r} needs an argument", tok)
            raise UnknownIdentifier(text)
        if kind == "end":
            self.fail("unexpected end of expression", tok)
        self.fail(f"unexpected token {text!r}", tok)


def parse_expr(text, variables=("x",)):
    """Parse ``text`` into a :class:`FactorExpr` over ``variables``."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    root = _Parser(text, tuple(variables)).parse()
    return FactorExpr(root, tuple(variables), text)


def constant(value, variables=("x",)):
    return FactorExpr(Num(float(value)), tuple(variables), repr(float(value)))


def _free(node):
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg,)):
        return _free(node.operand)
    if isinstance(node, Call):
        return _free(node.arg)
    return _free(node.left) | _free(node.right)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(node, parent_prec=0, right_side=False):
    """Pretty-print with the minimum parentheses needed to re-parse identically."""
    if isinstance(node, Num):
        text = repr(node.value)
        # a negative literal cannot come out of the parser directly
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand, 3)
        text = "-" + inner
        return f"({text})" if parent_prec > 0 else text
    prec = _PREC[node.op]
    text = f"{to_text(node.left, prec)}{node.op}{to_text(node.right, prec, True)}"
    if prec < parent_prec or (right_side and prec == parent_prec):
        return f"({text})"
    return text


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        arg = _eval(node.arg, env)
        if node.func == "sin":
            return np.sin(arg)
        if node.func == "cos":
            return np.cos(arg)
        if node.func == "abs":
            return np.abs(arg)
        # exp is admitted only on non-positive arguments so factors stay bounded
        if np.any(np.asarray(arg) > 0):
            raise ExprDomainError("exp() requires a non-positive argument")
        return np.exp(arg)
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if np.any(np.abs(right) < DIV_EPS):
        raise ExprDomainError("division by a value with magnitude below 1e-12")
    return left / right


def evaluate(expr, *coords):
    """Evaluate on scalars or arrays; result broadcasts against the inputs."""
    env = dict(zip(expr.variables, coords))
    missing = expr.free_variables() - env.keys()
    if missing:
        raise UnknownIdentifier(", ".join(sorted(missing)))
    arrays = [np.asarray(c, dtype=float) for c in coords]
    shape = np.broadcast_shapes(*[a.shape for a in arrays]) if arrays else ()
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    with np.errstate(all="ignore"):
        out = np.broadcast_to(np.asarray(_eval(expr.root, env), dtype=float), shape)
    if shape == ():
        return float(out)
    return np.array(out)


def eval_expr(expr, point):
    """Evaluate at one point: a real for one variable, a pair for two."""
    if isinstance(point, (tuple, list)):
        return float(evaluate(expr, *point))
    return float(evaluate(expr, point))


def profile_expr(expr, interval, samples=DEFAULT_SAMPLES):
    """Sampled sup/inf/Lipschitz estimates over an interval or a rectangle.

    ``interval`` is ``(a, b)`` or ``((a, b), (c, d))``.  For rectangles the
    sample budget is spread as a square lattice.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"profile needs at least {MIN_SAMPLES} samples")
    if np.ndim(interval) == 1:
        a, b = map(float, interval)
        xs = np.linspace(a, b, samples)
        values = evaluate(expr, xs)
        step = xs[1] - xs[0]
        lip = float(np.max(np.abs(np.diff(values)))) / step if step > 0 else 0.0
        box = (a, b)
    else:
        (a, b), (c, d) = interval
        k = int(math.ceil(math.sqrt(samples)))
        xs = np.linspace(a, b, k)
        ys = np.linspace(c, d, k)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        values = evaluate(expr, X, Y)
        lip = 0.0
        if b > a:
            lip = max(lip, float(np.max(np.abs(np.diff(values, axis=0)))) / (xs[1] - xs[0]))
        if d > c:
            lip = max(lip, float(np.max(np.abs(np.diff(values, axis=1)))) / (ys[1] - ys[0]))
        box = ((float(a), float(b)), (float(c), float(d)))
        samples = k * k
    mags = np.abs(values)
    return FactorProfile(
        sup_abs=float(mags.max()),
        inf_abs=float(mags.min()),
        sup_signed=float(values.max()),
        inf_signed=float(values.min()),
        lipschitz=float(lip),
        interval=box,
        samples=int(samples),
    )
