"""Scalar expression language in the variables u1..uN.

Grammar (whitespace is ignored)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' exponent)?
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-u1^2`` is ``-(u1^2)``.  The
exponent must reduce to a constant: a number, optionally negated or
parenthesized, or another constant power (``u1^2^3`` is ``u1^8``).
Variables are written 1-based (``u1``) and stored 0-based.
"""

from __future__ import annotations

import math
import re
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ComponentError, ExprError, JetDomainError
from .jet import Jet3, jet_constant, jet_variable, pow_derivatives

__all__ = [
    "FUNCTIONS",
    "Binary",
    "Constant",
    "Expr",
    "Unary",
    "Variable",
    "VectorFunction",
    "eval_jet",
    "eval_real",
    "eval_vector_jets",
    "parse",
    "to_source",
    "tokenize",
]

FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")
MAX_VARIABLE = 99


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    index: int


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Unary:
    fn: str  # "neg" or one of FUNCTIONS
    child: Expr


Expr = Union[Constant, Variable, Binary, Unary]


# -- lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, var, func, op, end
    text: str
    pos: int


def tokenize(source: str, param_dim: int | None = None) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        text = m.group()
        if kind == "number":
            # "2u1" and "2sin(u1)": no implicit multiplication
            if m.end() < len(source) and (source[m.end()].isalpha() or source[m.end()] == "_"):
                raise ExprError(f"malformed number {source[pos:m.end() + 1]!r}", pos, source)
            tokens.append(Token("number", text, pos))
        elif kind == "name":
            tokens.append(_classify_name(text, pos, source, param_dim))
        elif kind == "op":
            tokens.append(Token("op", text, pos))
        pos = m.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


def _classify_name(text, pos, source, param_dim):
    if text in FUNCTIONS:
        return Token("func", text, pos)
    m = re.fullmatch(r"u([1-9]\d?)", text)
    if m is None:
        raise ExprError(f"unknown name {text!r}", pos, source)
    index = int(m.group(1))
    if param_dim is not None and index > param_dim:
        raise ExprError(
            f"variable {text} exceeds parameter dimension {param_dim}", pos, source
        )
    return Token("var", text, pos)


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, source, param_dim):
        self.source = source
        self.tokens = tokenize(source, param_dim)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        if self.tok.text != text or self.tok.kind != "op":
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, message):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprError(f"{message}, found {found}", tok.pos, self.source)

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Unary("neg", self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            pos = self.tok.pos
            exponent = _fold_constant(self.exponent())
            if exponent is None:
                raise ExprError("exponent must be a constant", pos, self.source)
            return Binary("^", base, Constant(exponent))
        return base

    def exponent(self):
        # same shape as factor, so "u1^-2" and "u1^2^3" are accepted
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Unary("neg", self.exponent())
        return self.power()

    def atom(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Constant(float(tok.text))
        if tok.kind == "var":
            self.advance()
            return Variable(int(tok.text[1:]) - 1)
        if tok.kind == "func":
            self.advance()
            self.expect("(")
            child = self.expr()
            self.expect(")")
            return Unary(tok.text, child)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, variable, function or '('")


def _fold_constant(node):
    """Value of a variable-free tree, or None."""
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Variable):
        return None
    try:
        return eval_real(node, ())
    except (IndexError, JetDomainError, ExprError):
        return None


def parse(source: str, param_dim: int) -> Expr:
    """Parse ``source`` into an expression tree over ``param_dim`` variables."""
    if param_dim < 1 or param_dim > MAX_VARIABLE:
        raise ValueError(f"param_dim must be in [1, {MAX_VARIABLE}]")
    if not source or not source.strip():
        raise ExprError("empty expression", 0, source)
    return _Parser(source, param_dim).parse()


def to_source(node: Expr) -> str:
    """Fully parenthesized source text that parses back to ``node``."""
    if isinstance(node, Constant):
        text = repr(node.value)
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Variable):
        return f"u{node.index + 1}"
    if isinstance(node, Binary):
        return f"({to_source(node.left)}{node.op}{to_source(node.right)})"
    if node.fn == "neg":
        return f"(-{to_source(node.child)})"
    return f"{node.fn}({to_source(node.child)})"


def max_variable(node: Expr) -> int:
    """Largest 0-based variable index in the tree, or -1."""
    if isinstance(node, Variable):
        return node.index
    if isinstance(node, Binary):
        return max(max_variable(node.left), max_variable(node.right))
    if isinstance(node, Unary):
        return max_variable(node.child)
    return -1


# -- evaluation -------------------------------------------------------------


def _real_unary(fn, x):
    if fn == "neg":
        return -x
    if fn == "sin":
        return math.sin(x)
    if fn == "cos":
        return math.cos(x)
    if fn == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            raise JetDomainError(f"exp overflow at {x!r}") from None
    if fn == "ln":
        if x <= 0:
            raise JetDomainError(f"ln of nonpositive value {x!r}")
        return math.log(x)
    if fn == "sqrt":
        if x < 0:
            raise JetDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    raise ValueError(f"unknown function {fn!r}")


def eval_real(node: Expr, u: Sequence[float]) -> float:
    """Plain floating-point evaluation."""
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Variable):
        return float(u[node.index])
    if isinstance(node, Unary):
        return _real_unary(node.fn, eval_real(node.child, u))
    x = eval_real(node.left, u)
    y = eval_real(node.right, u)
    op = node.op
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    if op == "/":
        if y == 0:
            raise JetDomainError("division by zero")
        return x / y
    p = y
    if x < 0 and not float(p).is_integer():
        raise JetDomainError(f"negative base {x!r} with non-integer exponent {p!r}")
    if x == 0 and p < 0:
        raise JetDomainError(f"0 ** {p!r}")
    try:
        return x ** int(p) if float(p).is_integer() else x**p
    except OverflowError:
        raise JetDomainError(f"overflow in {x!r} ** {p!r}") from None


def _jet(node, seeds, dim):
    if isinstance(node, Constant):
        return jet_constant(node.value, dim)
    if isinstance(node, Variable):
        return seeds[node.index]
    if isinstance(node, Unary):
        child = _jet(node.child, seeds, dim)
        if node.fn == "neg":
            return -child
        return getattr(child, node.fn)()
    if node.op == "^":
        base = _jet(node.left, seeds, dim)
        return base.compose(*pow_derivatives(base.value, node.right.value))
    x = _jet(node.left, seeds, dim)
    # constants on the right are common (u1/2, u1*3); skip a jet product
    if isinstance(node.right, Constant):
        y = node.right.value
    else:
        y = _jet(node.right, seeds, dim)
    op = node.op
    if op == "+":
        return x + y
    if op == "-":
        return x - y
    if op == "*":
        return x * y
    return x / y


def eval_jet(node: Expr, u: Sequence[float]) -> Jet3:
    """Degree-3 jet of ``node`` at the point ``u`` (dimension ``len(u)``)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.all(np.isfinite(u)):
        raise ValueError("evaluation point must be finite")
    dim = u.size
    if max_variable(node) >= dim:
        raise ExprError(f"expression uses u{max_variable(node) + 1} but the point has dim {dim}")
    seeds = [jet_variable(i, u[i], dim) for i in range(dim)]
    return _jet(node, seeds, dim)


@dataclass(frozen=True)
class VectorFunction:
    """Vector of scalar expressions sharing ``param_dim`` variables."""

    components: tuple
    param_dim: int
    sources: tuple = ()
    name: str = "v"

    def __post_init__(self):
        for k, comp in enumerate(self.components):
            if max_variable(comp) >= self.param_dim:
                raise ExprError(f"{self.name}[{k}] uses a variable beyond u{self.param_dim}")

    @classmethod
    def from_sources(cls, sources: Sequence[str], param_dim: int, name: str = "v"):
        comps = []
        for k, src in enumerate(sources):
            try:
                comps.append(parse(src, param_dim))
            except ExprError as exc:
                raise ComponentError(name, k, exc) from exc
        return cls(tuple(comps), param_dim, tuple(sources), name)

    @property
    def ambient_dim(self) -> int:
        return len(self.components)

    def evaluate(self, u) -> np.ndarray:
        return np.array([eval_real(c, u) for c in self.components])


def eval_vector_jets(v: VectorFunction, u: Sequence[float]) -> list[Jet3]:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != v.param_dim:
        raise ValueError(f"point has dim {u.size}, expected {v.param_dim}")
    out = []
    for k, comp in enumerate(v.components):
        try:
            out.append(eval_jet(comp, u))
        except JetDomainError as exc:
            raise ComponentError(v.name, k, exc) from exc
    return out
