"""Small recursive-descent parser for kernel and forcing expressions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' ['-'] INTEGER)?
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)``.  Exponents must be integer literals.  Known
functions: sin, cos, tanh, exp, abs, sqrt; constant: pi.  The admissible
variable names are supplied by the caller (``x, x1, x2, x3`` for physical
expressions, ``p, p1, p2, p3, n`` for spectral ones).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

PHYSICAL_VARS = frozenset({"x", "x1", "x2", "x3"})
SPECTRAL_VARS = frozenset({"p", "p1", "p2", "p3", "n"})

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
}
CONSTANTS = {"pi": np.pi}


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, source: str):
        self.position = position
        self.source = source
        super().__init__(f"{message} at position {position} in {source!r}")


class ExprDomainError(ExprError):
    """Evaluation left the expression's domain (division by zero, sqrt < 0)."""


# ----------------------------------------------------------------------
# AST
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    name: str

    def evaluate(self, env):
        return env[self.name]


@dataclass(frozen=True)
class Call:
    func: str
    arg: object

    def evaluate(self, env):
        val = self.arg.evaluate(env)
        if self.func == "neg":
            return -val
        if self.func == "sqrt" and np.any(np.asarray(val) < 0):
            raise ExprDomainError("sqrt of a negative value")
        return FUNCTIONS[self.func](val)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    @property
    def checks_domain(self) -> bool:
        return self.op == "/"

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(np.asarray(b) == 0):
                raise ExprDomainError("division by zero")
            return a / b
        raise AssertionError(self.op)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int

    def evaluate(self, env):
        b = self.base.evaluate(env)
        if self.exponent < 0:
            if np.any(np.asarray(b) == 0):
                raise ExprDomainError("negative power of zero")
            return 1.0 / b ** (-self.exponent)
        return b**self.exponent


@dataclass(frozen=True)
class Expression:
    """Parsed expression with its source text."""

    source: str
    root: object
    variables: frozenset

    def __call__(self, **env) -> np.ndarray | float:
        return self.evaluate(env)

    def evaluate(self, env: Mapping[str, object]):
        env = dict(env)
        if "x" in env and "x1" not in env:
            env["x1"] = env["x"]
        if "x1" in env and "x" not in env:
            env["x"] = env["x1"]
        if "p" in env and "p1" not in env:
            env["p1"] = env["p"]
        if "p1" in env and "p" not in env:
            env["p"] = env["p1"]
        missing = [v for v in self.used_variables() if v not in env]
        if missing:
            raise ExprError(f"no value supplied for {missing} in {self.source!r}")
        with np.errstate(all="ignore"):
            out = self.root.evaluate(env)
        shape = np.broadcast_shapes(*(np.shape(env[v]) for v in self.used_variables())) \
            if self.used_variables() else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    def used_variables(self) -> set[str]:
        found = set()

        def walk(node):
            if isinstance(node, Var):
                found.add(node.name)
            elif isinstance(node, Call):
                walk(node.arg)
            elif isinstance(node, BinOp):
                walk(node.left)
                walk(node.right)
            elif isinstance(node, Pow):
                walk(node.base)

        walk(self.root)
        return found


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r}",
                                  pos + len(text[pos:]) - len(text[pos:].lstrip()), text)
        start = m.start(m.lastgroup)
        value = m.group(m.lastgroup)
        if value == "**":
            value = "^"
        tokens.append((m.lastgroup, value, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: frozenset):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def fail(self, message):
        kind, value, pos = self.tok
        where = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"{message}, found {where}", pos, self.text)

    def accept(self, value):
        if self.tok[0] == "op" and self.tok[1] == value:
            self.i += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            self.fail(f"expected {value!r}")

    def parse(self):
        node = self.expr()
        if self.tok[0] != "end":
            self.fail("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in ("*", "/"):
            op = self.tok[1]
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Call("neg", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            kind, value, _ = self.tok
            if kind != "num" or not re.fullmatch(r"\d+", value):
                self.fail("integer exponent expected")
            self.i += 1
            return Pow(base, sign * int(value))
        return base

    def atom(self):
        kind, value, pos = self.tok
        if kind == "num":
            self.i += 1
            return Num(float(value))
        if kind == "name":
            self.i += 1
            if value in FUNCTIONS:
                if not self.accept("("):
                    self.fail(f"expected '(' after {value}")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in CONSTANTS:
                return Num(CONSTANTS[value])
            if value in self.variables:
                return Var(value)
            raise ExprSyntaxError(f"unknown identifier {value!r}", pos, self.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, name or '('")


def parse_expr(text: str, variables=PHYSICAL_VARS) -> Expression:
    """Parse ``text`` into an :class:`Expression` over ``variables``."""
    if not isinstance(text, str):
        raise ExprError(f"expression must be a string, got {type(text).__name__}")
    variables = frozenset(variables)
    return Expression(text, _Parser(text, variables).parse(), variables)
