"""A small arithmetic-expression evaluator for problem configuration files.

Supports numbers, named variables, the constants pi and e, the operators
+ - * / ^ (power, right associative) with unary minus, parentheses, and a
fixed set of functions over numpy, so compiled expressions evaluate pointwise
on arrays.  No attribute access, no names beyond the whitelist: just enough
to describe coefficients, sources and boundary data.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ConfigError

_FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "asin": np.arcsin, "acos": np.arccos, "atan": np.arctan,
    "atan2": np.arctan2, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "log10": np.log10,
    "sqrt": np.sqrt, "abs": np.abs, "sign": np.sign,
    "min": np.minimum, "max": np.maximum,
}
_CONSTANTS = {"pi": np.pi, "e": np.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            if src[pos:].strip():
                raise ConfigError(f"cannot tokenize expression at: {src[pos:]!r}")
            break
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            op = m.group("op")
            tokens.append(("op", "^" if op == "**" else op))
    tokens.append(("end", None))
    return tokens


class _Parser:
    """Pratt parser producing nested tuples."""

    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, op):
        kind, val = self.next()
        if kind != "op" or val != op:
            raise ConfigError(f"expected {op!r}, found {val!r}")

    def parse(self):
        node = self.expression(0)
        if self.peek()[0] != "end":
            raise ConfigError(f"trailing input near {self.peek()[1]!r}")
        return node

    def expression(self, min_bp):
        node = self.prefix()
        while True:
            kind, val = self.peek()
            if kind != "op" or val not in ("+", "-", "*", "/", "^"):
                break
            lbp, rbp = {"+": (10, 11), "-": (10, 11), "*": (20, 21),
                        "/": (20, 21), "^": (31, 30)}[val]
            if lbp < min_bp:
                break
            self.next()
            rhs = self.expression(rbp)
            node = (val, node, rhs)
        return node

    def prefix(self):
        kind, val = self.next()
        if kind == "num":
            return ("num", val)
        if kind == "op" and val == "-":
            return ("neg", self.expression(25))
        if kind == "op" and val == "+":
            return self.expression(25)
        if kind == "op" and val == "(":
            node = self.expression(0)
            self.expect(")")
            return node
        if kind == "name":
            if self.peek() == ("op", "("):
                self.next()
                args = [self.expression(0)]
                while self.peek() == ("op", ","):
                    self.next()
                    args.append(self.expression(0))
                self.expect(")")
                if val not in _FUNCTIONS:
                    raise ConfigError(f"unknown function {val!r}")
                return ("call", val, args)
            if val in _CONSTANTS:
                return ("num", _CONSTANTS[val])
            if val not in self.variables:
                raise ConfigError(f"unknown variable {val!r} "
                                  f"(expected one of {sorted(self.variables)})")
            return ("var", val)
        raise ConfigError(f"unexpected token {val!r}")


def _to_python(node) -> str:
    """Render the parsed tree as a Python expression over numpy functions."""
    op = node[0]
    if op == "num":
        return repr(node[1])
    if op == "var":
        return node[1]
    if op == "neg":
        return f"(-{_to_python(node[1])})"
    if op == "call":
        args = ", ".join(_to_python(a) for a in node[2])
        return f"_f_{node[1]}({args})"
    a, b = _to_python(node[1]), _to_python(node[2])
    sym = {"+": "+", "-": "-", "*": "*", "/": "/", "^": "**"}[op]
    return f"({a} {sym} {b})"


def compile_expression(src: str, variables: tuple):
    """Compile a source string into fn(*arrays) over the named variables.

    The parsed tree is rendered back to a plain Python lambda over numpy
    ufuncs, so evaluation runs at native numpy speed.
    """
    ast = _Parser(_tokenize(src), set(variables)).parse()
    body = _to_python(ast)
    namespace = {f"_f_{name}": fn for name, fn in _FUNCTIONS.items()}
    arglist = ", ".join(variables) if variables else ""
    raw = eval(f"lambda {arglist}: {body}", namespace)  # noqa: S307 (own AST)

    def fn(*args):
        if len(args) != len(variables):
            raise TypeError(f"expression takes {len(variables)} arguments")
        out = raw(*args)
        if np.isscalar(out) or np.ndim(out) == 0:
            shape = np.broadcast_shapes(*(np.shape(a) for a in args)) if args else ()
            if shape:
                return np.full(shape, float(out))
        return out

    fn.source = src
    return fn
