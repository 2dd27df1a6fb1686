"""Tiny arithmetic expression language for problem data.

Supports +, -, *, /, ^ (power), parentheses, the functions sin, cos, exp,
abs, sqrt, spow(a, gamma), the constants pi and e, and caller-declared
variables.  Expressions compile to closures over a name -> array mapping,
so evaluation is vectorized.
"""

from __future__ import annotations

import re

import numpy as np

from .algebra import signed_power


class ExprError(ValueError):
    """Malformed expression; message carries the offending position."""


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
}

_CONSTANTS = {"pi": np.pi, "e": np.e}


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExprError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.group("num") is not None:
            out.append(("num", float(m.group("num")), m.start()))
        elif m.group("name") is not None:
            out.append(("name", m.group("name"), m.start()))
        else:
            out.append(("op", m.group("op"), m.start()))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class Expression:
    """A compiled expression: call with a dict of variable arrays."""

    def __init__(self, fn, variables, text):
        self._fn = fn
        self.variables = frozenset(variables)
        self.text = text

    def __call__(self, env):
        return self._fn(env)

    def __repr__(self):
        return f"Expression({self.text!r})"


def compile_expression(text: str, allowed_variables) -> Expression:
    allowed = set(allowed_variables)
    tokens = _tokenize(text)
    used = set()
    idx = [0]

    def peek():
        return tokens[idx[0]]

    def advance():
        tok = tokens[idx[0]]
        idx[0] += 1
        return tok

    def expect_op(op):
        kind, val, pos = advance()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r} at position {pos} in {text!r}")

    def parse_sum():
        node = parse_product()
        while peek()[:2] in (("op", "+"), ("op", "-")):
            _, op, _ = advance()
            rhs = parse_product()
            if op == "+":
                node = (lambda a, b: lambda env: a(env) + b(env))(node, rhs)
            else:
                node = (lambda a, b: lambda env: a(env) - b(env))(node, rhs)
        return node

    def parse_product():
        node = parse_unary()
        while peek()[:2] in (("op", "*"), ("op", "/")):
            _, op, _ = advance()
            rhs = parse_unary()
            if op == "*":
                node = (lambda a, b: lambda env: a(env) * b(env))(node, rhs)
            else:
                node = (lambda a, b: lambda env: a(env) / b(env))(node, rhs)
        return node

    def parse_unary():
        if peek()[:2] == ("op", "-"):
            advance()
            inner = parse_unary()
            return lambda env: -inner(env)
        if peek()[:2] == ("op", "+"):
            advance()
            return parse_unary()
        return parse_power()

    def parse_power():
        base = parse_atom()
        if peek()[:2] == ("op", "^"):
            advance()
            expo = parse_unary()  # right associative, binds tighter than unary -
            return (lambda a, b: lambda env: a(env) ** b(env))(base, expo)
        return base

    def parse_atom():
        kind, val, pos = advance()
        if kind == "num":
            return lambda env, v=val: v
        if kind == "op" and val == "(":
            node = parse_sum()
            expect_op(")")
            return node
        if kind == "name":
            if val in _FUNCTIONS:
                expect_op("(")
                arg = parse_sum()
                expect_op(")")
                fn = _FUNCTIONS[val]
                return lambda env, a=arg, f=fn: f(a(env))
            if val == "spow":
                expect_op("(")
                arg = parse_sum()
                expect_op(",")
                kind2, gval, pos2 = advance()
                if kind2 == "op" and gval == "-":
                    kind2, gval, pos2 = advance()
                    gval = -gval if kind2 == "num" else gval
                if kind2 != "num":
                    raise ExprError(
                        f"spow exponent must be a number (position {pos2})"
                    )
                expect_op(")")
                return lambda env, a=arg, g=float(gval): signed_power(a(env), g)
            if val in _CONSTANTS:
                return lambda env, v=_CONSTANTS[val]: v
            if val in allowed:
                used.add(val)
                return lambda env, name=val: env[name]
            raise ExprError(
                f"unknown name {val!r} at position {pos}; "
                f"allowed variables: {sorted(allowed)}"
            )
        raise ExprError(f"unexpected token at position {pos} in {text!r}")

    root = parse_sum()
    kind, _, pos = peek()
    if kind != "end":
        raise ExprError(f"trailing input at position {pos} in {text!r}")
    return Expression(root, used, text)


_AXIS_ALIASES = ({"x": "x_1"}, {"x": "x_1", "y": "x_2"},
                 {"x": "x_1", "y": "x_2", "z": "x_3"})


def spatial_names(dim: int):
    """Canonical spatial variable names plus their aliases for a dimension."""
    names = {f"x_{i + 1}" for i in range(dim)}
    aliases = _AXIS_ALIASES[dim - 1]
    return names, aliases


def compile_spacetime(text: str, dim: int, with_time: bool = True) -> Expression:
    """Compile an expression over x_1..x_dim (aliases x, y, z) and optionally t."""
    names, aliases = spatial_names(dim)
    allowed = set(names) | set(aliases) | ({"t"} if with_time else set())
    expr = compile_expression(text, allowed)
    return expr


def spacetime_callable(expr: Expression, dim: int):
    """Wrap a compiled expression as f(X, t) -> (Q,) over node arrays."""
    _, aliases = spatial_names(dim)

    def fn(X, t=0.0):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        env = {f"x_{i + 1}": X[:, i] for i in range(dim)}
        for alias, target in aliases.items():
            env[alias] = env[target]
        env["t"] = t
        return np.broadcast_to(np.asarray(expr(env), dtype=float),
                               (X.shape[0],)).copy()

    return fn
