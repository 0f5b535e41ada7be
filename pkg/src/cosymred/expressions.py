"""Minimal arithmetic expressions for scenario files.

Grammar: numbers, names, ``+ - * / ^`` (``**`` is accepted too), unary
minus, parentheses and one-argument calls to the functions in
:data:`cosymred.dual.ELEMENTARY`.  Expressions compile to closures that work
on floats, arrays and dual numbers alike.
"""

import ast
import math
import operator

from . import dual as D
from .errors import ParseError

CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


class Expression:
    """Compiled expression; call with a mapping ``name -> value``."""

    def __init__(self, text, names=(), constants=None, key=None, line=None):
        self.text = text
        self.key = key
        consts = dict(CONSTANTS)
        consts.update(constants or {})
        self.constants = consts
        self.names = tuple(names)
        src = text.replace("^", "**").strip()
        if not src:
            raise ParseError("empty expression", line, key)
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ParseError(f"cannot parse {text!r}: {exc.msg}", line, key) from None
        self.free = set()
        self._fn = self._compile(tree.body, line)
        unknown = self.free - set(self.names)
        if unknown:
            raise ParseError(f"unknown name(s) {sorted(unknown)} in {text!r}", line, key)

    def _compile(self, node, line):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            name = node.id
            if name in self.names:
                self.free.add(name)
                return lambda env: env[name]
            if name in self.constants:
                v = float(self.constants[name])
                return lambda env: v
            self.free.add(name)
            return lambda env: env[name]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            a = self._compile(node.left, line)
            b = self._compile(node.right, line)
            return lambda env: op(a(env), b(env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            a = self._compile(node.operand, line)
            if isinstance(node.op, ast.USub):
                return lambda env: -a(env)
            return a
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            fname = node.func.id
            if fname not in D.ELEMENTARY:
                raise ParseError(f"unknown function {fname!r}", line, self.key)
            if len(node.args) != 1 or node.keywords:
                raise ParseError(f"{fname} takes exactly one argument", line, self.key)
            f = D.ELEMENTARY[fname]
            a = self._compile(node.args[0], line)
            return lambda env: f(a(env))
        raise ParseError(f"unsupported syntax in {self.text!r}", line, self.key)

    def __call__(self, env):
        return self._fn(env)

    def on(self, names):
        """Closure over a coordinate list ordered like ``names``."""
        names = list(names)
        fn = self._fn

        def f(x):
            return fn(dict(zip(names, x)))

        return f

    def __repr__(self):
        return f"Expression({self.text!r})"


def compile_expr(text, names, constants=None, key=None, line=None):
    return Expression(text, names, constants, key, line)


def constant_value(text, constants=None, key=None, line=None):
    """Evaluate an expression that may only use constants."""
    return float(Expression(text, (), constants, key, line)({}))


def split_top(text, sep=","):
    """Split on ``sep`` outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or parts:
        parts.append(tail)
    return parts
