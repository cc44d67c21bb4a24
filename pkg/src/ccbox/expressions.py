"""Tiny arithmetic expression grammar for family definition files.

Supported: +, -, *, /, ** (also ^), unary minus, abs(...), numeric literals
and the coordinate names x1..xn.  Expressions compile to numpy-vectorized
callables taking an (..., n) point array.
"""

import ast

import numpy as np

from .errors import ConfigError

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


def _check(node, dim):
    if isinstance(node, ast.Expression):
        _check(node.body, dim)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, dim)
        _check(node.right, dim)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, dim)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id == "abs"):
            raise ConfigError("only the abs(...) function is allowed")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError("abs takes exactly one argument")
        _check(node.args[0], dim)
    elif isinstance(node, ast.Name):
        name = node.id
        if not (name.startswith("x") and name[1:].isdigit()):
            raise ConfigError(f"unknown name {name!r} (use x1..x{dim})")
        k = int(name[1:])
        if not 1 <= k <= dim:
            raise ConfigError(f"coordinate {name!r} out of range for dimension {dim}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ConfigError(f"literal {node.value!r} not allowed")
    else:
        raise ConfigError(f"syntax element {type(node).__name__} not allowed")


def compile_expression(text, dim):
    """Compile one expression string to a callable point-array -> scalar array."""
    source = str(text).replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc
    _check(tree, dim)
    code = compile(tree, filename="<family-expression>", mode="eval")

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        env = {f"x{k + 1}": x[..., k] for k in range(dim)}
        env["abs"] = np.abs
        out = eval(code, {"__builtins__": {}}, env)  # noqa: S307 - AST-restricted
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()

    evaluate.source = source
    return evaluate


def compile_vector(exprs, dim):
    """Compile a list of n component expressions into one point -> vector map."""
    comps = [compile_expression(e, dim) for e in exprs]

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return np.stack([c(x) for c in comps], axis=-1)

    evaluate.sources = [c.source for c in comps]
    return evaluate
