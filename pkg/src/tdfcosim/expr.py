"""Guard and value expressions for task FSMs.

A restricted subset of Python expression syntax: numbers, ``true``/``false``
(or ``True``/``False``), declared variable names, arithmetic, comparisons
and boolean connectives. Compiled once, evaluated against a variable dict.
"""

import ast
import operator

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv, ast.Mod: operator.mod,
}
_CMPOPS = {
    ast.Eq: operator.eq, ast.NotEq: operator.ne, ast.Lt: operator.lt,
    ast.LtE: operator.le, ast.Gt: operator.gt, ast.GtE: operator.ge,
}
_CONSTS = {"true": True, "false": False, "True": True, "False": False}


class ExprError(ValueError):
    pass


def compile_expr(source, names=None):
    """Compile ``source`` into a callable ``f(env) -> value``.

    ``source`` may already be a number or bool literal. When ``names`` is
    given, every variable referenced must be in it.
    """
    if isinstance(source, (bool, int, float)):
        return lambda env, v=source: v
    if not isinstance(source, str):
        raise ExprError(f"expression must be a string or literal, got {source!r}")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"bad expression {source!r}: {exc.msg}") from None
    return _compile(tree.body, source, names)


def referenced_names(source):
    if not isinstance(source, str):
        return set()
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError:
        return set()
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id not in _CONSTS}


def _compile(node, source, names):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (bool, int, float)):
            return lambda env, v=node.value: v
        raise ExprError(f"unsupported literal in {source!r}")
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            return lambda env, v=_CONSTS[node.id]: v
        if names is not None and node.id not in names:
            raise ExprError(f"undeclared variable {node.id!r} in {source!r}")
        return lambda env, n=node.id: env[n]
    if isinstance(node, ast.UnaryOp):
        arg = _compile(node.operand, source, names)
        if isinstance(node.op, ast.USub):
            return lambda env: -arg(env)
        if isinstance(node.op, ast.UAdd):
            return arg
        if isinstance(node.op, ast.Not):
            return lambda env: not arg(env)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        fn = _BINOPS[type(node.op)]
        left = _compile(node.left, source, names)
        right = _compile(node.right, source, names)
        return lambda env: fn(left(env), right(env))
    if isinstance(node, ast.BoolOp):
        parts = [_compile(v, source, names) for v in node.values]
        if isinstance(node.op, ast.And):
            return lambda env: all(p(env) for p in parts)
        return lambda env: any(p(env) for p in parts)
    if isinstance(node, ast.Compare):
        first = _compile(node.left, source, names)
        ops = [_CMPOPS[type(op)] for op in node.ops if type(op) in _CMPOPS]
        if len(ops) != len(node.ops):
            raise ExprError(f"unsupported comparison in {source!r}")
        rest = [_compile(c, source, names) for c in node.comparators]

        def compare(env):
            a = first(env)
            for op, c in zip(ops, rest):
                b = c(env)
                if not op(a, b):
                    return False
                a = b
            return True
        return compare
    raise ExprError(f"unsupported syntax in {source!r}")
