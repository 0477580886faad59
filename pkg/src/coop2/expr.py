"""Restricted arithmetic expressions with forward-mode differentiation.

User-supplied vector fields are given as strings over the state variables
``x1, x2, x3`` and named parameters, using +, -, *, /, ** and parentheses
(rational functions and powers; enough for mass-action / Hill-type
kinetics).  Expressions are parsed once with :mod:`ast`, validated against
a whitelist, and evaluated either on plain arrays or on dual numbers that
carry gradients with respect to the state, which yields exact Jacobians
without symbolic manipulation.
"""

import ast

import numpy as np

__all__ = ["ExpressionError", "VectorField"]

_STATE_NAMES = ("x1", "x2", "x3")


class ExpressionError(ValueError):
    """Malformed or unsupported vector-field expression."""


class _Dual:
    """Value together with its gradient w.r.t. the three state variables."""

    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad

    def __add__(self, other):
        other = _lift(other, self)
        return _Dual(self.val + other.val, self.grad + other.grad)

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other, self)
        return _Dual(self.val - other.val, self.grad - other.grad)

    def __rsub__(self, other):
        other = _lift(other, self)
        return _Dual(other.val - self.val, other.grad - self.grad)

    def __mul__(self, other):
        other = _lift(other, self)
        return _Dual(
            self.val * other.val,
            self.grad * other.val[..., None] + other.grad * self.val[..., None],
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other, self)
        inv = 1.0 / other.val
        val = self.val * inv
        grad = (self.grad - other.grad * val[..., None]) * inv[..., None]
        return _Dual(val, grad)

    def __rtruediv__(self, other):
        return _lift(other, self).__truediv__(self)

    def __pow__(self, exponent):
        # exponent restricted to numeric constants
        val = self.val**exponent
        if exponent == 0:
            grad = np.zeros_like(self.grad)
        else:
            grad = (exponent * self.val ** (exponent - 1))[..., None] * self.grad
        return _Dual(val, grad)

    def __neg__(self):
        return _Dual(-self.val, -self.grad)

    def __pos__(self):
        return self


def _lift(value, template):
    if isinstance(value, _Dual):
        return value
    val = np.broadcast_to(np.asarray(value, float), template.val.shape)
    return _Dual(val, np.zeros(template.grad.shape))


_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


def _validate(node, names):
    if isinstance(node, ast.Expression):
        _validate(node.body, names)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        if isinstance(node.op, ast.Pow):
            if not _is_constant(node.right):
                raise ExpressionError("exponents must be numeric constants")
        _validate(node.left, names)
        _validate(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _validate(node.operand, names)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"constant {node.value!r} not allowed")
    elif isinstance(node, ast.Name):
        if node.id not in names:
            raise ExpressionError(f"unknown name {node.id!r}")
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} not allowed")


def _is_constant(node):
    if isinstance(node, ast.Constant):
        return isinstance(node.value, (int, float))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        return _is_constant(node.operand)
    return False


def _const_value(node):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.UnaryOp):
        v = _const_value(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    raise ExpressionError("expected a constant")


def _evaluate(node, env):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, env)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            return _evaluate(node.left, env) ** _const_value(node.right)
        left = _evaluate(node.left, env)
        right = _evaluate(node.right, env)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        return left / right
    if isinstance(node, ast.UnaryOp):
        v = _evaluate(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        return float(node.value)
    return env[node.id]


class VectorField:
    """Three expressions defining dot(x) = f(x) plus named parameters."""

    def __init__(self, exprs, params):
        if len(exprs) != 3:
            raise ExpressionError("a vector field needs exactly three component expressions")
        bad = set(params) & set(_STATE_NAMES)
        if bad:
            raise ExpressionError(f"parameter names clash with state variables: {sorted(bad)}")
        self.params = {k: float(v) for k, v in params.items()}
        names = set(_STATE_NAMES) | set(self.params)
        self._trees = []
        for src in exprs:
            try:
                tree = ast.parse(src, mode="eval")
            except SyntaxError as exc:
                raise ExpressionError(f"cannot parse {src!r}: {exc}") from None
            _validate(tree, names)
            self._trees.append(tree)
        self.sources = tuple(exprs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        env = dict(self.params)
        for i, name in enumerate(_STATE_NAMES):
            env[name] = x[..., i]
        out = [np.broadcast_to(_evaluate(t, env), x.shape[:-1]) for t in self._trees]
        return np.stack(out, axis=-1)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        base = x.shape[:-1]
        env = {k: _Dual(np.broadcast_to(v, base), np.zeros(base + (3,))) for k, v in self.params.items()}
        eye = np.eye(3)
        for i, name in enumerate(_STATE_NAMES):
            env[name] = _Dual(x[..., i], np.broadcast_to(eye[i], base + (3,)).copy())
        rows = []
        for tree in self._trees:
            val = _evaluate(tree, env)
            if isinstance(val, _Dual):
                rows.append(np.broadcast_to(val.grad, base + (3,)))
            else:
                rows.append(np.zeros(base + (3,)))
        return np.stack(rows, axis=-2)
