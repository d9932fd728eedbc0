"""Nonlinear predictor abstraction.

A predictor evaluates eta = f(x; beta) together with its per-observation
gradient rows (the local model matrix) and Hessians. The built-in kinds
cover the linear case and the power-plus-linear form used by the gamma
simulation study; arbitrary expressions over covariate and parameter names
are supported through forward-mode second-order dual numbers, so gradients
and Hessians are exact rather than finite-differenced.

Expression grammar: operators ``+ - * / ^`` (also ``**``), unary minus,
functions ``log`` and ``exp``, numeric literals, covariate names and
parameter names.
"""
import ast
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix (n x q) plus response vector, with column names."""

    x: np.ndarray
    y: np.ndarray
    columns: tuple = ()

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def q(self):
        return self.x.shape[1]


class _Dual2:
    """Value, gradient and Hessian tracked together, vectorized over rows.

    value: (n,), grad: (n, p), hess: (n, p, p).
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, value, n, p):
        v = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
        return cls(v, np.zeros((n, p)), np.zeros((n, p, p)))

    @classmethod
    def parameter(cls, value, j, n, p):
        g = np.zeros((n, p))
        g[:, j] = 1.0
        return cls(np.full(n, float(value)), g, np.zeros((n, p, p)))

    def _chain(self, f, f1, f2):
        # f(u): f' and f'' are per-observation vectors.
        outer = self.grad[:, :, None] * self.grad[:, None, :]
        return _Dual2(
            f,
            f1[:, None] * self.grad,
            f1[:, None, None] * self.hess + f2[:, None, None] * outer,
        )

    def __add__(self, other):
        return _Dual2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other):
        return _Dual2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __neg__(self):
        return _Dual2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other):
        cross = self.grad[:, :, None] * other.grad[:, None, :]
        return _Dual2(
            self.value * other.value,
            self.grad * other.value[:, None] + other.grad * self.value[:, None],
            self.hess * other.value[:, None, None]
            + other.hess * self.value[:, None, None]
            + cross
            + cross.transpose(0, 2, 1),
        )

    def __truediv__(self, other):
        if np.any(other.value == 0.0):
            raise DomainError("division by zero in predictor expression")
        return self * other._reciprocal()

    def _reciprocal(self):
        v = self.value
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def pow_const(self, c):
        v = self.value
        if c == int(c):
            f = v ** int(c)
            f1 = c * v ** (int(c) - 1)
            f2 = c * (c - 1.0) * v ** (int(c) - 2)
        else:
            if np.any(v <= 0.0):
                raise DomainError("non-integer power of a non-positive base")
            f = v**c
            f1 = c * v ** (c - 1.0)
            f2 = c * (c - 1.0) * v ** (c - 2.0)
        return self._chain(f, np.broadcast_to(f1, v.shape), np.broadcast_to(f2, v.shape))

    def pow(self, other):
        if not other.grad.any() and not other.hess.any():
            c = other.value
            if np.all(c == c.flat[0]):
                return self.pow_const(float(c.flat[0]))
        # General a^b = exp(b log a); requires a > 0.
        return (other * self.log()).exp()

    def log(self):
        if np.any(self.value <= 0.0):
            raise DomainError("log of a non-positive value in predictor expression")
        v = self.value
        return self._chain(np.log(v), 1.0 / v, -1.0 / v**2)

    def exp(self):
        f = np.exp(self.value)
        return self._chain(f, f, f)


_ALLOWED_BINOPS = {ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow}
_FUNCS = {"log": _Dual2.log, "exp": _Dual2.exp}


def _parse_expression(text):
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse predictor expression: {exc}") from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Constant, ast.Name, ast.Load)):
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ParseError(f"non-numeric literal {node.value!r} in expression")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _ALLOWED_BINOPS:
                raise ParseError(f"operator {type(node.op).__name__} not allowed")
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ParseError(f"operator {type(node.op).__name__} not allowed")
        elif isinstance(node, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)):
            pass
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ParseError("only log() and exp() calls are allowed")
            if len(node.args) != 1 or node.keywords:
                raise ParseError("functions take exactly one positional argument")
        else:
            raise ParseError(f"syntax {type(node).__name__} not allowed in expression")
    return tree.body


def _eval_node(node, env, n, p):
    if isinstance(node, ast.Constant):
        return _Dual2.constant(node.value, n, p)
    if isinstance(node, ast.Name):
        try:
            return env[node.id]
        except KeyError:
            raise DomainError(f"unknown name {node.id!r} in predictor expression") from None
    if isinstance(node, ast.UnaryOp):
        val = _eval_node(node.operand, env, n, p)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](_eval_node(node.args[0], env, n, p))
    a = _eval_node(node.left, env, n, p)
    b = _eval_node(node.right, env, n, p)
    if isinstance(node.op, ast.Add):
        return a + b
    if isinstance(node.op, ast.Sub):
        return a - b
    if isinstance(node.op, ast.Mult):
        return a * b
    if isinstance(node.op, ast.Div):
        return a / b
    return a.pow(b)


class Predictor:
    """Base class; subclasses provide eta, its gradient rows and Hessians."""

    kind: str
    p: int

    def validate(self, x):
        """Covariate-level checks at load time; raises DomainError."""

    def check_beta(self, beta):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise DomainError(f"{self.kind} predictor expects {self.p} parameters, got {beta.shape}")
        return beta

    def eval_eta(self, x, beta):
        raise NotImplementedError

    def model_matrix(self, x, beta):
        raise NotImplementedError

    def hessians(self, x, beta):
        raise NotImplementedError


@dataclass
class LinearPredictor(Predictor):
    """eta_i = x_i^T beta; the GLM case."""

    p: int
    kind: str = "linear"

    def eval_eta(self, x, beta):
        return np.asarray(x, dtype=float) @ self.check_beta(beta)

    def model_matrix(self, x, beta):
        self.check_beta(beta)
        return np.array(x, dtype=float, copy=True)

    def hessians(self, x, beta):
        self.check_beta(beta)
        n = np.asarray(x).shape[0]
        return np.zeros((n, self.p, self.p))


@dataclass
class PowerPlusLinearPredictor(Predictor):
    """eta_i = beta0 + x1_i^beta1 + beta2 * x2_i, covariates (x1, x2)."""

    p: int = 3
    kind: str = "power_plus_linear"

    def validate(self, x):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != 2:
            raise DomainError("power_plus_linear expects exactly two covariate columns")
        if np.any(x[:, 0] <= 0):
            raise DomainError("power_plus_linear requires x1 > 0")

    def eval_eta(self, x, beta):
        beta = self.check_beta(beta)
        x = np.asarray(x, dtype=float)
        if np.any(x[:, 0] <= 0):
            raise DomainError("power_plus_linear requires x1 > 0")
        return beta[0] + x[:, 0] ** beta[1] + beta[2] * x[:, 1]

    def model_matrix(self, x, beta):
        beta = self.check_beta(beta)
        x = np.asarray(x, dtype=float)
        pw = x[:, 0] ** beta[1]
        return np.column_stack([np.ones(x.shape[0]), np.log(x[:, 0]) * pw, x[:, 1]])

    def hessians(self, x, beta):
        beta = self.check_beta(beta)
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        out = np.zeros((n, 3, 3))
        out[:, 1, 1] = np.log(x[:, 0]) ** 2 * x[:, 0] ** beta[1]
        return out


@dataclass
class ExpressionPredictor(Predictor):
    """Predictor given as an arithmetic expression over named covariates/parameters."""

    expression: str
    params: tuple
    covariates: tuple
    kind: str = "expression"
    _tree: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.params = tuple(self.params)
        self.covariates = tuple(self.covariates)
        overlap = set(self.params) & set(self.covariates)
        if overlap:
            raise ParseError(f"names used as both parameter and covariate: {sorted(overlap)}")
        self._tree = _parse_expression(self.expression)
        known = set(self.params) | set(self.covariates)
        unknown = {
            node.id
            for node in ast.walk(self._tree)
            if isinstance(node, ast.Name) and node.id not in known and node.id not in _FUNCS
        }
        if unknown:
            raise ParseError(f"unknown names in expression: {sorted(unknown)}")
        self.p = len(self.params)

    def _evaluate(self, x, beta):
        beta = self.check_beta(beta)
        x = np.asarray(x, dtype=float)
        n, p = x.shape[0], self.p
        env = {}
        for j, name in enumerate(self.covariates):
            env[name] = _Dual2(x[:, j].copy(), np.zeros((n, p)), np.zeros((n, p, p)))
        for j, name in enumerate(self.params):
            env[name] = _Dual2.parameter(beta[j], j, n, p)
        return _eval_node(self._tree, env, n, p)

    def eval_eta(self, x, beta):
        return self._evaluate(x, beta).value

    def model_matrix(self, x, beta):
        return self._evaluate(x, beta).grad

    def hessians(self, x, beta):
        return self._evaluate(x, beta).hess


def make_predictor(kind, *, q=None, expression=None, params=None, covariates=None):
    """Construct a predictor from a config descriptor."""
    if kind == "linear":
        if not q:
            raise DomainError("linear predictor needs the covariate dimension")
        return LinearPredictor(p=q)
    if kind == "power_plus_linear":
        return PowerPlusLinearPredictor()
    if kind == "expression":
        if not expression or not params or not covariates:
            raise DomainError("expression predictor needs expression, params and covariates")
        return ExpressionPredictor(expression=expression, params=params, covariates=covariates)
    raise DomainError(f"unknown predictor kind {kind!r}")
