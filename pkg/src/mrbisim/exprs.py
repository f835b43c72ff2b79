"""Expression trees for transition maps.

Expressions are parsed from an infix mini-grammar (a safe subset of Python
syntax) and support vectorised point evaluation and outward-rounded interval
evaluation over batches of boxes.

Grammar::

    expr  := number | var | expr (+|-|*) expr | expr / number | -expr
           | expr ** int | expr ^ int | abs(expr) | sqrt(expr) | norm()
           | piecewise(guard, expr, expr)
    guard := expr (<|<=|>|>=) expr          # affine, or abs() of affine
    var   := x0 | x1 | ... | x | y | z      # x, y, z alias x0, x1, x2

``norm()`` is the Euclidean norm of the whole input vector; it is meant for
resolution expressions.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EvaluationError, ExpressionError

_ALIASES = {"x": 0, "y": 1, "z": 2}


def _down(a):
    return np.nextafter(a, -np.inf)


def _up(a):
    return np.nextafter(a, np.inf)


class Expr:
    """Base node. ``eval`` takes an (m, n) array; ``ieval`` takes (m, n) lo/hi."""

    def eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ieval(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def affine(self, n: int) -> Optional[tuple[np.ndarray, float]]:
        """Return (coefficients, offset) if the node is affine in the inputs."""
        return None

    def max_var(self) -> int:
        return -1


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def eval(self, X):
        return np.full(X.shape[0], self.value)

    def ieval(self, lo, hi):
        v = np.full(lo.shape[0], self.value)
        return v, v.copy()

    def affine(self, n):
        return np.zeros(n), self.value

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    index: int

    def eval(self, X):
        return X[:, self.index]

    def ieval(self, lo, hi):
        return lo[:, self.index].copy(), hi[:, self.index].copy()

    def affine(self, n):
        c = np.zeros(n)
        c[self.index] = 1.0
        return c, 0.0

    def max_var(self):
        return self.index

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def eval(self, X):
        return -self.arg.eval(X)

    def ieval(self, lo, hi):
        a, b = self.arg.ieval(lo, hi)
        return -b, -a

    def affine(self, n):
        r = self.arg.affine(n)
        return None if r is None else (-r[0], -r[1])

    def max_var(self):
        return self.arg.max_var()

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - *
    left: Expr
    right: Expr

    def eval(self, X):
        a, b = self.left.eval(X), self.right.eval(X)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        return a * b

    def ieval(self, lo, hi):
        al, ah = self.left.ieval(lo, hi)
        bl, bh = self.right.ieval(lo, hi)
        if self.op == "+":
            return _down(al + bl), _up(ah + bh)
        if self.op == "-":
            return _down(al - bh), _up(ah - bl)
        p = np.stack([al * bl, al * bh, ah * bl, ah * bh])
        return _down(p.min(axis=0)), _up(p.max(axis=0))

    def affine(self, n):
        a, b = self.left.affine(n), self.right.affine(n)
        if a is None or b is None:
            return None
        if self.op == "+":
            return a[0] + b[0], a[1] + b[1]
        if self.op == "-":
            return a[0] - b[0], a[1] - b[1]
        if not a[0].any():
            return a[1] * b[0], a[1] * b[1]
        if not b[0].any():
            return b[1] * a[0], b[1] * a[1]
        return None

    def max_var(self):
        return max(self.left.max_var(), self.right.max_var())

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def eval(self, X):
        return self.base.eval(X) ** self.exponent

    def ieval(self, lo, hi):
        a, b = self.base.ieval(lo, hi)
        p = self.exponent
        if p == 0:
            one = np.ones_like(a)
            return one, one.copy()
        pa, pb = a ** p, b ** p
        if p % 2 == 1:
            return _down(pa), _up(pb)
        low = np.where(a >= 0, pa, np.where(b <= 0, pb, 0.0))
        high = np.maximum(pa, pb)
        return _down(low), _up(high)

    def affine(self, n):
        if self.exponent == 0:
            return np.zeros(n), 1.0
        if self.exponent == 1:
            return self.base.affine(n)
        r = self.base.affine(n)
        if r is not None and not r[0].any():
            return np.zeros(n), r[1] ** self.exponent
        return None

    def max_var(self):
        return self.base.max_var()

    def __str__(self):
        return f"({self.base} ** {self.exponent})"


@dataclass(frozen=True)
class Abs(Expr):
    arg: Expr

    def eval(self, X):
        return np.abs(self.arg.eval(X))

    def ieval(self, lo, hi):
        a, b = self.arg.ieval(lo, hi)
        low = np.where(a >= 0, a, np.where(b <= 0, -b, 0.0))
        return low, np.maximum(np.abs(a), np.abs(b))

    def max_var(self):
        return self.arg.max_var()

    def __str__(self):
        return f"abs({self.arg})"


@dataclass(frozen=True)
class Sqrt(Expr):
    arg: Expr

    def eval(self, X):
        with np.errstate(invalid="ignore"):
            return np.sqrt(self.arg.eval(X))

    def ieval(self, lo, hi):
        a, b = self.arg.ieval(lo, hi)
        return _down(np.sqrt(np.maximum(a, 0.0))), _up(np.sqrt(np.maximum(b, 0.0)))

    def max_var(self):
        return self.arg.max_var()

    def __str__(self):
        return f"sqrt({self.arg})"


@dataclass(frozen=True)
class Norm(Expr):
    """Euclidean norm of the full input vector."""

    def eval(self, X):
        return np.sqrt((X ** 2).sum(axis=1))

    def ieval(self, lo, hi):
        sq_lo = np.where(lo >= 0, lo ** 2, np.where(hi <= 0, hi ** 2, 0.0)).sum(axis=1)
        sq_hi = np.maximum(lo ** 2, hi ** 2).sum(axis=1)
        return _down(np.sqrt(_down(sq_lo))), _up(np.sqrt(_up(sq_hi)))

    def __str__(self):
        return "norm()"


@dataclass(frozen=True)
class Guard:
    """``lhs op rhs``; evaluated as the sign of ``lhs - rhs``."""

    op: str
    lhs: Expr
    rhs: Expr

    def eval(self, X) -> np.ndarray:
        d = self.lhs.eval(X) - self.rhs.eval(X)
        return {"<": d < 0, "<=": d <= 0, ">": d > 0, ">=": d >= 0}[self.op]

    def ieval(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Return (certainly_true, certainly_false) masks over the boxes."""
        al, ah = self.lhs.ieval(lo, hi)
        bl, bh = self.rhs.ieval(lo, hi)
        dl, dh = _down(al - bh), _up(ah - bl)
        if self.op == "<":
            return dh < 0, dl >= 0
        if self.op == "<=":
            return dh <= 0, dl > 0
        if self.op == ">":
            return dl > 0, dh <= 0
        return dl >= 0, dh < 0

    def __str__(self):
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class Piecewise(Expr):
    guard: Guard
    then: Expr
    other: Expr

    def eval(self, X):
        return np.where(self.guard.eval(X), self.then.eval(X), self.other.eval(X))

    def ieval(self, lo, hi):
        yes, no = self.guard.ieval(lo, hi)
        tl, th = self.then.ieval(lo, hi)
        ol, oh = self.other.ieval(lo, hi)
        low = np.where(yes, tl, np.where(no, ol, np.minimum(tl, ol)))
        high = np.where(yes, th, np.where(no, oh, np.maximum(th, oh)))
        return low, high

    def max_var(self):
        return max(self.guard.lhs.max_var(), self.guard.rhs.max_var(),
                   self.then.max_var(), self.other.max_var())

    def __str__(self):
        return f"piecewise({self.guard}, {self.then}, {self.other})"


_CMP = {ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">="}


class _Builder:
    def __init__(self, n: Optional[int], source: str):
        self.n = n
        self.source = source

    def fail(self, msg: str):
        raise ExpressionError(f"{msg} in expression {self.source!r}")

    def var(self, name: str) -> Var:
        if name in _ALIASES:
            idx = _ALIASES[name]
        elif name.startswith("x") and name[1:].isdigit():
            idx = int(name[1:])
        else:
            self.fail(f"unknown variable {name!r}")
        if self.n is not None and idx >= self.n:
            self.fail(f"variable {name!r} out of range for dimension {self.n}")
        return Var(idx)

    def guard(self, node) -> Guard:
        if not isinstance(node, ast.Compare) or len(node.ops) != 1:
            self.fail("piecewise guard must be a single comparison")
        op = _CMP.get(type(node.ops[0]))
        if op is None:
            self.fail("unsupported comparison operator")
        g = Guard(op, self.build(node.left), self.build(node.comparators[0]))
        for side in (g.lhs, g.rhs):
            inner = side.arg if isinstance(side, Abs) else side
            if inner.affine(max(inner.max_var() + 1, 1)) is None:
                self.fail("guards must compare affine terms or abs() of affine terms")
        return g

    def build(self, node) -> Expr:
        if isinstance(node, ast.Expression):
            return self.build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return Const(float(node.value))
        if isinstance(node, ast.Name):
            return self.var(node.id)
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                inner = self.build(node.operand)
                return Const(-inner.value) if isinstance(inner, Const) else Neg(inner)
            if isinstance(node.op, ast.UAdd):
                return self.build(node.operand)
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                exp = self.build(node.right)
                if not isinstance(exp, Const) or exp.value != int(exp.value) or exp.value < 0:
                    self.fail("exponents must be non-negative integer literals")
                return Pow(self.build(node.left), int(exp.value))
            if isinstance(node.op, ast.Div):
                den = self.build(node.right)
                if not isinstance(den, Const) or den.value == 0:
                    self.fail("division is only allowed by a nonzero constant")
                return BinOp("*", self.build(node.left), Const(1.0 / den.value))
            ops = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*"}
            op = ops.get(type(node.op))
            if op is None:
                self.fail("unsupported operator")
            return BinOp(op, self.build(node.left), self.build(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            name, args = node.func.id, node.args
            if name == "piecewise" and len(args) == 3:
                return Piecewise(self.guard(args[0]), self.build(args[1]), self.build(args[2]))
            if name == "abs" and len(args) == 1:
                return Abs(self.build(args[0]))
            if name == "sqrt" and len(args) == 1:
                return Sqrt(self.build(args[0]))
            if name == "norm" and not args:
                return Norm()
            self.fail(f"unknown function call {name}()")
        self.fail(f"unsupported syntax {type(node).__name__}")


def parse_expr(source: str, n: Optional[int] = None) -> Expr:
    """Parse one scalar expression over inputs ``x0..x{n-1}``."""
    text = str(source).replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
    return _Builder(n, source).build(tree)


class ExpressionMap:
    """A map R^n -> R^m given by one expression per output coordinate."""

    def __init__(self, sources: Sequence[str], n_inputs: int):
        self.sources = [str(s) for s in sources]
        self.n_inputs = n_inputs
        self.exprs = [parse_expr(s, n_inputs) for s in self.sources]
        self._affine = self._extract_affine()

    @property
    def n_outputs(self) -> int:
        return len(self.exprs)

    def _extract_affine(self):
        rows, offs = [], []
        for e in self.exprs:
            r = e.affine(self.n_inputs)
            if r is None:
                return None
            rows.append(r[0])
            offs.append(r[1])
        return np.array(rows, dtype=float), np.array(offs, dtype=float)

    @property
    def is_affine(self) -> bool:
        return self._affine is not None

    def affine_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (M, c) with f(x) = M x + c; raises if the map is not affine."""
        if self._affine is None:
            raise ValueError("map is not affine")
        return self._affine

    def evaluate_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.column_stack([e.eval(X) for e in self.exprs])
        return out

    def evaluate(self, x) -> np.ndarray:
        y = self.evaluate_many(np.asarray(x, dtype=float).reshape(1, -1))[0]
        if not np.all(np.isfinite(y)):
            raise EvaluationError(f"non-finite image {y} at {x}")
        return y

    def interval_many(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        with np.errstate(over="ignore", invalid="ignore"):
            parts = [e.ieval(lo, hi) for e in self.exprs]
        return (np.column_stack([p[0] for p in parts]),
                np.column_stack([p[1] for p in parts]))

    def interval_evaluate(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.interval_many(np.reshape(lo, (1, -1)), np.reshape(hi, (1, -1)))
        return a[0], b[0]

    def __repr__(self):
        return f"ExpressionMap({self.sources!r})"
