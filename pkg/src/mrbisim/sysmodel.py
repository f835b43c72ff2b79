"""Concrete transition systems, resolution specifications and sampled transitions."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, EvaluationError, SpecError
from .exprs import Expr, ExpressionMap, parse_expr

SEED_SAMPLE = 0
COUNTEREXAMPLE = 1


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ConfigError("box bounds have mismatched lengths")
        if not np.all(lo < hi):
            raise ConfigError(f"box needs lo < hi on every axis, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs) -> "Box":
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ConfigError("box must be a list of [lo, hi] pairs")
        return cls(arr[:, 0], arr[:, 1])

    def to_pairs(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, x, tol: float = 0.0) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.lo + rng.random((count, self.dim)) * self.widths

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) rows for the 2n faces of the box."""
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo])


class SystemModel:
    """A deterministic discrete-time system x+ = f(x) on a box domain.

    ``on_escape`` selects what happens when an image leaves the domain:
    ``"error"`` rejects such abstractions outright, ``"exit"`` treats leaving
    trajectories as terminated (no successor, consistency vacuous).
    """

    def __init__(self, domain: Box, flow: ExpressionMap,
                 initial_set: Optional[Box] = None, on_escape: str = "error"):
        if flow.n_inputs != domain.dim or flow.n_outputs != domain.dim:
            raise ConfigError(
                f"flow must map R^{domain.dim} -> R^{domain.dim}, "
                f"got {flow.n_inputs} inputs / {flow.n_outputs} outputs")
        if on_escape not in ("error", "exit"):
            raise ConfigError(f"on_escape must be 'error' or 'exit', not {on_escape!r}")
        self.domain = domain
        self.flow = flow
        self.initial_set = initial_set if initial_set is not None else domain
        if not domain.contains_box(self.initial_set):
            raise ConfigError("initial_set must lie inside the domain")
        self.on_escape = on_escape
        probe = domain.sample(np.random.default_rng(0), 256)
        probe = np.vstack([probe, domain.lo, domain.hi, domain.center])
        if not np.all(np.isfinite(flow.evaluate_many(probe))):
            raise ConfigError("flow is not finite on the domain")
        img_lo, img_hi = flow.interval_evaluate(domain.lo, domain.hi)
        self.maps_into_domain = bool(np.all(img_lo >= domain.lo) and np.all(img_hi <= domain.hi))

    @property
    def dim(self) -> int:
        return self.domain.dim

    def evaluate(self, x) -> np.ndarray:
        return evaluate(self.flow, x)

    def __repr__(self):
        return f"SystemModel(dim={self.dim}, flow={self.flow.sources})"


def evaluate(flow: ExpressionMap, x) -> np.ndarray:
    """Exact (floating point) image of a single point."""
    return flow.evaluate(x)


def interval_evaluate(flow: ExpressionMap, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Enclosure of f over the box [lo, hi]."""
    return flow.interval_evaluate(lo, hi)


class ResolutionSpec:
    """State-dependent resolution eps(x_hat).

    Three forms: a constant, ``u * ||x_hat||_2 + v``, or an expression over
    the abstract state.
    """

    def __init__(self, kind: str, const: float = 0.0, u: float = 0.0, v: float = 0.0,
                 expr: Optional[str] = None, dim: Optional[int] = None):
        self.kind = kind
        self.const = float(const)
        self.u = float(u)
        self.v = float(v)
        self.expr_source = expr
        self._expr: Optional[Expr] = None
        if kind == "const":
            if not self.const > 0:
                raise SpecError(f"resolution constant must be positive, got {const}")
        elif kind == "affine_norm":
            if self.u < 0 or self.v < 0:
                raise SpecError("affine resolution needs u, v >= 0")
        elif kind == "expr":
            if expr is None:
                raise SpecError("expression resolution needs 'expr'")
            self._expr = parse_expr(expr, dim)
        else:
            raise SpecError(f"unknown resolution kind {kind!r}")

    @classmethod
    def constant(cls, eps: float) -> "ResolutionSpec":
        return cls("const", const=eps)

    @classmethod
    def affine_norm(cls, u: float, v: float) -> "ResolutionSpec":
        return cls("affine_norm", u=u, v=v)

    @classmethod
    def from_dict(cls, d: dict, dim: Optional[int] = None) -> "ResolutionSpec":
        if not isinstance(d, dict):
            raise ConfigError("resolution must be an object")
        if "const" in d:
            return cls("const", const=d["const"])
        if "expr" in d:
            return cls("expr", expr=d["expr"], dim=dim)
        if "u" in d or "v" in d:
            return cls("affine_norm", u=d.get("u", 0.0), v=d.get("v", 0.0))
        raise ConfigError("resolution needs one of 'const', {'u','v'} or 'expr'")

    def to_dict(self) -> dict:
        if self.kind == "const":
            return {"const": self.const}
        if self.kind == "affine_norm":
            return {"u": self.u, "v": self.v}
        return {"expr": self.expr_source}

    @property
    def is_constant(self) -> bool:
        return self.kind == "const"

    def values(self, anchors) -> np.ndarray:
        P = np.atleast_2d(np.asarray(anchors, dtype=float))
        if self.kind == "const":
            out = np.full(P.shape[0], self.const)
        elif self.kind == "affine_norm":
            out = self.u * np.linalg.norm(P, axis=1) + self.v
        else:
            out = self._expr.eval(P)
        if np.any(~(out > 0)):
            bad = P[np.argmax(~(out > 0))]
            raise SpecError(f"resolution is not positive at {bad}")
        return out

    def check_domain(self, domain: Box) -> None:
        """Raise SpecError if eps can be non-positive on the domain."""
        if self.kind == "const":
            return
        if self.kind == "affine_norm":
            lo_norm = np.linalg.norm(np.clip(0.0, domain.lo, domain.hi))
            if not self.u * lo_norm + self.v > 0:
                raise SpecError("resolution vanishes on the domain")
            return
        lo, _ = self._expr.ieval(domain.lo[None, :], domain.hi[None, :])
        if lo[0] > 0:
            return
        probe = domain.sample(np.random.default_rng(0), 4096)
        self.values(np.vstack([probe, domain.lo, domain.hi, domain.center]))

    def __repr__(self):
        return f"ResolutionSpec({self.to_dict()})"


def resolution_at(spec: ResolutionSpec, anchor) -> float:
    return float(spec.values(anchor)[0])


@dataclass(frozen=True)
class TransitionDataset:
    """Pairs (x_j, f(x_j)) with a provenance flag per row."""

    X: np.ndarray
    FX: np.ndarray
    provenance: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        FX = np.atleast_2d(np.asarray(self.FX, dtype=float))
        if X.shape != FX.shape:
            raise ValueError("X and FX must have the same shape")
        prov = self.provenance
        prov = np.zeros(len(X), dtype=np.int8) if prov is None else np.asarray(prov, dtype=np.int8)
        for name, arr in (("X", X), ("FX", FX), ("provenance", prov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def extend(self, system: SystemModel, points, provenance: int = COUNTEREXAMPLE) -> "TransitionDataset":
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.size == 0:
            return self
        FP = system.flow.evaluate_many(P)
        return TransitionDataset(np.vstack([self.X, P]), np.vstack([self.FX, FP]),
                                 np.concatenate([self.provenance, np.full(len(P), provenance, np.int8)]))

    def to_csv(self) -> str:
        n = self.dim
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(n)] + [f"fx{i}" for i in range(n)])
        for x, fx in zip(self.X, self.FX):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in fx])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TransitionDataset":
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        n = data.shape[1] // 2
        return cls(data[:, :n], data[:, n:])


def sample_dataset(system: SystemModel, N: int, rng_seed: int) -> TransitionDataset:
    """N uniform i.i.d. domain points paired with their exact images."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(rng_seed)
    X = system.domain.sample(rng, N)
    FX = system.flow.evaluate_many(X)
    if not np.all(np.isfinite(FX)):
        raise EvaluationError("non-finite image in sampled dataset")
    return TransitionDataset(X, FX)
