"""Halfspace polytopes, Voronoi cells and anchored scaling."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import (AnchorNotInteriorError, EmptyPolytopeError, GeometryError,
                     SplitError, UnsupportedDimensionError)
from .lp import linprog
from .sysmodel import Box

MEMBERSHIP_TOL = 1e-9
VERTEX_TOL = 1e-9
MAX_EXACT_DIM = 3


class HPolytope:
    """The set {x : A x <= b}."""

    def __init__(self, A, b, bounded: Optional[bool] = None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise GeometryError("A and b have inconsistent row counts")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b
        self._bounded = bounded

    @classmethod
    def from_box(cls, box: Box) -> "HPolytope":
        A, b = box.halfspaces()
        return cls(A, b, bounded=True)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def contains(self, x, tol: float = MEMBERSHIP_TOL):
        x = np.asarray(x, dtype=float)
        res = x @ self.A.T - self.b
        inside = np.all(res <= tol, axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def intersect(self, A, b) -> "HPolytope":
        return HPolytope(np.vstack([self.A, A]), np.concatenate([self.b, b]),
                         bounded=True if self._bounded else None)

    @property
    def bounded(self) -> bool:
        if self._bounded is None:
            ok = True
            for k in range(self.dim):
                for s in (1.0, -1.0):
                    d = np.zeros(self.dim)
                    d[k] = s
                    r = linprog(-d, self.A, self.b)
                    if r.status == "infeasible":
                        raise EmptyPolytopeError("polytope is empty")
                    if r.status == "unbounded":
                        ok = False
            self._bounded = ok
        return self._bounded

    @cached_property
    def vertices(self) -> np.ndarray:
        return enumerate_vertices(self)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dim <= MAX_EXACT_DIM:
            V = self.vertices
            if V.size == 0:
                raise EmptyPolytopeError("polytope is empty")
            return V.min(axis=0), V.max(axis=0)
        lo, hi = np.empty(self.dim), np.empty(self.dim)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = 1.0
            hi[k] = support_max(self, e)
            lo[k] = -support_max(self, -e)
        return lo, hi

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HPolytope":
        return cls(d["A"], d["b"])

    def __repr__(self):
        return f"HPolytope(rows={self.n_rows}, dim={self.dim})"


@dataclass(frozen=True)
class ScaledCell:
    """Anchored dilation {x : A (x - anchor) <= theta (b - A anchor)}."""

    base: HPolytope
    anchor: np.ndarray
    theta: float

    @cached_property
    def slack(self) -> np.ndarray:
        return self.base.b - self.base.A @ self.anchor

    @property
    def A(self) -> np.ndarray:
        return self.base.A

    @cached_property
    def b(self) -> np.ndarray:
        return self.base.A @ self.anchor + self.theta * self.slack

    def as_polytope(self) -> HPolytope:
        return HPolytope(self.A, self.b, bounded=self.base._bounded)

    def contains(self, x, tol: float = MEMBERSHIP_TOL):
        x = np.asarray(x, dtype=float)
        res = x @ self.A.T - self.b
        inside = np.all(res <= tol, axis=-1)
        return bool(inside) if inside.ndim == 0 else inside

    def gauge(self, x) -> np.ndarray:
        """Smallest theta whose scaled cell contains x (may be below zero)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return ((x - self.anchor) @ self.A.T / self.slack).max(axis=1)


def contains(cell, x, tol: float = MEMBERSHIP_TOL):
    return cell.contains(x, tol)


def scale(cell: HPolytope, anchor, theta: float) -> ScaledCell:
    anchor = np.asarray(anchor, dtype=float).reshape(-1)
    if theta < 0:
        raise GeometryError("scaling factor must be non-negative")
    slack = cell.b - cell.A @ anchor
    if np.any(slack <= 0):
        raise AnchorNotInteriorError(
            f"anchor {anchor} is not strictly interior (min slack {slack.min():.3g})")
    return ScaledCell(cell, anchor, float(theta))


def support_max(cell: HPolytope, direction) -> float:
    """max <direction, x> over the polytope, via the LP core."""
    d = np.asarray(direction, dtype=float)
    r = linprog(-d, cell.A, cell.b)
    if r.status == "infeasible":
        raise EmptyPolytopeError("polytope is empty")
    if r.status == "unbounded":
        raise GeometryError("polytope is unbounded in the requested direction")
    return -r.fun


def support_argmax(cell: HPolytope, direction) -> tuple[float, np.ndarray]:
    d = np.asarray(direction, dtype=float)
    r = linprog(-d, cell.A, cell.b)
    if r.status == "infeasible":
        raise EmptyPolytopeError("polytope is empty")
    if r.status == "unbounded":
        raise GeometryError("polytope is unbounded in the requested direction")
    return -r.fun, r.x


def enumerate_vertices(cell: HPolytope, tol: float = VERTEX_TOL) -> np.ndarray:
    """All vertices of a bounded polytope in dimension <= 3."""
    n = cell.dim
    if n > MAX_EXACT_DIM:
        raise UnsupportedDimensionError(f"vertex enumeration needs dim <= {MAX_EXACT_DIM}")
    A, b = cell.A, cell.b
    m = A.shape[0]
    if m < n:
        return np.zeros((0, n))
    combos = np.array(list(itertools.combinations(range(m), n)), dtype=int)
    Ms = A[combos]  # (C, n, n)
    rhs = b[combos]
    det = np.linalg.det(Ms)
    scale_ = np.prod(np.linalg.norm(Ms, axis=2), axis=1)
    ok = np.abs(det) > 1e-12 * np.maximum(scale_, 1e-300)
    if not ok.any():
        return np.zeros((0, n))
    pts = np.linalg.solve(Ms[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(pts @ A.T - b <= tol * (1.0 + np.abs(b)), axis=1)
    pts = pts[feas]
    if pts.size == 0:
        return np.zeros((0, n))
    keep: list[np.ndarray] = []
    for p in pts:
        if all(np.max(np.abs(q - p)) > 1e-9 * (1.0 + np.abs(p).max()) for q in keep):
            keep.append(p)
    return np.array(keep)


def prune_rows(cell: HPolytope, tol: float = 1e-9) -> HPolytope:
    """Drop rows that do not support a facet (dimension <= 3 only)."""
    n = cell.dim
    V = cell.vertices
    if V.shape[0] <= n:
        return cell
    on = np.abs(V @ cell.A.T - cell.b) <= tol * (1.0 + np.abs(cell.b))
    keep = []
    seen = []
    for r in range(cell.n_rows):
        if on[:, r].sum() < n:
            continue
        key = on[:, r]
        if any(np.array_equal(key, s) for s in seen):
            continue
        seen.append(key)
        keep.append(r)
    out = HPolytope(cell.A[keep], cell.b[keep], bounded=True)
    out.__dict__["vertices"] = V
    return out


def max_anchor_distance(cell: HPolytope, anchor) -> float:
    """Largest distance from the anchor to a point of the cell.

    Exact (vertex enumeration) up to dimension 3; above that, the distance to
    the far corner of the bounding box, which over-approximates by at most a
    factor sqrt(n).
    """
    anchor = np.asarray(anchor, dtype=float)
    if not cell.bounded:
        raise GeometryError("cell is unbounded")
    if cell.dim <= MAX_EXACT_DIM:
        V = cell.vertices
        if V.size == 0:
            raise EmptyPolytopeError("cell is empty")
        return float(np.sqrt(((V - anchor) ** 2).sum(axis=1)).max())
    lo, hi = cell.bounding_box()
    far = np.maximum(np.abs(hi - anchor), np.abs(anchor - lo))
    return float(np.linalg.norm(far))


def chebyshev_center(cell: HPolytope) -> tuple[np.ndarray, float]:
    """Point of maximum facet slack, and the inscribed-ball radius."""
    n = cell.dim
    norms = np.linalg.norm(cell.A, axis=1)
    A = np.hstack([cell.A, norms[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    lb = np.full(n + 1, -np.inf)
    lb[-1] = 0.0
    r = linprog(c, A, cell.b, lb=lb)
    if r.status == "infeasible":
        raise EmptyPolytopeError("cell is empty")
    if r.status == "unbounded":
        raise GeometryError("cell is unbounded")
    return r.x[:n], float(r.x[-1])


def _bisector_rows(anchors: np.ndarray, i: int, js: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = anchors[js] - anchors[i]
    nrm = np.linalg.norm(diff, axis=1, keepdims=True)
    a = diff / nrm
    mid = 0.5 * (anchors[js] + anchors[i])
    return a, (a * mid).sum(axis=1)


def voronoi_cells(anchors, domain: Box, keep_all: bool = False,
                  prune: bool = True) -> list[HPolytope]:
    """Euclidean Voronoi cells of the anchors, clipped to the domain box.

    By default only bisectors that can touch a cell are generated: a bisector
    with an anchor at distance d lies d/2 away, so it is irrelevant once d/2
    exceeds the radius of the current candidate cell. ``keep_all`` keeps every
    one of the k-1 bisector rows instead. ``prune`` drops non-facet rows
    (dimension <= 3).
    """
    P = np.atleast_2d(np.asarray(anchors, dtype=float))
    k, n = P.shape
    if n != domain.dim:
        raise GeometryError("anchor dimension does not match the domain")
    box_A, box_b = domain.halfspaces()
    if k == 1:
        return [HPolytope(box_A, box_b, bounded=True)]
    tree = cKDTree(P)
    dmin, _ = tree.query(P, k=2)
    if np.any(dmin[:, 1] <= 1e-12 * max(1.0, domain.diameter)):
        raise GeometryError("duplicate anchors")
    cells = []
    for i in range(k):
        if keep_all:
            js = np.array([j for j in range(k) if j != i])
            a, b = _bisector_rows(P, i, js)
            cell = HPolytope(np.vstack([a, box_A]), np.concatenate([b, box_b]), bounded=True)
        else:
            m = min(k, 2 * 3 ** n + 1)
            while True:
                dist, idx = tree.query(P[i], k=m)
                dist, idx = np.atleast_1d(dist)[1:], np.atleast_1d(idx)[1:]
                a, b = _bisector_rows(P, i, idx)
                cell = HPolytope(np.vstack([a, box_A]), np.concatenate([b, box_b]), bounded=True)
                if m >= k:
                    break
                R = max_anchor_distance(cell, P[i])
                if dist[-1] / 2.0 > R * (1 + 1e-9):
                    break
                m = min(k, 2 * m)
        if prune and n <= MAX_EXACT_DIM:
            cell = prune_rows(cell)
        cells.append(cell)
    return cells


def split_cell(cell: HPolytope, anchor) -> list[tuple[np.ndarray, HPolytope]]:
    """Cut the cell through the anchor, perpendicular to its longest extent.

    Each half gets a new anchor at its Chebyshev center.
    """
    anchor = np.asarray(anchor, dtype=float)
    lo, hi = cell.bounding_box()
    k = int(np.argmax(hi - lo))
    width = hi[k] - lo[k]
    if width <= 0 or not (lo[k] + 1e-12 * width < anchor[k] < hi[k] - 1e-12 * width):
        raise SplitError(f"cannot split cell along axis {k}: anchor on the boundary")
    e = np.zeros(cell.dim)
    e[k] = 1.0
    out = []
    for sign in (1.0, -1.0):
        child = cell.intersect((sign * e)[None, :], np.array([sign * anchor[k]]))
        if cell.dim <= MAX_EXACT_DIM:
            child = prune_rows(child)
        center, radius = chebyshev_center(child)
        if radius <= 1e-12 * max(1.0, width):
            raise SplitError("degenerate split: empty child cell")
        out.append((center, child))
    return out


def polytope_record(cell: HPolytope, anchor) -> dict:
    d = cell.to_dict()
    d["anchor"] = [float(v) for v in anchor]
    return d
