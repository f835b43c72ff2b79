"""Counterexample search for transition consistency.

An edge j -> i is consistent when f maps R_{theta_j}(anchor_j) (restricted
to the domain) into R_{theta_i}(anchor_i). Affine maps are checked exactly by
one LP per target facet; anything else goes through interval
branch-and-bound, which is sound and complete down to a minimum box width.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .abstraction import EXIT, AbstractionGraph, Mesh
from .exprs import ExpressionMap
from .geometry import (MAX_EXACT_DIM, MEMBERSHIP_TOL, HPolytope, ScaledCell, scale,
                       support_argmax)
from .sysmodel import Box, SystemModel

CERT_MARGIN = 10 * MEMBERSHIP_TOL
INTERIOR_RTOL = 1e-12
RANDOM_PROBES = 16
BATCH_LIMIT = 1 << 15


@dataclass(frozen=True)
class Budget:
    max_boxes: int = 100_000
    min_width: Optional[float] = None  # default: 1e-4 * domain diameter

    def width_for(self, domain: Box) -> float:
        return self.min_width if self.min_width is not None else 1e-4 * domain.diameter


@dataclass
class Verified:
    boxes: int = 0
    edges: int = 0
    kind: str = field(default="verified", init=False)


@dataclass
class Counterexample:
    points: np.ndarray
    edge: tuple
    excess: np.ndarray
    boxes: int = 0
    kind: str = field(default="counterexample", init=False)

    @property
    def point(self) -> np.ndarray:
        return self.points[0]


@dataclass
class Unknown:
    edge: Optional[tuple]
    boxes: list
    kind: str = field(default="unknown", init=False)


@dataclass
class VerificationTask:
    source: ScaledCell
    target: ScaledCell
    flow: ExpressionMap
    domain: Box
    budget: Budget = field(default_factory=Budget)
    edge: tuple = (-1, -1)

    def source_polytope(self) -> HPolytope:
        A, b = self.domain.halfspaces()
        return HPolytope(np.vstack([self.source.A, A]), np.concatenate([self.source.b, b]),
                         bounded=True)


def target_excess(task: VerificationTask, points) -> np.ndarray:
    """Worst facet violation of f(x) against the target, per point (<= 0 inside)."""
    P = np.atleast_2d(points)
    FP = task.flow.evaluate_many(P)
    tb = task.target.b
    return ((FP @ task.target.A.T - tb) / (1.0 + np.abs(tb))).max(axis=1)


def certify(task: VerificationTask, points) -> np.ndarray:
    """Mask of points that are exact, margin-respecting counterexamples.

    Points must sit strictly inside the source, so that the verdict does not
    hinge on the summation order of whoever re-checks it.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    poly = task.source_polytope()
    if P.size:
        inside = np.all(P @ poly.A.T - poly.b <= -INTERIOR_RTOL * (1.0 + np.abs(poly.b)), axis=1)
    else:
        inside = np.zeros(0, bool)
    with np.errstate(invalid="ignore"):
        exc = target_excess(task, P)
    return inside & (exc > CERT_MARGIN)


def _counterexample(task: VerificationTask, cand: np.ndarray, boxes: int) -> Optional[Counterexample]:
    if cand.size == 0:
        return None
    # boundary candidates are nudged toward the anchor, which is interior
    cand = np.vstack([cand, task.source.anchor + (1 - 1e-9) * (cand - task.source.anchor)])
    ok = certify(task, cand)
    if not ok.any():
        return None
    pts = cand[ok]
    exc = target_excess(task, pts)
    order = np.argsort(-exc, kind="stable")[:4]
    return Counterexample(pts[order], task.edge, exc[order], boxes)


def verify_edge_affine(task: VerificationTask) -> Verified | Counterexample | Unknown:
    M, c = task.flow.affine_parts()
    poly = task.source_polytope()
    A_t, b_t = task.target.A, task.target.b
    found = []
    for r in range(A_t.shape[0]):
        val, x = support_argmax(poly, M.T @ A_t[r])
        excess = (val + A_t[r] @ c - b_t[r]) / (1.0 + abs(b_t[r]))
        if excess > CERT_MARGIN:
            found.append(x)
    if not found:
        return Verified(edges=1)
    cand = np.array(found)
    cx = _counterexample(task, cand, 0)
    return cx if cx is not None else Unknown(task.edge, [(p, p) for p in cand])


def _linear_upper(A: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Upper bound of A @ x over each box, rounded outward. Shapes: (B,n) -> (B,m)."""
    up = np.maximum(lo[:, None, :] * A[None], hi[:, None, :] * A[None])
    s = up.sum(axis=2)
    return s + 4 * np.finfo(float).eps * np.abs(up).sum(axis=2) + 1e-300


def _contract(A, b, lo, hi):
    """Shrink boxes onto {A x <= b} one row at a time; returns the non-empty mask."""
    b = b + 1e-12 * (1.0 + np.abs(b))
    for r in range(A.shape[0]):
        a = A[r]
        low_terms = np.minimum(a * lo, a * hi)
        total = low_terms.sum(axis=1)
        for cix in np.flatnonzero(a != 0):
            rest = total - low_terms[:, cix]
            bound = (b[r] - rest) / a[cix]
            if a[cix] > 0:
                hi[:, cix] = np.minimum(hi[:, cix], bound + 1e-12 * (1 + np.abs(bound)))
            else:
                lo[:, cix] = np.maximum(lo[:, cix], bound - 1e-12 * (1 + np.abs(bound)))
    return np.all(lo <= hi, axis=1)


def verify_edge_bnb(task: VerificationTask, seed: int = 0) -> Verified | Counterexample | Unknown:
    poly = task.source_polytope()
    A_s, b_s = poly.A, poly.b
    A_t, b_t = task.target.A, task.target.b
    n = A_s.shape[1]
    if n <= MAX_EXACT_DIM:
        V = poly.vertices
        if V.size == 0:
            return Verified(edges=1)
        blo, bhi = V.min(axis=0), V.max(axis=0)
    else:
        blo, bhi = poly.bounding_box()
    lo, hi = blo[None].copy(), bhi[None].copy()
    min_w = task.budget.width_for(task.domain)
    rng = np.random.default_rng(seed)
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    used = 0
    unknown: list[tuple[np.ndarray, np.ndarray]] = []
    while lo.shape[0]:
        keep = _contract(A_s, b_s, lo, hi)
        lo, hi = lo[keep], hi[keep]
        if lo.shape[0] == 0:
            break
        used += lo.shape[0]
        if used > task.budget.max_boxes:
            unknown.extend(zip(lo, hi))
            return Unknown(task.edge, unknown)
        flo, fhi = task.flow.interval_many(lo, hi)
        ub = _linear_upper(A_t, flo, fhi)
        open_ = ~np.all(ub <= b_t[None, :], axis=1)
        lo, hi = lo[open_], hi[open_]
        if lo.shape[0] == 0:
            break
        cx = _counterexample(task, 0.5 * (lo + hi), used)
        if cx is not None:
            return cx
        w = hi - lo
        fine = w.max(axis=1) <= min_w
        if fine.any():
            flo_, fhi_ = lo[fine], hi[fine]
            probes = [flo_[:, None, :] + corners[None] * (fhi_ - flo_)[:, None, :],
                      flo_[:, None, :] + rng.random((flo_.shape[0], RANDOM_PROBES, n))
                      * (fhi_ - flo_)[:, None, :]]
            cx = _counterexample(task, np.concatenate(probes, axis=1).reshape(-1, n), used)
            if cx is not None:
                return cx
            unknown.extend(zip(flo_, fhi_))
            lo, hi, w = lo[~fine], hi[~fine], w[~fine]
        if lo.shape[0] == 0:
            break
        if lo.shape[0] > BATCH_LIMIT:
            unknown.extend(zip(lo, hi))
            return Unknown(task.edge, unknown)
        axis = np.argmax(w, axis=1)
        rows = np.arange(lo.shape[0])
        mid = 0.5 * (lo[rows, axis] + hi[rows, axis])
        lo2, hi2 = lo.copy(), hi.copy()
        hi[rows, axis] = mid
        lo2[rows, axis] = mid
        lo, hi = np.vstack([lo, lo2]), np.vstack([hi, hi2])
    if unknown:
        return Unknown(task.edge, unknown)
    return Verified(boxes=used, edges=1)


def verify_edge(task: VerificationTask) -> Verified | Counterexample | Unknown:
    if task.flow.is_affine:
        return verify_edge_affine(task)
    return verify_edge_bnb(task)


def edge_task(mesh: Mesh, theta, j: int, i: int, system: SystemModel,
              budget: Optional[Budget] = None) -> VerificationTask:
    src = scale(mesh.cells[j], mesh.anchors[j], float(theta[j]))
    tgt = scale(mesh.cells[i], mesh.anchors[i], float(theta[i]))
    return VerificationTask(src, tgt, system.flow, system.domain, budget or Budget(), (j, i))


def verify_relation(graph: AbstractionGraph, mesh: Mesh, assignment, system: SystemModel,
                    budget: Optional[Budget] = None, report: Optional[list] = None):
    """Check every edge; the first counterexample (in topological order) is returned."""
    theta = assignment.theta if hasattr(assignment, "theta") else np.asarray(assignment)
    if np.any(~np.isfinite(theta)) or np.any(theta < 1.0):
        raise ValueError("assignment must be fully solved with theta >= 1")
    pending_unknown = None
    total = 0
    for Y in (graph.sccs[s] for s in graph.topo_order):
        for i in Y:
            for j in graph.pred[i]:
                verdict = verify_edge(edge_task(mesh, theta, j, i, system, budget))
                if report is not None:
                    report.append(edge_record(verdict, (j, i)))
                if isinstance(verdict, Counterexample):
                    return verdict
                if isinstance(verdict, Unknown) and pending_unknown is None:
                    pending_unknown = verdict
                total += getattr(verdict, "boxes", 0)
    if pending_unknown is not None:
        return pending_unknown
    return Verified(boxes=total, edges=len(graph.edges()))


def edge_record(verdict, edge) -> dict:
    rec = {"edge": [int(edge[0]), int(edge[1])], "verdict": verdict.kind}
    if isinstance(verdict, Verified):
        rec["boxes"] = verdict.boxes
    elif isinstance(verdict, Counterexample):
        rec["boxes"] = verdict.boxes
        rec["counterexample"] = verdict.point.tolist()
    else:
        rec["unresolved_boxes"] = len(verdict.boxes)
    return rec
