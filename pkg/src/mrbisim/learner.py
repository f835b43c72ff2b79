"""Per-state scaling factors from sampled transitions.

Every sample x lying in a predecessor's scaled cell R_{theta_j}(anchor_j)
forces theta_i >= gauge_i(f(x)), the smallest dilation of cell i that holds
f(x). Acyclic states therefore have a closed-form solution (a running max);
states on a cycle are solved jointly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .abstraction import EXIT, AbstractionGraph, Mesh
from .errors import SchedulingError, SolverError
from .exprs import ExpressionMap
from .lp import linprog
from .sysmodel import ResolutionSpec, TransitionDataset

PENDING, SOLVED, INFEASIBLE = "pending", "solved", "infeasible"
CAP_RTOL = 1e-12
ANTECEDENT_RTOL = 1e-9


@dataclass(frozen=True)
class Infeasible:
    states: tuple
    bounds: tuple
    caps: tuple

    def __bool__(self) -> bool:
        return False


def slacks(mesh: Mesh, i: int) -> np.ndarray:
    c = mesh.cells[i]
    return c.b - c.A @ mesh.anchors[i]


def gauge(mesh: Mesh, i: int, points) -> np.ndarray:
    """Smallest theta with each point inside R_theta(anchor_i)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        return np.zeros(0)
    c = mesh.cells[i]
    return ((P - mesh.anchors[i]) @ c.A.T / slacks(mesh, i)).max(axis=1)


class SampleIndex:
    """Ball queries over a growing sample set (KD-tree plus a brute-force tail)."""

    REBUILD_AT = 256

    def __init__(self, data: TransitionDataset):
        self.data = data
        self._tree = cKDTree(data.X)
        self._indexed = len(data)

    def update(self, data: TransitionDataset) -> None:
        self.data = data
        if len(data) - self._indexed > self.REBUILD_AT:
            self._tree = cKDTree(data.X)
            self._indexed = len(data)

    def ball(self, center, radius: float) -> np.ndarray:
        idx = np.asarray(self._tree.query_ball_point(center, radius), dtype=int)
        if len(self.data) > self._indexed:
            tail = self.data.X[self._indexed:]
            near = np.flatnonzero(np.linalg.norm(tail - center, axis=1) <= radius)
            idx = np.concatenate([idx, near + self._indexed])
        return idx


def _as_index(data) -> SampleIndex:
    return data if isinstance(data, SampleIndex) else SampleIndex(data)


def samples_in_scaled_cell(mesh: Mesh, j: int, theta_j: float, index: SampleIndex) -> np.ndarray:
    radius = theta_j * mesh.gammas[j] * (1 + 1e-9)
    idx = index.ball(mesh.anchors[j], radius)
    if idx.size == 0:
        return idx
    # counterexamples sit on the boundary; keep them despite rounding in the gauge
    return idx[gauge(mesh, j, index.data.X[idx]) <= theta_j * (1 + ANTECEDENT_RTOL)]


def edge_bound(mesh: Mesh, j: int, theta_j: float, i: int, index: SampleIndex) -> float:
    """Largest lower bound on theta_i induced by samples in R_{theta_j}(anchor_j)."""
    idx = samples_in_scaled_cell(mesh, j, theta_j, index)
    if idx.size == 0:
        return -np.inf
    return float(gauge(mesh, i, index.data.FX[idx]).max())


def caps_for(mesh: Mesh, spec: ResolutionSpec) -> np.ndarray:
    return spec.values(mesh.anchors) / mesh.gammas


def _exceeds(theta: float, cap: float) -> bool:
    return theta > cap * (1 + CAP_RTOL)


def solve_node(i: int, theta_preds: Mapping[int, Optional[float]], data, caps,
               mesh: Mesh, graph: AbstractionGraph):
    """theta_i* = max(1, bounds from predecessor hits), or Infeasible above the cap."""
    index = _as_index(data)
    theta = 1.0
    for j in graph.pred[i]:
        th = theta_preds.get(j)
        if th is None:
            raise SchedulingError(f"predecessor {j} of state {i} is not solved")
        theta = max(theta, edge_bound(mesh, j, th, i, index))
    if _exceeds(theta, caps[i]):
        return Infeasible((i,), (theta,), (float(caps[i]),))
    return theta


def _external_lower_bounds(Y, theta_ext, index, mesh, graph) -> dict[int, float]:
    members = set(Y)
    lb = {}
    for i in Y:
        t = 1.0
        for j in graph.pred[i]:
            if j in members:
                continue
            th = theta_ext.get(j)
            if th is None:
                raise SchedulingError(f"predecessor {j} of supernode {tuple(Y)} is not solved")
            t = max(t, edge_bound(mesh, j, th, i, index))
        lb[i] = t
    return lb


def _internal_edges(Y, graph) -> list[tuple[int, int]]:
    members = set(Y)
    return [(j, int(graph.succ[j])) for j in Y if int(graph.succ[j]) in members]


def _kleene(Y, lb, index, mesh, graph, caps=None) -> dict[int, float]:
    """Least fixpoint of the sample constraints with variable antecedents."""
    theta = dict(lb)
    edges = _internal_edges(Y, graph)
    while True:
        changed = False
        for j, i in edges:
            t = edge_bound(mesh, j, theta[j], i, index)
            if t > theta[i]:
                theta[i] = t
                changed = True
                if caps is not None and _exceeds(t, caps[i]):
                    return theta
        if not changed:
            return theta


def _pushforward_lp(Y, lb, caps, mesh, graph, flow: ExpressionMap):
    """Exact cycle LP for affine maps.

    For an edge j -> i, f(R_{theta_j}(a_j)) = f(a_j) + theta_j M (C_j - a_j),
    so containment in R_{theta_i}(a_i) reads, row by row,
        A_i[r] (f(a_j) - a_i) + theta_j h_r <= theta_i s_i[r],
    with h_r = max over C_j of A_i[r] M (y - a_j) >= 0.
    """
    M, c = flow.affine_parts()
    pos = {s: t for t, s in enumerate(Y)}
    rows, rhs = [], []
    for j, i in _internal_edges(Y, graph):
        Ai = mesh.cells[i].A
        s_i = slacks(mesh, i)
        fa = M @ mesh.anchors[j] + c
        V = mesh.cells[j].vertices - mesh.anchors[j]
        h = (V @ M.T @ Ai.T).max(axis=0)
        const = Ai @ (fa - mesh.anchors[i])
        for r in range(Ai.shape[0]):
            row = np.zeros(len(Y))
            row[pos[j]] += h[r]
            row[pos[i]] -= s_i[r]
            rows.append(row)
            rhs.append(-const[r])
    lo = np.array([lb[s] for s in Y])
    hi = np.array([caps[s] * (1 + CAP_RTOL) for s in Y])
    if np.any(lo > hi):
        return None
    res = linprog(np.ones(len(Y)), np.array(rows) if rows else None,
                  np.array(rhs) if rhs else None, lb=lo, ub=hi)
    if res.status == "infeasible":
        return None
    if res.status != "optimal":
        raise SolverError(f"cycle LP ended with status {res.status}")
    return {s: float(max(res.x[pos[s]], lb[s])) for s in Y}


def solve_supernode(Y: Sequence[int], theta_ext: Mapping[int, Optional[float]], data, caps,
                    mesh: Mesh, graph: AbstractionGraph,
                    flow: Optional[ExpressionMap] = None):
    """Jointly minimise sum(theta_i) over a cycle.

    With an affine ``flow`` (and dimension <= 3) the intra-cycle edges are
    enforced exactly through the pushforward LP; otherwise they are enforced on
    samples through the least fixpoint of the implication constraints.
    """
    Y = tuple(int(s) for s in Y)
    index = _as_index(data)
    lb = _external_lower_bounds(Y, theta_ext, index, mesh, graph)
    if flow is not None and flow.is_affine and mesh.dim <= 3:
        lb = _kleene(Y, lb, index, mesh, graph)
        theta = _pushforward_lp(Y, lb, caps, mesh, graph, flow)
        if theta is None:
            return Infeasible(Y, tuple(lb[s] for s in Y), tuple(float(caps[s]) for s in Y))
        return theta
    theta = _kleene(Y, lb, index, mesh, graph, caps)
    if any(_exceeds(theta[s], caps[s]) for s in Y):
        return Infeasible(Y, tuple(theta[s] for s in Y), tuple(float(caps[s]) for s in Y))
    return theta


@dataclass
class RelationAssignment:
    theta: np.ndarray
    gamma: np.ndarray
    cap: np.ndarray
    status: list
    theta_lower: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, mesh: Mesh, caps) -> "RelationAssignment":
        k = mesh.k
        return cls(np.full(k, np.nan), np.asarray(mesh.gammas, float).copy(),
                   np.asarray(caps, float).copy(), [PENDING] * k, np.full(k, np.nan))

    @property
    def radius(self) -> np.ndarray:
        return self.theta * self.gamma

    @property
    def k(self) -> int:
        return self.theta.size

    def solved(self) -> bool:
        return all(s == SOLVED for s in self.status)

    def to_records(self) -> list[dict]:
        out = []
        for i in range(self.k):
            out.append({"state": i, "theta": float(self.theta[i]), "gamma": float(self.gamma[i]),
                        "radius": float(self.radius[i]), "cap": float(self.cap[i]),
                        "status": self.status[i],
                        "theta_lower": None if self.theta_lower is None else float(self.theta_lower[i])})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_records(), indent=1)

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "RelationAssignment":
        records = sorted(records, key=lambda r: r["state"])
        tl = [r.get("theta_lower") for r in records]
        return cls(np.array([r["theta"] for r in records], float),
                   np.array([r["gamma"] for r in records], float),
                   np.array([r["cap"] for r in records], float),
                   [r["status"] for r in records],
                   None if any(t is None for t in tl) else np.array(tl, float))


def solve_cascade(graph: AbstractionGraph, mesh: Mesh, data, caps,
                  stop_at_cap: bool = True, clamp: bool = False) -> tuple[np.ndarray, list[int]]:
    """Topological sample-only solve of every state.

    With ``stop_at_cap=False`` infeasible states keep their (over-cap) bound so
    that descendants still get a value. ``clamp`` hands descendants the
    smaller of that bound and the cap, so a state is only reported when it is
    infeasible even with every predecessor at its best admissible value.
    """
    index = _as_index(data)
    theta = np.full(graph.k, np.nan)
    bad: list[int] = []
    big = np.full(graph.k, np.inf)
    for Y in (graph.sccs[s] for s in graph.topo_order):
        preds = {j: (None if np.isnan(theta[j])
                     else float(min(theta[j], caps[j]) if clamp else theta[j]))
                 for i in Y for j in graph.pred[i]}
        if any(v is None and j not in Y for j, v in preds.items()):
            continue
        limits = caps if stop_at_cap else big
        if len(Y) == 1 and graph.succ[Y[0]] != Y[0]:
            out = solve_node(Y[0], preds, index, limits, mesh, graph)
            vals = {Y[0]: out} if not isinstance(out, Infeasible) else None
        else:
            out = solve_supernode(Y, preds, index, limits, mesh, graph)
            vals = out if not isinstance(out, Infeasible) else None
        if vals is None:
            bad.extend(out.states)
            continue
        for s, t in vals.items():
            theta[s] = t
            if _exceeds(t, caps[s]):
                bad.append(s)
    return theta, sorted(set(bad))


def solve_joint(graph: AbstractionGraph, mesh: Mesh, data, caps) -> Optional[np.ndarray]:
    """One-shot cross-check: global least fixpoint of all sample constraints.

    Each round solves the LP min sum(theta) over the constraints active for
    the current antecedents; rounds repeat until the active set stops growing.
    """
    index = _as_index(data)
    k = graph.k
    theta = np.ones(k)
    edges = graph.edges()
    while True:
        lb = np.ones(k)
        for j, i in edges:
            lb[i] = max(lb[i], edge_bound(mesh, j, theta[j], i, index))
        if np.any(lb > np.asarray(caps) * (1 + CAP_RTOL)):
            return None
        res = linprog(np.ones(k), lb=lb, ub=np.asarray(caps) * (1 + CAP_RTOL))
        if res.status != "optimal":
            return None
        new = np.maximum(res.x, lb)
        if np.array_equal(new, theta):
            return theta
        theta = new


@dataclass
class PrecheckReport:
    feasible: bool
    violating: list
    theta_lower: np.ndarray


def precheck(graph: AbstractionGraph, mesh: Mesh, data, spec: ResolutionSpec) -> PrecheckReport:
    """Sample-only solve; any state whose lower bound beats its cap is certified infeasible."""
    caps = caps_for(mesh, spec)
    theta, bad = solve_cascade(graph, mesh, data, caps, stop_at_cap=False, clamp=True)
    return PrecheckReport(not bad, bad, theta)
