"""Meshes, quantisation and the deterministic abstraction graph."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, DomainEscapeError, GeometryError
from .geometry import MEMBERSHIP_TOL, HPolytope, max_anchor_distance
from .sysmodel import Box, SystemModel

EXIT = -1


class Mesh:
    """Pairs (anchor_i, cell_i) partitioning the domain."""

    def __init__(self, anchors, cells: Sequence[HPolytope], domain: Box):
        anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        if anchors.shape[0] != len(cells):
            raise GeometryError("one cell per anchor is required")
        anchors.setflags(write=False)
        self.anchors = anchors
        self.cells = list(cells)
        self.domain = domain
        for i, (a, c) in enumerate(zip(anchors, self.cells)):
            if np.any(c.b - c.A @ a <= 0):
                raise GeometryError(f"anchor {i} is not interior to its cell")

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def k(self) -> int:
        return len(self.cells)

    @property
    def dim(self) -> int:
        return self.anchors.shape[1]

    @cached_property
    def gammas(self) -> np.ndarray:
        return np.array([max_anchor_distance(c, a) for a, c in zip(self.anchors, self.cells)])

    def quantize_many(self, X, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        """Index of the containing cell per row; boundary ties go to the lowest index."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not np.all(self.domain.contains(X, tol=1e-12)):
            bad = X[~self.domain.contains(X, tol=1e-12)][0]
            raise DomainError(f"point {bad} lies outside the domain")
        out = np.full(X.shape[0], -1, dtype=int)
        todo = np.arange(X.shape[0])
        for i, c in enumerate(self.cells):
            if todo.size == 0:
                break
            hit = c.contains(X[todo], tol)
            if np.any(hit):
                out[todo[hit]] = i
                todo = todo[~hit]
        if todo.size:
            # numerical gaps between cells: fall back to the least violated cell
            for t in todo:
                viol = [float((X[t] @ c.A.T - c.b).max()) for c in self.cells]
                out[t] = int(np.argmin(viol))
        return out

    def quantize(self, x) -> int:
        return int(self.quantize_many(np.reshape(x, (1, -1)))[0])

    def to_records(self) -> list[dict]:
        return [{"anchor": a.tolist(), "A": c.A.tolist(), "b": c.b.tolist()}
                for a, c in zip(self.anchors, self.cells)]

    @classmethod
    def from_records(cls, records: Sequence[dict], domain: Box) -> "Mesh":
        anchors = [r["anchor"] for r in records]
        cells = [HPolytope(r["A"], r["b"], bounded=True) for r in records]
        return cls(anchors, cells, domain)


def quantize(mesh: Mesh, x) -> int:
    return mesh.quantize(x)


def strongly_connected_components(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative; components come out sinks first."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            nbrs = succ[v]
            if pos < len(nbrs):
                work[-1] = (v, pos + 1)
                w = nbrs[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


class AbstractionGraph:
    """Deterministic successor map g over abstract states.

    ``succ[i] == EXIT`` marks a state whose anchor image leaves the domain
    (only produced when the system is built with ``on_escape="exit"``).
    """

    def __init__(self, anchors, succ):
        self.anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        self.succ = np.asarray(succ, dtype=int)
        k = self.succ.size
        pred: list[list[int]] = [[] for _ in range(k)]
        for i, j in enumerate(self.succ):
            if j != EXIT:
                pred[j].append(i)
        self.pred = pred
        adj = [[int(j)] if j != EXIT else [] for j in self.succ]
        comps = strongly_connected_components(adj)
        comps.reverse()  # sources first
        self.sccs = [tuple(c) for c in comps]
        self.scc_of = np.empty(k, dtype=int)
        for s, comp in enumerate(self.sccs):
            self.scc_of[list(comp)] = s
        # Tarjan's reverse output is already a topological order of the condensation
        self.topo_order = list(range(len(self.sccs)))

    @property
    def k(self) -> int:
        return self.succ.size

    def is_cyclic(self, s: int) -> bool:
        comp = self.sccs[s]
        return len(comp) > 1 or self.succ[comp[0]] == comp[0]

    def external_preds(self, s: int) -> list[int]:
        comp = set(self.sccs[s])
        return sorted({j for i in comp for j in self.pred[i] if j not in comp})

    def edges(self) -> list[tuple[int, int]]:
        return [(i, int(j)) for i, j in enumerate(self.succ) if j != EXIT]

    def to_adjacency(self) -> dict:
        return {"states": self.k, "succ": [int(j) for j in self.succ],
                "sccs": [list(c) for c in self.sccs]}


def build_abstraction(mesh: Mesh, system: SystemModel) -> AbstractionGraph:
    """Successor of each state is the cell containing the image of its anchor."""
    images = system.flow.evaluate_many(mesh.anchors)
    inside = system.domain.contains(images, tol=0.0)
    if not np.all(inside):
        if system.on_escape == "error":
            i = int(np.argmin(inside))
            raise DomainEscapeError(i, images[i])
    succ = np.full(mesh.k, EXIT, dtype=int)
    if np.any(inside):
        succ[inside] = mesh.quantize_many(images[inside])
    return AbstractionGraph(mesh.anchors, succ)


def ancestors(graph: AbstractionGraph, i: int) -> set[int]:
    return ancestors_of_set(graph, [i])


def ancestors_of_set(graph: AbstractionGraph, states: Iterable[int]) -> set[int]:
    seen: set[int] = set()
    queue = deque()
    for s in states:
        queue.extend(graph.pred[s])
    while queue:
        v = queue.popleft()
        if v in seen:
            continue
        seen.add(v)
        queue.extend(graph.pred[v])
    return seen


def descendants(graph: AbstractionGraph, i: int) -> set[int]:
    return descendants_of_set(graph, [i])


def descendants_of_set(graph: AbstractionGraph, states: Iterable[int]) -> set[int]:
    seen: set[int] = set()
    for s in states:
        v = int(graph.succ[s])
        while v != EXIT and v not in seen:
            seen.add(v)
            v = int(graph.succ[v])
    return seen


def topological_supernode_order(graph: AbstractionGraph) -> list[tuple[int, ...]]:
    return [graph.sccs[s] for s in graph.topo_order]


NODE_COLORS = {"solved": "palegreen", "failed": "tomato", "refined": "orange",
               "pending": "lightgray"}


def to_dot(graph: AbstractionGraph, theta=None, radius=None, status=None) -> str:
    """DOT text; nodes carry index, anchor and (when given) theta and radius."""
    lines = ["digraph abstraction {", "  node [shape=box, style=filled];"]
    for i in range(graph.k):
        label = [f"{i}", "(" + ", ".join(f"{c:.4g}" for c in graph.anchors[i]) + ")"]
        if theta is not None:
            label.append(f"theta={float(theta[i]):.4g}")
        if radius is not None:
            label.append(f"eps={float(radius[i]):.4g}")
        st = status[i] if status is not None else "pending"
        color = NODE_COLORS.get(st, "white")
        text = "\\n".join(label)
        lines.append(f'  n{i} [label="{text}", status="{st}", fillcolor="{color}"];')
    if np.any(graph.succ == EXIT):
        lines.append("  exit [shape=point];")
    for i, j in enumerate(graph.succ):
        lines.append(f"  n{i} -> {'exit' if j == EXIT else f'n{int(j)}'};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json_adjacency(graph: AbstractionGraph, status=None) -> dict:
    out = graph.to_adjacency()
    out["anchors"] = graph.anchors.tolist()
    if status is not None:
        out["status"] = list(status)
    return out
