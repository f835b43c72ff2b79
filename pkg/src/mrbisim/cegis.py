"""Two-level synthesis loop: learner/verifier per state, mesh refinement on failure."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .abstraction import (EXIT, AbstractionGraph, Mesh, ancestors_of_set, build_abstraction)
from .clustering import ClusteringConfig, kmeans_restarts, mesh_from_centroids
from .errors import ConfigError, SplitError
from .geometry import HPolytope, split_cell
from .learner import (INFEASIBLE, PENDING, SOLVED, Infeasible, RelationAssignment, SampleIndex,
                      caps_for, precheck, solve_node, solve_supernode)
from .sysmodel import Box, ResolutionSpec, SystemModel, TransitionDataset, sample_dataset
from .verifier import Budget, Counterexample, Unknown, Verified, edge_task, verify_edge, verify_relation

log = logging.getLogger(__name__)

REFINEMENT_POLICIES = ("split", "recluster", "auto")
MESH_SELECTION = ("precheck", "objective")


@dataclass
class SynthesisConfig:
    k_init: int = 30
    N: int = 5000
    max_high_iters: int = 10
    max_low_iters_per_node: int = 50
    budget: Budget = field(default_factory=Budget)
    rng_seed: int = 0
    weight_mode: str = "inverse_resolution"
    restarts: int = 20
    select: str = "precheck"  # how to pick among k-means restarts: "precheck" or "objective"
    kmeans_iters: int = 100
    margin: float = 1e-3  # relative slack on theta for non-affine maps
    refinement: str = "auto"
    growth: float = 1.5  # k multiplier when re-clustering
    split_fraction: float = 0.5  # auto: split while this share of states or fewer is affected
    max_states: Optional[int] = None  # stop refining once a mesh would exceed this size

    def __post_init__(self):
        for name in ("k_init", "N", "max_low_iters_per_node", "restarts", "kmeans_iters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synthesis.{name} must be positive")
        if self.max_high_iters < 0:
            raise ConfigError("synthesis.max_high_iters must be non-negative")
        if self.margin < 0:
            raise ConfigError("synthesis.margin must be non-negative")
        if self.refinement not in REFINEMENT_POLICIES:
            raise ConfigError(f"synthesis.refinement must be one of {REFINEMENT_POLICIES}")
        if self.select not in MESH_SELECTION:
            raise ConfigError(f"synthesis.select must be one of {MESH_SELECTION}")
        if self.growth <= 1.0:
            raise ConfigError("synthesis.growth must exceed 1")
        if self.max_states is not None and self.max_states < self.k_init:
            raise ConfigError("synthesis.max_states must be at least k_init")
        if not 0.0 < self.split_fraction <= 1.0:
            raise ConfigError("synthesis.split_fraction must lie in (0, 1]")

    def clustering(self, k: Optional[int] = None) -> ClusteringConfig:
        return ClusteringConfig(k=k or self.k_init, weight_mode=self.weight_mode,
                                max_iters=self.kmeans_iters, rng_seed=self.rng_seed,
                                restarts=self.restarts)

    def to_dict(self) -> dict:
        return {"k_init": self.k_init, "N": self.N, "max_high_iters": self.max_high_iters,
                "max_low_iters_per_node": self.max_low_iters_per_node,
                "max_boxes": self.budget.max_boxes, "min_box_width": self.budget.min_width,
                "rng_seed": self.rng_seed, "weight_mode": self.weight_mode,
                "restarts": self.restarts, "select": self.select, "kmeans_iters": self.kmeans_iters,
                "margin": self.margin, "refinement": self.refinement, "growth": self.growth,
                "split_fraction": self.split_fraction, "max_states": self.max_states}


@dataclass
class SynthesisResult:
    mesh: Mesh
    abstraction: AbstractionGraph
    assignment: RelationAssignment
    certificate: object
    trace: list
    data: TransitionDataset
    spec: ResolutionSpec

    @property
    def k(self) -> int:
        return self.mesh.k

    @property
    def high_iterations(self) -> int:
        return sum(1 for t in self.trace if t.get("event") == "refine")


class Exhausted(Exception):
    """Budgets ran out before a verified relation was found."""

    def __init__(self, message: str, trace: list, failed: list, mesh: Optional[Mesh] = None):
        super().__init__(message)
        self.trace = trace
        self.failed = failed
        self.mesh = mesh


class EdgeCache:
    """Remembers verified edges by the exact geometry and scalings involved."""

    def __init__(self):
        self._ok: set = set()

    @staticmethod
    def key(mesh: Mesh, theta, j: int, i: int) -> tuple:
        cj, ci = mesh.cells[j], mesh.cells[i]
        return (cj.A.tobytes(), cj.b.tobytes(), mesh.anchors[j].tobytes(), float(theta[j]),
                ci.A.tobytes(), ci.b.tobytes(), mesh.anchors[i].tobytes(), float(theta[i]))

    def __contains__(self, key) -> bool:
        return key in self._ok

    def add(self, key) -> None:
        self._ok.add(key)


@dataclass
class LowLevelOutcome:
    assignment: RelationAssignment
    failed: list
    data: TransitionDataset
    counterexamples: int
    edge_checks: int
    reasons: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return not self.failed and self.assignment.solved()


def _candidate(theta_star: float, cap: float, margin: float) -> float:
    """Scaling handed to the verifier: a hair above the sample optimum, never above the cap."""
    return float(min(max(cap, theta_star), theta_star * (1.0 + margin)))


def low_level_loop(mesh: Mesh, graph: AbstractionGraph, data: TransitionDataset,
                   spec: ResolutionSpec, cfg: SynthesisConfig, system: SystemModel,
                   cache: Optional[EdgeCache] = None) -> LowLevelOutcome:
    """Solve and verify supernodes in topological order.

    Failed states do not stop the sweep: independent supernodes are still
    solved so that one round reports every failure it can see. Descendants of
    a failed state stay pending.
    """
    caps = caps_for(mesh, spec)
    asg = RelationAssignment.empty(mesh, caps)
    index = SampleIndex(data)
    margin = 0.0 if system.flow.is_affine else cfg.margin
    failed: list[int] = []
    reasons: dict[int, str] = {}
    n_ctx = 0
    n_checks = 0
    cache = cache if cache is not None else EdgeCache()
    for Y in (graph.sccs[s] for s in graph.topo_order):
        members = set(Y)
        ext = {j for i in Y for j in graph.pred[i] if j not in members}
        if any(asg.status[j] != SOLVED for j in ext):
            continue
        cyclic = len(Y) > 1 or graph.succ[Y[0]] == Y[0]
        ok = False
        reason = "budget"
        for _ in range(cfg.max_low_iters_per_node):
            theta_known = {j: float(asg.theta[j]) for j in ext}
            if cyclic:
                out = solve_supernode(Y, theta_known, index, caps, mesh, graph, system.flow)
            else:
                out = solve_node(Y[0], theta_known, index, caps, mesh, graph)
                if not isinstance(out, Infeasible):
                    out = {Y[0]: out}
            if isinstance(out, Infeasible):
                reason = "infeasible"
                break
            for s, t in out.items():
                asg.theta_lower[s] = t
                asg.theta[s] = _candidate(t, caps[s], margin)
            points = []
            unknown = False
            for i in Y:
                for j in graph.pred[i]:
                    key = cache.key(mesh, asg.theta, j, i)
                    if key in cache:
                        continue
                    n_checks += 1
                    verdict = verify_edge(edge_task(mesh, asg.theta, j, i, system, cfg.budget))
                    if isinstance(verdict, Verified):
                        cache.add(key)
                    elif isinstance(verdict, Counterexample):
                        points.append(verdict.points)
                    else:
                        unknown = True
            if unknown:
                reason = "unknown"
                break
            if not points:
                ok = True
                break
            P = np.vstack(points)
            n_ctx += P.shape[0]
            data = data.extend(system, P)
            index.update(data)
        for s in Y:
            asg.status[s] = SOLVED if ok else INFEASIBLE
        if not ok:
            failed.extend(Y)
            reasons.update({int(s): reason for s in Y})
    return LowLevelOutcome(asg, sorted(failed), data, n_ctx, n_checks, reasons)


def refine(mesh: Mesh, graph: AbstractionGraph, failed) -> Mesh:
    """Bisect every failed cell and every ancestor cell once.

    Untouched (anchor, cell) pairs keep their objects and relative order; a
    split cell is replaced in place by its two halves.
    """
    failed = set(int(s) for s in failed)
    if not failed:
        raise ValueError("refine needs at least one failed state")
    chosen = failed | ancestors_of_set(graph, failed)
    anchors, cells = [], []
    for i in range(mesh.k):
        if i in chosen:
            try:
                halves = split_cell(mesh.cells[i], mesh.anchors[i])
            except SplitError as exc:
                raise SplitError(f"state {i}: {exc}") from None
            for a, c in halves:
                anchors.append(a)
                cells.append(c)
        else:
            anchors.append(mesh.anchors[i])
            cells.append(mesh.cells[i])
    return Mesh(np.array(anchors), cells, mesh.domain)


def initial_mesh(system: SystemModel, spec: ResolutionSpec, cfg: SynthesisConfig,
                 data: TransitionDataset, k: Optional[int] = None) -> Mesh:
    """Cluster the samples into a mesh.

    With ``select="precheck"`` every k-means restart is scored by the number
    of states the sample-only precheck already rules out, ties broken by the
    clustering objective. No verifier calls are made.
    """
    runs = kmeans_restarts(data, cfg.clustering(k), spec)
    if cfg.select == "objective" or len(runs) == 1:
        return mesh_from_centroids(min(runs, key=lambda r: r.objective).centroids, system.domain)
    best, best_score = None, None
    for run in sorted(runs, key=lambda r: r.objective):
        mesh = mesh_from_centroids(run.centroids, system.domain)
        score = len(precheck(build_abstraction(mesh, system), mesh, data, spec).violating)
        if best_score is None or score < best_score:
            best, best_score = mesh, score
        if score == 0:
            break
    return best


def _next_mesh(system, spec, cfg, data, mesh, graph, failed) -> tuple[Mesh, str]:
    chosen = set(failed) | ancestors_of_set(graph, failed)
    policy = cfg.refinement
    if policy == "auto":
        policy = "split" if len(chosen) <= cfg.split_fraction * mesh.k else "recluster"
    if policy == "split":
        return refine(mesh, graph, failed), "split"
    k = max(int(np.ceil(cfg.growth * mesh.k)), mesh.k + 1)
    return initial_mesh(system, spec, cfg, data, k), "recluster"


def synthesize(system: SystemModel, spec: ResolutionSpec, cfg: SynthesisConfig,
               mesh: Optional[Mesh] = None) -> SynthesisResult:
    """Sample, cluster, then alternate low-level solves and refinements until verified."""
    spec.check_domain(system.domain)
    t0 = time.perf_counter()
    trace: list[dict] = []
    data = sample_dataset(system, cfg.N, cfg.rng_seed)
    if mesh is None:
        mesh = initial_mesh(system, spec, cfg, data)
    trace.append({"event": "mesh", "k": mesh.k, "time": time.perf_counter() - t0})
    cache = EdgeCache()
    refinements = 0
    failed: list[int] = []
    while True:
        graph = build_abstraction(mesh, system)
        pre = precheck(graph, mesh, data, spec)
        if not pre.feasible:
            failed = pre.violating
            trace.append({"event": "precheck", "k": mesh.k, "violating": list(map(int, failed)),
                          "time": time.perf_counter() - t0})
            log.info("precheck: %d certified-infeasible states at k=%d", len(failed), mesh.k)
        else:
            out = low_level_loop(mesh, graph, data, spec, cfg, system, cache)
            data = out.data
            trace.append({"event": "low_level", "k": mesh.k, "failed": list(map(int, out.failed)),
                          "counterexamples": out.counterexamples, "edge_checks": out.edge_checks,
                          "time": time.perf_counter() - t0})
            log.info("low-level loop at k=%d: %d failed, %d counterexamples",
                     mesh.k, len(out.failed), out.counterexamples)
            if out.success:
                asg = out.assignment
                asg.theta_lower = np.minimum(asg.theta_lower, asg.theta)
                cert = verify_relation(graph, mesh, asg, system, cfg.budget)
                trace.append({"event": "final_verify", "verdict": cert.kind,
                              "time": time.perf_counter() - t0})
                if isinstance(cert, Verified):
                    # keep the precheck bounds for reporting
                    asg.theta_lower = np.minimum(pre.theta_lower, asg.theta)
                    return SynthesisResult(mesh, graph, asg, cert, trace, data, spec)
                if isinstance(cert, Counterexample):
                    data = data.extend(system, cert.points)
                    failed = [int(cert.edge[1])]
                else:
                    failed = [int(cert.edge[1])] if cert.edge else []
            else:
                failed = out.failed
        if refinements >= cfg.max_high_iters or not failed:
            raise Exhausted(f"no verified relation after {refinements} refinement rounds "
                            f"({len(failed)} failed states)", trace, list(map(int, failed)), mesh)
        new_mesh, how = _next_mesh(system, spec, cfg, data, mesh, graph, failed)
        if cfg.max_states is not None and new_mesh.k > cfg.max_states:
            raise Exhausted(f"refinement would grow the mesh to {new_mesh.k} states "
                            f"(limit {cfg.max_states})", trace, list(map(int, failed)), mesh)
        mesh = new_mesh
        refinements += 1
        trace.append({"event": "refine", "mode": how, "k": mesh.k,
                      "split_from": list(map(int, failed)), "time": time.perf_counter() - t0})


@dataclass
class GridBaseline:
    spacing: float
    lattice_count: int
    cell_count: int
    mesh: Mesh
    graph: Optional[AbstractionGraph]
    assignment: RelationAssignment
    compared: str = "cell_count"


def _axis_breaks(lo: float, hi: float, s: float) -> tuple[np.ndarray, int]:
    k_lo = int(np.ceil(lo / s - 1e-9))
    k_hi = int(np.floor(hi / s + 1e-9))
    lattice = np.arange(k_lo, k_hi + 1) * s
    lattice = np.clip(lattice, lo, hi)
    breaks = np.unique(np.concatenate([[lo], lattice, [hi]]))
    # merge breakpoints that only differ by rounding
    keep = [breaks[0]]
    for v in breaks[1:]:
        if v - keep[-1] > 1e-9 * s:
            keep.append(v)
    return np.array(keep), lattice.size


def uniform_grid_baseline(system: SystemModel, epsilon: float, eta: float,
                          build_graph: bool = True) -> GridBaseline:
    """Uniform-grid abstraction with spacing 2*eta/sqrt(n).

    Reports the lattice point count and the count of grid cells between
    consecutive lattice points; the mesh (one box per cell, anchored at its
    center) is the one compared against synthesized abstractions.
    """
    if not eta > 0:
        raise ConfigError("eta must be positive")
    dom = system.domain
    n = dom.dim
    s = 2.0 * eta / np.sqrt(n)
    per_axis = [_axis_breaks(lo, hi, s) for lo, hi in zip(dom.lo, dom.hi)]
    lattice_count = int(np.prod([c for _, c in per_axis]))
    edges = [b for b, _ in per_axis]
    cells, anchors = [], []
    for idx in np.ndindex(*[len(e) - 1 for e in edges]):
        lo = np.array([e[t] for e, t in zip(edges, idx)])
        hi = np.array([e[t + 1] for e, t in zip(edges, idx)])
        box = Box(lo, hi)
        cells.append(HPolytope.from_box(box))
        anchors.append(box.center)
    mesh = Mesh(np.array(anchors), cells, dom)
    caps = np.full(mesh.k, float(epsilon)) / mesh.gammas
    asg = RelationAssignment(caps.copy(), np.asarray(mesh.gammas).copy(), caps.copy(),
                             [SOLVED] * mesh.k)
    graph = build_abstraction(mesh, system) if build_graph else None
    return GridBaseline(float(s), lattice_count, mesh.k, mesh, graph, asg)
