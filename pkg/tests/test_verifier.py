import numpy as np
import pytest
from scipy.optimize import linprog as reference_linprog

from mrbisim.abstraction import build_abstraction
from mrbisim.exprs import ExpressionMap
from mrbisim.geometry import scale
from mrbisim.sysmodel import Box, SystemModel
from mrbisim.verifier import (Budget, Counterexample, Unknown, Verified, VerificationTask,
                              verify_edge, verify_edge_affine, verify_edge_bnb, verify_relation)

from oracles import affine_system, random_voronoi_mesh, scaled_gauge

SQUARE = Box.from_pairs([[-1, 1], [-1, 1]])


def random_task(rng, system, k=12):
    mesh = random_voronoi_mesh(rng, k, system.domain)
    j, i = rng.choice(k, 2, replace=False)
    tj, ti = 1 + 2 * rng.random(), 1 + 4 * rng.random()
    src = scale(mesh.cells[j], mesh.anchors[j], tj)
    tgt = scale(mesh.cells[i], mesh.anchors[i], ti)
    return VerificationTask(src, tgt, system.flow, system.domain, Budget(), (int(j), int(i)))


def exact_worst_excess(task):
    """Largest normalised facet violation of the image, by an external LP solver."""
    M, c = task.flow.affine_parts()
    dA, db = task.domain.halfspaces()
    A = np.vstack([task.source.A, dA])
    b = np.concatenate([task.source.b, db])
    worst = -np.inf
    for r in range(task.target.A.shape[0]):
        d = M.T @ task.target.A[r]
        res = reference_linprog(-d, A_ub=A, b_ub=b, bounds=[(None, None)] * len(d), method="highs")
        val = -res.fun + task.target.A[r] @ c - task.target.b[r]
        worst = max(worst, val / (1 + abs(task.target.b[r])))
    return worst


def revalidate(task, point):
    """Independent check: point lies in the source (within the domain), image outside the target."""
    x = np.asarray(point)
    in_source = np.all(task.source.A @ x < task.source.b) and task.domain.contains(x)
    fx = task.flow.evaluate_many(x[None])[0]
    outside = np.any(task.target.A @ fx > task.target.b)
    return bool(in_source and outside)


def test_contraction_into_its_own_cell_verifies():
    system = SystemModel(SQUARE, ExpressionMap(["0.5*x0", "0.5*x1"], 2))
    sq = scale(__import__("mrbisim.geometry", fromlist=["HPolytope"]).HPolytope.from_box(SQUARE),
               [0.0, 0.0], 1.0)
    task = VerificationTask(sq, sq, system.flow, SQUARE)
    assert isinstance(verify_edge_affine(task), Verified)
    assert isinstance(verify_edge_bnb(task), Verified)


def test_expansion_yields_counterexample():
    from mrbisim.geometry import HPolytope
    system = SystemModel(SQUARE, ExpressionMap(["x0^3 + 0.9*x0", "x1"], 2), on_escape="exit")
    sq = scale(HPolytope.from_box(SQUARE), [0.0, 0.0], 1.0)
    out = verify_edge_bnb(VerificationTask(sq, sq, system.flow, SQUARE))
    assert isinstance(out, Counterexample)
    assert all(revalidate(VerificationTask(sq, sq, system.flow, SQUARE), p) for p in out.points)


@pytest.mark.parametrize("seed", range(50))
def test_affine_lp_and_branch_and_bound_agree(seed):
    rng = np.random.default_rng(1000 + seed)
    system = affine_system(rng, gain=0.5 + rng.random())
    while True:
        task = random_task(rng, system)
        truth = exact_worst_excess(task)
        if abs(truth) > 1e-3:  # keep clear of the certification margin
            break
    lp, bnb = verify_edge_affine(task), verify_edge_bnb(task)
    expected = Verified if truth < 0 else Counterexample
    assert isinstance(lp, expected)
    assert isinstance(bnb, expected)


@pytest.mark.parametrize("flow", [["0.4*x0 - 0.4*x1", "0.4*x0 + 0.4*x1"],
                                  ["0.8*x0", "piecewise(abs(x1) < 0.5, 3.2*x1^3, 0.8*x1)"],
                                  ["0.9*x1 - 0.3*x0^2", "abs(x0) - 0.6*x1"]])
def test_every_counterexample_revalidates(flow):
    system = SystemModel(SQUARE, ExpressionMap(flow, 2), on_escape="exit")
    rng = np.random.default_rng(len(flow[1]))
    returned = 0
    for _ in range(40):
        task = random_task(rng, system)
        out = verify_edge(task)
        if isinstance(out, Counterexample):
            returned += 1
            assert all(revalidate(task, p) for p in out.points)
    assert returned > 0


def test_verified_edges_hold_on_dense_samples():
    system = SystemModel(SQUARE, ExpressionMap(["0.9*x1 - 0.3*x0^2", "abs(x0) - 0.6*x1"], 2),
                         on_escape="exit")
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(40):
        task = random_task(rng, system)
        if not isinstance(verify_edge(task), Verified):
            continue
        checked += 1
        poly = task.source_polytope()
        lo, hi = poly.bounding_box()
        X = lo + rng.random((4000, 2)) * (hi - lo)
        X = X[poly.contains(X, tol=0.0)]
        FX = system.flow.evaluate_many(X)
        g = scaled_gauge(task.target.anchor, task.target.base.A, task.target.base.b, FX)
        assert np.all(g <= task.target.theta * (1 + 1e-9))
    assert checked > 0


def test_tiny_budget_reports_unknown():
    from mrbisim.geometry import HPolytope
    system = SystemModel(SQUARE, ExpressionMap(["x0^2 - 0.5", "x1*x0"], 2), on_escape="exit")
    src = scale(HPolytope.from_box(SQUARE), [0.0, 0.0], 1.0)
    tgt = scale(HPolytope.from_box(SQUARE), [0.0, 0.0], 1.0)
    out = verify_edge_bnb(VerificationTask(src, tgt, system.flow, SQUARE, Budget(max_boxes=2)))
    assert isinstance(out, (Unknown, Verified))


def test_verify_relation_rejects_unsolved_assignment():
    system = SystemModel(SQUARE, ExpressionMap(["0.5*x0", "0.5*x1"], 2))
    mesh = random_voronoi_mesh(np.random.default_rng(0), 6, SQUARE)
    graph = build_abstraction(mesh, system)
    with pytest.raises(ValueError):
        verify_relation(graph, mesh, np.full(6, np.nan), system)
