import numpy as np
import pytest

from mrbisim.abstraction import build_abstraction
from mrbisim.cegis import (EdgeCache, Exhausted, SynthesisConfig, initial_mesh, low_level_loop,
                           refine, synthesize, uniform_grid_baseline)
from mrbisim.cli_io import EXAMPLES, check_example, interval_mesh
from mrbisim.errors import ConfigError
from mrbisim.exprs import ExpressionMap
from mrbisim.learner import precheck
from mrbisim.sysmodel import Box, ResolutionSpec, SystemModel, sample_dataset
from mrbisim.verifier import Verified, verify_relation

from oracles import bisimulation_violations

SQUARE = Box.from_pairs([[-1, 1], [-1, 1]])
ROTATION = SystemModel(SQUARE, ExpressionMap(["0.4*x0 - 0.4*x1", "0.4*x0 + 0.4*x1"], 2))


@pytest.fixture(scope="module")
def constant_result():
    spec = ResolutionSpec.constant(1.0)
    return synthesize(ROTATION, spec, SynthesisConfig(k_init=30, N=3000, max_high_iters=2))


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_hand_built_examples_verify(name):
    row = check_example(name)
    assert row["verdict"] == "verified" and row["resolution_ok"]
    assert row["time"] < 1.0


def test_example_state_counts():
    assert [check_example(n)["states"] for n in ("doubling_uniform", "doubling_merged", "doubling_geometric")] == [16, 8, 7]


def test_uniform_example_is_a_bisimulation():
    system, spec, anchors, cells = EXAMPLES["doubling_uniform"]()
    mesh = interval_mesh(anchors, cells, system.domain)
    graph = build_abstraction(mesh, system)
    pts = np.linspace(1, 16, 4001)[:, None]
    assert bisimulation_violations(mesh, graph, np.ones(mesh.k), system, 1.0, pts) == []


def test_constant_resolution_result_is_a_bisimulation(constant_result):
    res = constant_result
    assert isinstance(res.certificate, Verified)
    pts = SQUARE.sample(np.random.default_rng(99), 20_000)
    assert bisimulation_violations(res.mesh, res.abstraction, res.assignment.theta, ROTATION,
                                   1.0, pts) == []


def test_oracle_detects_a_broken_relation(constant_result):
    res = constant_result
    pts = SQUARE.sample(np.random.default_rng(1), 5000)
    squeezed = np.ones(res.k)
    problems = bisimulation_violations(res.mesh, res.abstraction, squeezed * 0.5, ROTATION, 1.0, pts)
    assert problems


def test_precheck_bounds_final_theta(constant_result):
    res = constant_result
    rep = precheck(res.abstraction, res.mesh, res.data, res.spec)
    assert np.all(rep.theta_lower <= res.assignment.theta * (1 + 1e-12))


def test_vacuous_resolution_needs_no_refinement():
    res = synthesize(ROTATION, ResolutionSpec.constant(1e6),
                     SynthesisConfig(k_init=20, N=2000, max_high_iters=0))
    assert res.high_iterations == 0 and isinstance(res.certificate, Verified)
    assert np.all(res.assignment.theta < 1e3)


def test_zero_refinement_budget_exhausts_with_failures():
    with pytest.raises(Exhausted) as info:
        synthesize(ROTATION, ResolutionSpec.constant(0.05),
                   SynthesisConfig(k_init=10, N=1000, max_high_iters=0))
    assert info.value.failed and info.value.trace


def test_state_budget_stops_refinement():
    with pytest.raises(Exhausted) as info:
        synthesize(ROTATION, ResolutionSpec.constant(0.05),
                   SynthesisConfig(k_init=10, N=1000, max_high_iters=5, max_states=12))
    assert "limit 12" in str(info.value)


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthesisConfig(refinement="magic")
    with pytest.raises(ConfigError):
        SynthesisConfig(k_init=0)
    with pytest.raises(ConfigError):
        SynthesisConfig(k_init=10, max_states=5)


def test_cached_and_fresh_low_level_solves_agree():
    spec = ResolutionSpec.affine_norm(0.3, 0.5)
    cfg = SynthesisConfig(k_init=30, N=3000)
    data = sample_dataset(ROTATION, cfg.N, 0)
    mesh = initial_mesh(ROTATION, spec, cfg, data)
    graph = build_abstraction(mesh, ROTATION)
    cache = EdgeCache()
    first = low_level_loop(mesh, graph, data, spec, cfg, ROTATION, cache)
    warm = low_level_loop(mesh, graph, first.data, spec, cfg, ROTATION, cache)
    cold = low_level_loop(mesh, graph, first.data, spec, cfg, ROTATION, EdgeCache())
    assert np.array_equal(warm.assignment.theta, cold.assignment.theta, equal_nan=True)
    assert warm.failed == cold.failed


def test_refine_splits_failed_state_and_ancestors_only():
    spec = ResolutionSpec.affine_norm(0.3, 0.5)
    cfg = SynthesisConfig(k_init=15, N=1500)
    mesh = initial_mesh(ROTATION, spec, cfg, sample_dataset(ROTATION, cfg.N, 0))
    graph = build_abstraction(mesh, ROTATION)
    leaf = next(i for i in range(mesh.k) if not graph.pred[i])
    new = refine(mesh, graph, [leaf])
    assert new.k == mesh.k + 1
    old = {tuple(a) for a in mesh.anchors}
    assert sum(tuple(a) in old for a in new.anchors) == mesh.k - 1


def test_grid_baseline_counts():
    grid = uniform_grid_baseline(ROTATION, epsilon=0.5, eta=np.sqrt(2) / 20, build_graph=False)
    assert grid.spacing == pytest.approx(0.1)
    assert grid.lattice_count == 441 and grid.cell_count == 400


def test_grid_baseline_in_one_dimension():
    system = SystemModel(Box.from_pairs([[0, 1]]), ExpressionMap(["0.5*x0"], 1))
    grid = uniform_grid_baseline(system, epsilon=0.2, eta=0.05)
    assert grid.spacing == pytest.approx(0.1) and grid.cell_count == 10
    assert isinstance(verify_relation(grid.graph, grid.mesh, grid.assignment, system), Verified)
