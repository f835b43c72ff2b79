"""Configuration files, result directories, benchmark fixtures and the command line."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .abstraction import EXIT, AbstractionGraph, Mesh, build_abstraction, to_dot, to_json_adjacency
from .cegis import (REFINEMENT_POLICIES, Exhausted, SynthesisConfig, SynthesisResult, synthesize,
                    uniform_grid_baseline)
from .errors import ConfigError, MrbisimError
from .exprs import ExpressionMap
from .geometry import HPolytope
from .learner import SOLVED, RelationAssignment, caps_for
from .sysmodel import Box, ResolutionSpec, SystemModel
from .verifier import Budget, Counterexample, Verified, verify_relation

log = logging.getLogger(__name__)

EXIT_VERIFIED = 0
EXIT_EXHAUSTED = 2
EXIT_CONFIG = 3

RESULT_FILES = ("config.json", "mesh.json", "graph.dot", "graph.json", "relation.json",
                "resolution.csv", "trace.json")
SYNTHESIS_KEYS = {"k_init": int, "N": int, "max_high_iters": int, "max_low_iters_per_node": int,
                  "rng_seed": int, "weight_mode": str, "restarts": int, "select": str,
                  "kmeans_iters": int,
                  "margin": float, "refinement": str, "growth": float, "split_fraction": float,
                  "max_states": int, "max_boxes": int, "min_box_width": float}
TOP_KEYS = {"dim", "domain", "flow", "resolution", "initial_set", "on_escape", "synthesis",
            "clustering", "name"}


# ---------------------------------------------------------------- configuration

def _line_of(text: str, key: str) -> Optional[int]:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _where(text: Optional[str], key: str) -> str:
    line = _line_of(text, key) if text else None
    return f"key '{key}'" + (f" (line {line})" if line else "")


def config_from_dict(cfg: dict, text: Optional[str] = None
                     ) -> tuple[SystemModel, ResolutionSpec, SynthesisConfig]:
    """Validate a parsed config; errors name the offending key (and line when known)."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown {_where(text, sorted(unknown)[0])}")
    for key in ("dim", "domain", "flow", "resolution"):
        if key not in cfg:
            raise ConfigError(f"missing required key '{key}'")
    dim = cfg["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError(f"{_where(text, 'dim')}: must be a positive integer")
    try:
        domain = Box.from_pairs(cfg["domain"])
    except (TypeError, ValueError, ConfigError) as exc:
        raise ConfigError(f"{_where(text, 'domain')}: {exc}") from None
    if domain.dim != dim:
        raise ConfigError(f"{_where(text, 'domain')}: expected {dim} intervals")
    flow_src = cfg["flow"]
    if not isinstance(flow_src, list) or not all(isinstance(s, str) for s in flow_src):
        raise ConfigError(f"{_where(text, 'flow')}: must be a list of expression strings")
    try:
        flow = ExpressionMap(flow_src, dim)
    except ConfigError as exc:
        raise type(exc)(f"{_where(text, 'flow')}: {exc}") from None
    initial = None
    if "initial_set" in cfg:
        try:
            initial = Box.from_pairs(cfg["initial_set"])
        except (TypeError, ValueError, ConfigError) as exc:
            raise ConfigError(f"{_where(text, 'initial_set')}: {exc}") from None
    try:
        system = SystemModel(domain, flow, initial, cfg.get("on_escape", "error"))
        spec = ResolutionSpec.from_dict(cfg["resolution"], dim)
        spec.check_domain(domain)
    except ConfigError as exc:
        key = "resolution" if "resolution" in str(exc) or type(exc).__name__ == "SpecError" else "flow"
        raise type(exc)(f"{_where(text, key)}: {exc}") from None
    return system, spec, _synthesis_from_dict(cfg, text)


def _synthesis_from_dict(cfg: dict, text: Optional[str]) -> SynthesisConfig:
    merged: dict = {}
    for section in ("clustering", "synthesis"):
        block = cfg.get(section, {})
        if not isinstance(block, dict):
            raise ConfigError(f"{_where(text, section)}: must be an object")
        for key, value in block.items():
            if key == "k":
                key = "k_init"
            if key not in SYNTHESIS_KEYS:
                raise ConfigError(f"unknown {_where(text, key)} in '{section}'")
            kind = SYNTHESIS_KEYS[key]
            if value is not None and not (isinstance(value, kind)
                                          or (kind is float and isinstance(value, int))):
                raise ConfigError(f"{_where(text, key)}: expected {kind.__name__}")
            merged[key] = value
    budget = Budget(max_boxes=merged.pop("max_boxes", Budget.max_boxes),
                    min_width=merged.pop("min_box_width", None))
    try:
        return SynthesisConfig(budget=budget, **merged)
    except ConfigError as exc:
        key = str(exc).split()[0].split(".")[-1]
        raise ConfigError(f"{_where(text, key)}: {exc}") from None


def load_config(path) -> tuple[SystemModel, ResolutionSpec, SynthesisConfig]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(cfg, text)


def config_to_dict(system: SystemModel, spec: ResolutionSpec, cfg: SynthesisConfig) -> dict:
    out = {"dim": system.dim, "domain": system.domain.to_pairs(), "flow": list(system.flow.sources),
           "resolution": spec.to_dict(), "on_escape": system.on_escape}
    if system.initial_set is not system.domain:
        out["initial_set"] = system.initial_set.to_pairs()
    syn = {k: v for k, v in cfg.to_dict().items() if v is not None}
    out["synthesis"] = syn
    return out


def save_config(path, system: SystemModel, spec: ResolutionSpec, cfg: SynthesisConfig) -> None:
    Path(path).write_text(json.dumps(config_to_dict(system, spec, cfg), indent=2) + "\n")


# ---------------------------------------------------------------- results

def node_status(assignment: RelationAssignment) -> list[str]:
    return ["solved" if s == SOLVED else ("failed" if s == "infeasible" else "pending")
            for s in assignment.status]


def resolution_rows(mesh: Mesh, assignment: RelationAssignment, spec: ResolutionSpec) -> list[dict]:
    spec_vals = spec.values(mesh.anchors)
    lower = assignment.theta_lower if assignment.theta_lower is not None else assignment.theta
    rows = []
    for i in range(mesh.k):
        rows.append({"state": i, "anchor_norm": float(np.linalg.norm(mesh.anchors[i])),
                     "mesh_resolution": float(assignment.gamma[i]),
                     "lower_bound": float(lower[i] * assignment.gamma[i]),
                     "achieved": float(assignment.radius[i]),
                     "specified": float(spec_vals[i])})
    return rows


def emit_resolution_csv(result: SynthesisResult, path=None) -> str:
    """One row per state: norm, gamma, precheck bound, achieved and specified radius."""
    rows = resolution_rows(result.mesh, result.assignment, result.spec)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in sorted(rows, key=lambda r: (r["anchor_norm"], r["state"])):
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def write_result(result: SynthesisResult, out_dir, system: SystemModel,
                 cfg: SynthesisConfig) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(out / "config.json", system, result.spec, cfg)
    (out / "mesh.json").write_text(json.dumps(result.mesh.to_records()))
    status = node_status(result.assignment)
    (out / "graph.dot").write_text(to_dot(result.abstraction, result.assignment.theta,
                                          result.assignment.radius, status))
    (out / "graph.json").write_text(json.dumps(to_json_adjacency(result.abstraction, status)))
    (out / "relation.json").write_text(json.dumps(result.assignment.to_records()))
    emit_resolution_csv(result, out / "resolution.csv")
    (out / "trace.json").write_text(json.dumps(result.trace, default=_json_default, indent=1))
    return out


@dataclass
class LoadedResult:
    system: SystemModel
    spec: ResolutionSpec
    cfg: SynthesisConfig
    mesh: Mesh
    graph: AbstractionGraph
    assignment: RelationAssignment


def load_result(result_dir) -> LoadedResult:
    d = Path(result_dir)
    missing = [f for f in ("config.json", "mesh.json", "relation.json") if not (d / f).is_file()]
    if missing:
        raise ConfigError(f"{d}: missing {', '.join(missing)}")
    system, spec, cfg = load_config(d / "config.json")
    mesh = Mesh.from_records(json.loads((d / "mesh.json").read_text()), system.domain)
    asg = RelationAssignment.from_records(json.loads((d / "relation.json").read_text()))
    if asg.k != mesh.k:
        raise ConfigError(f"{d}: relation has {asg.k} states, mesh has {mesh.k}")
    return LoadedResult(system, spec, cfg, mesh, build_abstraction(mesh, system), asg)


@dataclass
class ResolutionViolation:
    """States whose relation radius exceeds the specified resolution."""
    states: list
    kind: str = field(default="resolution_violation", init=False)


def reverify(loaded: LoadedResult, budget: Optional[Budget] = None):
    """Re-check every edge and every resolution bound from serialized data alone."""
    radius = loaded.assignment.theta * loaded.mesh.gammas
    over = radius > loaded.spec.values(loaded.mesh.anchors) * (1 + 1e-9)
    if np.any(over):
        return ResolutionViolation([int(i) for i in np.flatnonzero(over)])
    return verify_relation(loaded.graph, loaded.mesh, loaded.assignment, loaded.system,
                           budget or loaded.cfg.budget)


# ---------------------------------------------------------------- fixtures

def interval_mesh(anchors, cells, domain: Box) -> Mesh:
    return Mesh(np.asarray(anchors, float)[:, None],
                [HPolytope.from_box(Box(np.array([lo]), np.array([hi]))) for lo, hi in cells],
                domain)


def _doubling(domain_hi: float) -> SystemModel:
    return SystemModel(Box.from_pairs([[1.0, domain_hi]]), ExpressionMap(["2*x0"], 1),
                       on_escape="exit")


def example_uniform():
    """Sixteen states {9,11,13,15} * 2^-k with unit-width-scaled cells, eps = 1."""
    anchors, cells = [], []
    for k in range(4):
        s = 0.5 ** k
        for c in (9, 11, 13, 15):
            anchors.append(c * s)
            cells.append(((c - 1) * s, (c + 1) * s))
    return _doubling(16.0), ResolutionSpec.constant(1.0), anchors, cells


EXAMPLE2_U = 2.5 / 12
EXAMPLE2_V = 0.5 - EXAMPLE2_U


def example_merged():
    """Eight states: 9 * 2^-k with [8,10] * 2^-k and 13 * 2^-k with [10,16] * 2^-k."""
    anchors, cells = [], []
    for k in range(4):
        s = 0.5 ** k
        anchors += [9 * s, 13 * s]
        cells += [(8 * s, 10 * s), (10 * s, 16 * s)]
    return _doubling(16.0), ResolutionSpec.affine_norm(EXAMPLE2_U, EXAMPLE2_V), anchors, cells


def example_geometric(count: int = 7):
    """Anchors 1.5 * 2^i with relation sets [2^i, 2^(i+1)] on [1, 1.5 * 2^(count-1)]."""
    anchors = [1.5 * 2 ** i for i in range(count)]
    cells = [(2.0 ** i, 2.0 ** (i + 1)) for i in range(count)]
    spec = ResolutionSpec("expr", expr="x0 / 3", dim=1)
    return _doubling(anchors[-1]), spec, anchors, cells


EXAMPLES = {"doubling_uniform": example_uniform, "doubling_merged": example_merged, "doubling_geometric": example_geometric}


def check_example(name: str) -> dict:
    system, spec, anchors, cells = EXAMPLES[name]()
    t0 = time.perf_counter()
    mesh = interval_mesh(anchors, cells, system.domain)
    graph = build_abstraction(mesh, system)
    caps = caps_for(mesh, spec)
    theta = np.ones(mesh.k)
    asg = RelationAssignment(theta, np.asarray(mesh.gammas, float), caps, [SOLVED] * mesh.k)
    within = bool(np.all(asg.radius <= spec.values(mesh.anchors) * (1 + 1e-12)))
    verdict = verify_relation(graph, mesh, asg, system)
    return {"name": name, "states": mesh.k, "verdict": verdict.kind, "resolution_ok": within,
            "edges": len(graph.edges()), "time": time.perf_counter() - t0}


LINEAR_ROTATION = ["0.4*x0 - 0.4*x1", "0.4*x0 + 0.4*x1"]


def discretized_linear(A, tau: float) -> list[str]:
    M = expm(tau * np.asarray(A, float))
    return [" + ".join(f"{float(M[r, c])!r}*x{c}" for c in range(M.shape[1]))
            for r in range(M.shape[0])]


@dataclass
class BenchmarkFixture:
    name: str
    config: dict
    expect_max_states: Optional[int] = None
    expect_refinement: bool = False
    published: dict = field(default_factory=dict)

    def build(self):
        return config_from_dict(self.config)


def _fixture_config(domain, flow, resolution, k, N, on_escape="error", **syn) -> dict:
    synthesis = {"k_init": k, "N": N}
    synthesis.update(syn)
    return {"dim": len(domain), "domain": domain, "flow": flow, "resolution": resolution,
            "on_escape": on_escape, "synthesis": synthesis}


SQUARE = [[-1.0, 1.0], [-1.0, 1.0]]
STABLE_GENERATOR = [[-7.0, 1.0], [8.0, -10.0]]


def benchmark_fixtures() -> list[BenchmarkFixture]:
    return [
        BenchmarkFixture("linear_multires", _fixture_config(
            SQUARE, LINEAR_ROTATION, {"u": 0.3, "v": 0.5}, 30, 5000),
            published={"states": 30, "seconds": 6}),
        BenchmarkFixture("compactness", _fixture_config(
            SQUARE, discretized_linear(STABLE_GENERATOR, 0.05), {"const": 0.5}, 150, 5000,
            max_states=350),
            expect_max_states=350,
            published={"states": 171, "seconds": 17, "grid_states": 400}),
        BenchmarkFixture("non_incremental_stable", _fixture_config(
            [[-0.5, 3.0], [-0.5, 5.0]], ["0.5*x0", "0.5*x1 + 0.5*x0^2"], {"u": 0.3, "v": 0.5},
            300, 10000, on_escape="exit", max_states=720),
            expect_max_states=720, expect_refinement=True,
            published={"states": 358, "seconds": 90}),
        BenchmarkFixture("nondifferentiable", _fixture_config(
            SQUARE, ["0.8*x0", "piecewise(abs(x1) < 0.5, 3.2*x1^3, 0.8*x1)"],
            {"u": 0.3, "v": 0.5}, 300, 10000, max_states=1500),
            published={"seconds": 56}),
    ]


RESOLUTION_SWEEP = {0.3: (152, 9.6), 0.2: (203, 8.6), 0.1: (1431, 93.4)}


def sweep_fixtures() -> list[BenchmarkFixture]:
    out = []
    for eps, (states, secs) in RESOLUTION_SWEEP.items():
        out.append(BenchmarkFixture(f"sweep_eps{eps}", _fixture_config(
            SQUARE, LINEAR_ROTATION, {"const": eps}, max(30, states // 2), 5000,
            max_states=2 * states),
            expect_max_states=2 * states, published={"states": states, "seconds": secs}))
    return out


def run_fixture(fx: BenchmarkFixture, seed: Optional[int] = None) -> dict:
    system, spec, cfg = fx.build()
    if seed is not None:
        cfg.rng_seed = seed
    t0 = time.perf_counter()
    row = {"name": fx.name, "published": fx.published, "k_init": cfg.k_init}
    try:
        res = synthesize(system, spec, cfg)
    except Exhausted as exc:
        row.update(verdict="exhausted", states=exc.mesh.k if exc.mesh else None,
                   refinements=sum(1 for t in exc.trace if t.get("event") == "refine"))
    else:
        row.update(verdict=res.certificate.kind, states=res.k, refinements=res.high_iterations,
                   worst_ratio=float(np.max(res.assignment.radius / spec.values(res.mesh.anchors))))
    row["time"] = time.perf_counter() - t0
    problems = []
    if row["verdict"] != "verified":
        problems.append("not verified")
    if fx.expect_max_states is not None and (row["states"] or 0) > fx.expect_max_states:
        problems.append(f"{row['states']} states > {fx.expect_max_states}")
    if fx.expect_refinement and not row.get("refinements"):
        problems.append("expected at least one refinement round")
    row["violations"] = problems
    return row


def run_benchmarks(suite: str, seed: Optional[int] = None) -> dict:
    if suite == "examples":
        rows = [check_example(name) for name in EXAMPLES]
        for r in rows:
            r["violations"] = [] if r["verdict"] == "verified" and r["resolution_ok"] else [
                "not verified"]
    elif suite == "benchmarks":
        rows = [run_fixture(fx, seed) for fx in benchmark_fixtures()]
        grid = uniform_grid_baseline(*_grid_system(), epsilon=0.5, eta=np.sqrt(2) / 20,
                                     build_graph=False)
        rows.append({"name": "grid_baseline", "lattice_points": grid.lattice_count,
                     "cells": grid.cell_count, "compared": grid.compared, "violations": []})
    elif suite == "sweep":
        rows = [run_fixture(fx, seed) for fx in sweep_fixtures()]
    else:
        raise ConfigError(f"unknown suite {suite!r}; choose examples, benchmarks or sweep")
    return {"suite": suite, "rows": rows, "passed": all(not r["violations"] for r in rows)}


def _grid_system() -> tuple[SystemModel]:
    system, _, _ = benchmark_fixtures()[1].build()
    return (system,)


def report_markdown(report: dict) -> str:
    rows = report["rows"]
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys and k != "published"]
    lines = [f"# {report['suite']}", "", "| " + " | ".join(keys) + " |",
             "|" + "---|" * len(keys)]
    for r in rows:
        cells = []
        for k in keys:
            v = r.get(k, "")
            cells.append(f"{v:.3g}" if isinstance(v, float) else
                         ("; ".join(v) if isinstance(v, list) else str(v)))
        lines.append("| " + " | ".join(cells) + " |")
    lines += ["", "passed: " + str(report["passed"]).lower(), ""]
    return "\n".join(lines)


# ---------------------------------------------------------------- command line

def _cmd_synthesize(args) -> int:
    system, spec, cfg = load_config(args.config)
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if args.k is not None:
        cfg.k_init = args.k
    if args.n is not None:
        cfg.N = args.n
    if args.refinement is not None:
        cfg.refinement = args.refinement
    SynthesisConfig.__post_init__(cfg)
    try:
        result = synthesize(system, spec, cfg)
    except Exhausted as exc:
        print(f"exhausted: {exc}", file=sys.stderr)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "trace.json").write_text(json.dumps(exc.trace, default=_json_default, indent=1))
        return EXIT_EXHAUSTED
    if args.out:
        write_result(result, args.out, system, cfg)
    print(f"verified: {result.k} states, {result.high_iterations} refinement rounds, "
          f"worst radius/spec ratio "
          f"{np.max(result.assignment.radius / spec.values(result.mesh.anchors)):.3f}")
    return EXIT_VERIFIED


def _cmd_verify(args) -> int:
    loaded = load_result(args.result_dir)
    verdict = reverify(loaded)
    print(f"{verdict.kind}: {loaded.mesh.k} states, {len(loaded.graph.edges())} edges")
    if isinstance(verdict, Counterexample):
        print(f"counterexample on edge {verdict.edge}: {verdict.point.tolist()}")
    elif isinstance(verdict, ResolutionViolation):
        print(f"radius above the resolution at states {verdict.states}")
    return EXIT_VERIFIED if isinstance(verdict, Verified) else EXIT_EXHAUSTED


def _cmd_baseline(args) -> int:
    system, spec, _ = load_config(args.config)
    if not spec.is_constant:
        raise ConfigError("baseline-grid needs a constant resolution")
    grid = uniform_grid_baseline(system, spec.const, args.eta, build_graph=args.verify)
    print(json.dumps({"spacing": grid.spacing, "lattice_points": grid.lattice_count,
                      "cells": grid.cell_count, "compared": grid.compared}))
    if args.verify:
        verdict = verify_relation(grid.graph, grid.mesh, grid.assignment, system)
        print(verdict.kind)
        return EXIT_VERIFIED if isinstance(verdict, Verified) else EXIT_EXHAUSTED
    return EXIT_VERIFIED


def _cmd_bench(args) -> int:
    report = run_benchmarks(args.suite, args.seed)
    text = (json.dumps(report, indent=1, default=_json_default) if args.report == "json"
            else report_markdown(report))
    print(text)
    return EXIT_VERIFIED if report["passed"] else EXIT_EXHAUSTED


def _cmd_export(args) -> int:
    loaded = load_result(args.result_dir)
    status = node_status(loaded.assignment)
    if args.format == "dot":
        text = to_dot(loaded.graph, loaded.assignment.theta, loaded.assignment.radius, status)
    elif args.format == "json":
        text = json.dumps(to_json_adjacency(loaded.graph, status), indent=1)
    else:
        rows = resolution_rows(loaded.mesh, loaded.assignment, loaded.spec)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    sys.stdout.write(text)
    return EXIT_VERIFIED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrbisim",
                                description="Multi-resolution approximate bisimulation synthesis")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="synthesize an abstraction and relation")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--k", type=int, help="initial number of abstract states")
    s.add_argument("--n", type=int, help="number of sampled transitions")
    s.add_argument("--refinement", choices=REFINEMENT_POLICIES)
    s.add_argument("--out", help="result directory")
    s.set_defaults(func=_cmd_synthesize)

    v = sub.add_parser("verify", help="re-verify a result directory")
    v.add_argument("result_dir")
    v.set_defaults(func=_cmd_verify)

    b = sub.add_parser("baseline-grid", help="uniform grid baseline state counts")
    b.add_argument("config")
    b.add_argument("--eta", type=float, required=True)
    b.add_argument("--verify", action="store_true", help="also check the grid relation")
    b.set_defaults(func=_cmd_baseline)

    r = sub.add_parser("bench", help="run a benchmark suite")
    r.add_argument("suite", choices=("examples", "benchmarks", "sweep"))
    r.add_argument("--seed", type=int)
    r.add_argument("--report", choices=("md", "json"), default="md")
    r.set_defaults(func=_cmd_bench)

    e = sub.add_parser("export", help="print a result as DOT, JSON or CSV")
    e.add_argument("result_dir")
    fmt = e.add_mutually_exclusive_group(required=True)
    fmt.add_argument("--dot", dest="format", action="store_const", const="dot")
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")
    e.set_defaults(func=_cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MrbisimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED


if __name__ == "__main__":
    sys.exit(main())
