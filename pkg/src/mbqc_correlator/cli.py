"""Batch experiment runner.

Subcommands:

* ``verify``        - run the post-vs-pre equivalence and ideal-value suite
* ``sweep``         - parameter sweep producing CSV + JSON sidecar
* ``csign-search``  - constraint search for two-qubit gate geometries
* ``tomography``    - reconstruct and store resource density matrices

Configs are JSON (schema in the README).  All randomness flows from the
single config seed and results are byte-reproducible: identical config and
seed give identical output files.

Exit codes: 0 success, 1 check failure, 2 config error, 3 resource limit.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .correlator import (
    derive_pre_measurement_expression,
    gate_fidelity,
    post_measurement_expectation,
    pre_measurement_expectation,
    resource_tomography,
)
from .dense import expectation
from .lattice import Graph, build_cluster, chain, perturb, square
from .pauli import OperatorExpression, PauliString
from .plans import (
    CSIGN_LABELS,
    GatePlan,
    PlanError,
    csign_plan,
    diagonal_identity_plan,
    hadamard_plan,
    identity_plan,
    pi2_plan,
    validate_csign_geometry,
    zrot_plan,
)
from .lattice import diagonal_strip, grid_region

SCHEMA_TAG = "mbqc-correlator v1"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

PAPER_SUITE = {
    "seed": 20090417,
    "backend": "dense",
    "graph": {"builtin": "chain", "n": 7},
    "plans": [
        {"gate": "identity", "params": {"k": 1, "l": 2}},
        {"gate": "hadamard", "params": {}},
        {"gate": "pi2", "params": {}},
        {"gate": "zrot", "params": {"theta": 0.3}},
        {"gate": "zrot", "params": {"theta": 0.7}},
        {"gate": "zrot", "params": {"theta": 1.1}},
        {"gate": "diag2d", "params": {"n": 3}},
        {"gate": "csign", "params": {}},
    ],
    "perturbation": None,
    "equivalence_samples": 3,
}


def load_config(path_or_name: str) -> dict:
    if path_or_name == "paper-suite":
        return json.loads(json.dumps(PAPER_SUITE))
    path = Path(path_or_name)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}: {exc.msg}") from None


def build_graph(spec) -> Graph:
    if not isinstance(spec, dict):
        raise ConfigError("graph spec must be an object")
    if "builtin" in spec:
        kind = spec["builtin"]
        if kind == "chain":
            n = spec.get("n")
            if not isinstance(n, int) or n < 1:
                raise ConfigError(f"field graph.n: chain length must be a positive integer, got {n!r}")
            return chain(n)
        if kind == "square":
            w, h = spec.get("w"), spec.get("h")
            if not all(isinstance(v, int) and v >= 1 for v in (w, h)):
                raise ConfigError("field graph.w/h: square lattice needs positive integers")
            return square(w, h)
        if kind == "diagonal-strip":
            n = spec.get("n")
            if not isinstance(n, int) or n < 2:
                raise ConfigError("field graph.n: strip length must be >= 2")
            return diagonal_strip(n)
        raise ConfigError(f"unknown builtin graph {kind!r}")
    try:
        coords = spec.get("coords")
        if coords is not None:
            coords = {int(k): tuple(v) for k, v in coords.items()}
        return Graph.from_edges(spec["n"], [tuple(e) for e in spec["edges"]], coords)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad graph literal: {exc}") from None


def build_plan(spec, default_graph: Graph | None) -> GatePlan:
    gate = spec.get("gate")
    params = spec.get("params", {})
    try:
        if gate == "identity":
            g = default_graph if default_graph is not None else chain(2 * params.get("l", 1) + 3)
            return identity_plan(g, params.get("k", 1), params.get("l", 1))
        if gate == "hadamard":
            return hadamard_plan(default_graph if default_graph is not None else chain(7))
        if gate == "pi2":
            return pi2_plan(default_graph if default_graph is not None else chain(7))
        if gate == "zrot":
            if "theta" not in params:
                raise ConfigError("zrot plan needs params.theta")
            return zrot_plan(default_graph if default_graph is not None else chain(7), params["theta"])
        if gate == "diag2d":
            n = params.get("n", 3)
            g = default_graph if default_graph is not None and default_graph.coords else diagonal_strip(n)
            return diagonal_identity_plan(g, n)
        if gate == "csign":
            return csign_plan()
    except PlanError as exc:
        raise ConfigError(f"plan {gate}: {exc}") from None
    raise ConfigError(f"unknown gate {gate!r}")


def apply_perturbation(state, spec):
    if spec in (None, {}):
        return state
    model = spec.get("model")
    try:
        if model in ("local_z_rotation", "local_x_rotation"):
            return perturb(state, model, beta=spec["beta"])
        if model == "depolarizing":
            return perturb(state, model, p=spec["p"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad perturbation spec: {exc}") from None
    raise ConfigError(f"unknown perturbation model {model!r}")


def _fmt(x: float) -> str:
    return f"{x:.12e}"


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _plan_backends(plan: GatePlan, requested: str):
    if plan.adaptive:
        return ["dense"]
    if requested == "both":
        return ["dense", "tableau"]
    return [requested]


def run_verify(config: dict, out_dir: Path) -> int:
    seed = int(config.get("seed", 0))
    backend = config.get("backend", "dense")
    if backend not in ("dense", "tableau", "both"):
        raise ConfigError(f"unknown backend {backend!r}")
    rng = np.random.default_rng(seed)
    checks = []
    failures = 0

    plan_specs = config.get("plans", [])
    if not plan_specs:
        raise ConfigError("verify needs at least one plan")
    graph_spec = config.get("graph")
    for spec in plan_specs:
        gate = spec.get("gate")
        default_graph = None
        if graph_spec and gate in ("identity", "hadamard", "pi2", "zrot"):
            default_graph = build_graph(graph_spec)
        plan = build_plan(spec, default_graph)

        # ideal-value checks on the cluster state
        for backend_name in _plan_backends(plan, backend):
            rho0 = build_cluster(plan.graph, backend_name)
            rho0 = apply_perturbation(rho0, config.get("perturbation")) \
                if backend_name == "dense" else rho0
            on_cluster = config.get("perturbation") in (None, {})
            for name, a, b, want in plan.ideal_correlations():
                got = post_measurement_expectation(rho0, plan, a, b)
                ok = (abs(got - want) <= 1e-10) if on_cluster else True
                failures += 0 if ok else 1
                checks.append(
                    {
                        "plan": plan.label,
                        "backend": backend_name,
                        "check": f"ideal:{name}",
                        "value": got,
                        "expected": want if on_cluster else None,
                        "pass": ok,
                    }
                )

        # post-vs-pre equivalence on random perturbed inputs
        samples = int(config.get("equivalence_samples", 3))
        for sample in range(samples):
            beta = float(rng.uniform(0.0, 0.6))
            rho0 = perturb(build_cluster(plan.graph, "dense"), "local_z_rotation", beta=beta)
            for la, lb, a, b in _letter_pairs(plan):
                post = post_measurement_expectation(rho0, plan, a, b)
                pre = pre_measurement_expectation(
                    rho0, derive_pre_measurement_expression(plan, a, b)
                )
                delta = abs(post - pre)
                ok = delta <= 1e-9
                failures += 0 if ok else 1
                checks.append(
                    {
                        "plan": plan.label,
                        "backend": "dense",
                        "check": f"equivalence:{la}{lb}:sample{sample}",
                        "post": post,
                        "pre": pre,
                        "delta": delta,
                        "pass": ok,
                    }
                )

    report = {
        "schema": SCHEMA_TAG,
        "seed": seed,
        "total": len(checks),
        "failures": failures,
        "checks": checks,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "verify_report.json"
    path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(f"verify: {len(checks)} checks, {failures} failures -> {path}")
    return EXIT_OK if failures == 0 else EXIT_CHECK_FAILED


def _letter_pairs(plan: GatePlan):
    n = plan.graph.n
    letters = "IXYZ"
    if len(plan.inputs) == 1:
        combos_in = [((plan.inputs[0], l),) if l != "I" else () for l in letters]
        names_in = list(letters)
    else:
        combos_in, names_in = _two_site_combos(plan.inputs)
    if len(plan.outputs) == 1:
        combos_out = [((plan.outputs[0], l),) if l != "I" else () for l in letters]
        names_out = list(letters)
    else:
        combos_out, names_out = _two_site_combos(plan.outputs)
    for sites_a, name_a in zip(combos_in, names_in):
        for sites_b, name_b in zip(combos_out, names_out):
            a = OperatorExpression.from_pauli(PauliString.from_sites(n, list(sites_a)))
            b = OperatorExpression.from_pauli(PauliString.from_sites(n, list(sites_b)))
            yield name_a, name_b, a, b


def _two_site_combos(qubits):
    letters = "IXYZ"
    combos, names = [], []
    for la, lb in itertools.product(letters, repeat=2):
        sites = tuple(
            (q, l) for q, l in zip(qubits, (la, lb)) if l != "I"
        )
        combos.append(sites)
        names.append(la + lb)
    return combos, names


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_points(spec) -> list[float]:
    try:
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"sweep needs start/stop/step: {exc}") from None
    if step <= 0:
        raise ConfigError("sweep step must be positive")
    if stop < start:
        raise ConfigError("sweep range is empty")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _sweep_row(config, parameter, value):
    plan_specs = config.get("plans", [])
    if len(plan_specs) != 1:
        raise ConfigError("sweep drives exactly one plan")
    spec = json.loads(json.dumps(plan_specs[0]))
    perturbation = config.get("perturbation")
    if parameter == "theta":
        if spec["gate"] != "zrot":
            raise ConfigError("theta sweep needs a zrot plan")
        spec.setdefault("params", {})["theta"] = value
    elif parameter in ("beta", "p"):
        perturbation = dict(perturbation or {})
        if not perturbation.get("model"):
            perturbation["model"] = (
                "local_z_rotation" if parameter == "beta" else "depolarizing"
            )
        perturbation[parameter] = value
    else:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")

    graph_spec = config.get("graph")
    default_graph = build_graph(graph_spec) if graph_spec and spec["gate"] in (
        "identity", "hadamard", "pi2", "zrot") else None
    plan = build_plan(spec, default_graph)
    rho0 = apply_perturbation(build_cluster(plan.graph, "dense"), perturbation)
    correlations = []
    for name, a, b, _ in plan.ideal_correlations():
        correlations.append((name, post_measurement_expectation(rho0, plan, a, b)))
    fidelity = gate_fidelity(resource_tomography(rho0, plan), plan)
    return correlations, fidelity


def run_sweep(config: dict, out_dir: Path, jobs: int = 1) -> int:
    sweep = config.get("sweep")
    if not sweep:
        raise ConfigError("config has no sweep section")
    parameter = sweep.get("parameter")
    points = _sweep_points(sweep)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda v: _sweep_row(config, parameter, v), points))
    else:
        rows = [_sweep_row(config, parameter, v) for v in points]

    names = [name for name, _ in rows[0][0]]
    header = [parameter] + [f"corr_{name}" for name in names] + ["fidelity"]
    lines = [f"# {SCHEMA_TAG}", ",".join(header)]
    for value, (correlations, fidelity) in zip(points, rows):
        cells = [_fmt(value)] + [_fmt(v) for _, v in correlations] + [_fmt(fidelity)]
        lines.append(",".join(cells))
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    sidecar = {
        "schema": SCHEMA_TAG,
        "seed": int(config.get("seed", 0)),
        "config": config,
        "points": len(points),
    }
    (out_dir / "sweep.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    print(f"sweep: {len(points)} points -> {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# geometry search
# ---------------------------------------------------------------------------

def _adjacent(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def _core_labelings(cells, m1, m2, m3, m4):
    """Terminal placements for a fixed measured-qubit core, locally pruned.

    Necessary conditions from the four product identities: each a-terminal is
    adjacent to exactly one of m1/m4 (so a Z factor survives in their product),
    each b-terminal to exactly one of m2/m3, and same-wire terminals are not
    adjacent to each other (an edge would put a Y on an unmeasured qubit).
    """
    used = {m1, m2, m3, m4}
    a_opts = [c for c in cells if c not in used
              and _adjacent(c, m1) != _adjacent(c, m4)]
    b_opts = [c for c in cells if c not in used
              and _adjacent(c, m2) != _adjacent(c, m3)]
    for a_in in a_opts:
        for a_out in a_opts:
            if a_out == a_in or _adjacent(a_in, a_out):
                continue
            for b_in in b_opts:
                if b_in in (a_in, a_out):
                    continue
                for b_out in b_opts:
                    if b_out in (b_in, a_in, a_out) or _adjacent(b_in, b_out):
                        continue
                    yield {
                        "a_in": a_in, "b_in": b_in,
                        "a_out": a_out, "b_out": b_out,
                        "m1": m1, "m2": m2, "m3": m3, "m4": m4,
                    }


def _candidate_regions(window: int, budget: int):
    """Labeled 8-cell placements on a window x window lattice patch.

    X factors on a measured qubit may survive the products but Z factors may
    not, so m1 cannot neighbor m4 and m2 cannot neighbor m3.  Plaquette cores
    (m1, m2, m4, m3 around a unit square) satisfy every zero-boundary parity
    constraint and are enumerated first; the general placement pass follows.
    """
    if budget < 8:
        return
    cells = [(r, c) for r in range(window) for c in range(window)]
    seen: set[tuple] = set()

    def emit(m1, m2, m3, m4):
        for layout in _core_labelings(cells, m1, m2, m3, m4):
            key = tuple(sorted(layout.items()))
            if key not in seen:
                seen.add(key)
                yield layout

    # phase 1: unit-square cores, m1/m4 and m2/m3 on opposite corners
    for r in range(window - 1):
        for c in range(window - 1):
            corners = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
            for m1, m4 in [(corners[0], corners[3]), (corners[1], corners[2])]:
                m2, m3 = [x for x in corners if x not in (m1, m4)]
                yield from emit(m1, m2, m3, m4)
                yield from emit(m1, m3, m2, m4)

    # phase 2: general cores
    for m1 in cells:
        for m2 in cells:
            if m2 == m1:
                continue
            for m3 in cells:
                if m3 in (m1, m2) or _adjacent(m2, m3):
                    continue
                for m4 in cells:
                    if m4 in (m1, m2, m3) or _adjacent(m1, m4):
                        continue
                    yield from emit(m1, m2, m3, m4)


def run_csign_search(config: dict, out_dir: Path) -> int:
    budget = int(config.get("budget", 13))
    window = int(config.get("window", 4))
    cap = int(config.get("max_candidates", 200_000))
    if budget < 8:
        print(f"csign-search: budget {budget} cannot hold the 8 required qubits")
        return EXIT_CHECK_FAILED
    best = None
    tried = 0
    for layout in _candidate_regions(window, budget):
        if tried >= cap:
            print(f"csign-search: candidate cap {cap} reached without a pass")
            return EXIT_RESOURCE
        tried += 1
        g = grid_region(layout.values())
        labeling = {k: g.vertex_at(c) for k, c in layout.items()}
        result = validate_csign_geometry(g, labeling)
        if result.ok:
            out_dir.mkdir(parents=True, exist_ok=True)
            artifact = {
                "schema": SCHEMA_TAG,
                "cells": {k: list(v) for k, v in layout.items()},
                "variant": result.variant,
                "outcome_sets": [list(s) for s in result.outcome_sets],
                "candidates_tried": tried,
            }
            transcript = _geometry_transcript(g, labeling, result)
            (out_dir / "csign_geometry.json").write_text(
                json.dumps(artifact, indent=1, sort_keys=True) + "\n"
            )
            (out_dir / "csign_transcript.txt").write_text(transcript)
            print(f"csign-search: found geometry after {tried} candidates -> "
                  f"{out_dir / 'csign_geometry.json'} (variant {result.variant})")
            return EXIT_OK
        if best is None:
            best = result.reason
    print(f"csign-search: exhausted {tried} candidates; closest miss: {best}")
    return EXIT_CHECK_FAILED


def _geometry_transcript(g, labeling, result) -> str:
    from .lattice import cluster_stabilizer
    from .plans import _csign_identities

    lines = [f"validated variant: {result.variant}", ""]
    for (k_vertices, target), outcome_set in zip(
        _csign_identities(labeling, result.variant), result.outcome_sets
    ):
        prod = PauliString.identity(g.n)
        for kv in k_vertices:
            prod = prod * cluster_stabilizer(g, kv)
        lines.append(f"product over generators at {list(k_vertices)}:")
        lines.append(f"  {prod.to_sparse_label()}")
        lines.append(f"  target sites {sorted(target.items())}")
        lines.append(f"  measured factors absorbed at {list(outcome_set)}")
        lines.append("")
    return "\n".join(lines)


def run_validate_geometry(config: dict) -> int:
    """Re-validate a pinned geometry artifact."""
    cells = config.get("cells")
    if not cells:
        raise ConfigError("geometry validation needs a cells map")
    layout = {k: tuple(v) for k, v in cells.items()}
    missing = [k for k in CSIGN_LABELS if k not in layout]
    if missing:
        raise ConfigError(f"geometry cells missing labels {missing}")
    g = grid_region(layout.values())
    labeling = {k: g.vertex_at(c) for k, c in layout.items()}
    result = validate_csign_geometry(g, labeling)
    if result.ok:
        print(f"geometry validates (variant {result.variant})")
        return EXIT_OK
    print(f"geometry fails: {result.reason}")
    return EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------

def run_tomography(config: dict, out_dir: Path) -> int:
    plan_specs = config.get("plans", [])
    if not plan_specs:
        raise ConfigError("tomography needs at least one plan")
    graph_spec = config.get("graph")
    results = []
    for spec in plan_specs:
        default_graph = build_graph(graph_spec) if graph_spec and spec.get("gate") in (
            "identity", "hadamard", "pi2", "zrot") else None
        plan = build_plan(spec, default_graph)
        rho0 = apply_perturbation(
            build_cluster(plan.graph, "dense"), config.get("perturbation")
        )
        rho = resource_tomography(rho0, plan)
        results.append(
            {
                "plan": plan.label,
                "fidelity": gate_fidelity(rho, plan),
                "density_real": [[float(x.real) for x in row] for row in rho],
                "density_imag": [[float(x.imag) for x in row] for row in rho],
            }
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "tomography.json"
    path.write_text(json.dumps(
        {"schema": SCHEMA_TAG, "results": results}, indent=1, sort_keys=True
    ) + "\n")
    print(f"tomography: {len(results)} plans -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mbqc-correlator",
        description="measurement-based gate correlation experiments",
    )
    parser.add_argument("command", choices=["verify", "sweep", "csign-search", "tomography"])
    parser.add_argument("--config", default="paper-suite",
                        help="config JSON path, or 'paper-suite' for the builtin suite")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--backend", default=None, choices=["dense", "tableau", "both"])
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1, help="sweep worker threads")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        if args.backend is not None:
            config["backend"] = args.backend
        out_dir = Path(args.out)
        if args.command == "verify":
            return run_verify(config, out_dir)
        if args.command == "sweep":
            return run_sweep(config, out_dir, jobs=args.jobs)
        if args.command == "csign-search":
            if "cells" in config:
                return run_validate_geometry(config)
            return run_csign_search(config, out_dir)
        if args.command == "tomography":
            return run_tomography(config, out_dir)
        raise ConfigError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MemoryError:
        print("resource limit: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:
        if "exceeds the dense cap" in str(exc):
            print(f"resource limit: {exc}", file=sys.stderr)
            return EXIT_RESOURCE
        raise


if __name__ == "__main__":
    sys.exit(main())
