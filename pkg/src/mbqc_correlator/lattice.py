"""Graphs, cluster-state stabilizers, cluster preparation, and perturbations.

A cluster state on a graph is the joint +1 eigenstate of one generator per
vertex: X on the vertex, Z on each neighbor.  Preparation puts every qubit in
the +1 X eigenstate and applies CZ across each edge; the generator
eigenvalue condition is certified separately by tests rather than assumed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .dense import DEFAULT_QUBIT_CAP, BranchEnsemble, StateVector, as_ensemble
from .pauli import PauliString
from .tableau import Tableau

Coord = tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with optional 2D coordinates per vertex."""

    n: int
    edges: frozenset[tuple[int, int]]
    coords: Mapping[int, Coord] | None = field(default=None)

    @staticmethod
    def from_edges(n: int, edges: Iterable[tuple[int, int]],
                   coords: Mapping[int, Coord] | None = None) -> "Graph":
        if n < 1:
            raise ValueError("graph needs at least one vertex")
        normalized = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) outside vertex range")
            normalized.add((min(u, v), max(u, v)))
        if coords is not None:
            coords = dict(coords)
            if len(coords) != n:
                raise ValueError("coordinate map must cover every vertex")
            if len(set(coords.values())) != n:
                raise ValueError("coordinate map must be injective")
        return Graph(n, frozenset(normalized), coords)

    def neighbors(self, v: int) -> tuple[int, ...]:
        out = []
        for a, b in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return tuple(sorted(out))

    def vertex_at(self, coord: Coord) -> int:
        if self.coords is None:
            raise ValueError("graph carries no coordinates")
        for v, c in self.coords.items():
            if c == tuple(coord):
                return v
        raise KeyError(f"no vertex at coordinate {coord}")

    def has_coord(self, coord: Coord) -> bool:
        return self.coords is not None and tuple(coord) in set(self.coords.values())


def chain(n: int) -> Graph:
    """Path graph 0-1-...-(n-1)."""
    if n < 1:
        raise ValueError("chain needs at least one vertex")
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def square(width: int, height: int) -> Graph:
    """Square lattice with row-major vertices and (row, col) coordinates."""
    if width < 1 or height < 1:
        raise ValueError("square lattice needs positive dimensions")
    coords = {r * width + c: (r, c) for r in range(height) for c in range(width)}
    edges = []
    for r in range(height):
        for c in range(width):
            v = r * width + c
            if c + 1 < width:
                edges.append((v, v + 1))
            if r + 1 < height:
                edges.append((v, v + width))
    return Graph.from_edges(width * height, edges, coords)


def grid_region(cells: Iterable[Coord]) -> Graph:
    """Induced sub-region of the square lattice on the given cells.

    Vertices are numbered in sorted coordinate order; edges join cells at
    Manhattan distance 1.
    """
    cell_list = sorted(set(tuple(c) for c in cells))
    if not cell_list:
        raise ValueError("region needs at least one cell")
    index = {c: i for i, c in enumerate(cell_list)}
    edges = []
    for (r, c) in cell_list:
        for nb in ((r + 1, c), (r, c + 1)):
            if nb in index:
                edges.append((index[(r, c)], index[nb]))
    return Graph.from_edges(len(cell_list), edges, {i: c for c, i in index.items()})


def diagonal_strip(n: int) -> Graph:
    """Minimal lattice region hosting a length-n diagonal identity gate.

    Contains the main diagonal (1,1)..(n,n), the sub-diagonal (i+1,i) for
    1 <= i <= n-1, and the six end cells (0,1),(1,0),(2,0),(n,n+1),(n+1,n),
    (n+1,n-1).  2n+5 vertices in total.
    """
    if n < 2:
        raise ValueError("diagonal needs length >= 2")
    cells = [(i, i) for i in range(1, n + 1)]
    cells += [(i + 1, i) for i in range(1, n)]
    cells += [(0, 1), (1, 0), (2, 0), (n, n + 1), (n + 1, n), (n + 1, n - 1)]
    return grid_region(cells)


def cluster_stabilizer(g: Graph, a: int) -> PauliString:
    """X on vertex a, Z on each of its neighbors, phase +1."""
    if not 0 <= a < g.n:
        raise ValueError(f"vertex {a} out of range")
    sites = [(a, "X")] + [(b, "Z") for b in g.neighbors(a)]
    return PauliString.from_sites(g.n, sites)


def build_cluster(g: Graph, backend: str = "dense", *,
                  max_qubits: int = DEFAULT_QUBIT_CAP):
    """Prepare the cluster state of the graph on the requested backend."""
    if backend == "dense":
        state = StateVector.plus(g.n, max_qubits=max_qubits)
        for u, v in sorted(g.edges):
            state.apply_gate("CZ", u, v)
        return state
    if backend == "tableau":
        t = Tableau(g.n)
        for q in range(g.n):
            t.apply_clifford("H", q)
        for u, v in sorted(g.edges):
            t.apply_clifford("CZ", u, v)
        return t
    raise ValueError(f"unknown backend {backend!r}")


def perturb(state, model: str, *, beta: float | None = None, p: float | None = None,
            qubits: Iterable[int] | None = None):
    """Apply a parametrized perturbation to every qubit (or a subset).

    Models: ``local_z_rotation(beta)``, ``local_x_rotation(beta)``, and
    ``depolarizing(p)`` which expands a state into the standard four-branch
    Pauli-kick ensemble per qubit.
    """
    ensemble = as_ensemble(state)
    targets = list(qubits) if qubits is not None else list(range(ensemble.n))
    for q in targets:
        if not 0 <= q < ensemble.n:
            raise ValueError(f"qubit {q} out of range")

    if model in ("local_z_rotation", "local_x_rotation"):
        if beta is None:
            raise ValueError(f"{model} needs beta")
        axis = "Z" if model == "local_z_rotation" else "X"

        def rotate(s: StateVector) -> StateVector:
            for q in targets:
                if axis == "Z":
                    s.apply_gate("UZ", q, theta=beta)
                else:
                    # X rotation via H Uz(beta) H
                    s.apply_gate("H", q).apply_gate("UZ", q, theta=beta).apply_gate("H", q)
            return s

        out = ensemble.map_states(rotate)
        if isinstance(state, StateVector):
            return out.branches[0][1]
        return out

    if model == "depolarizing":
        if p is None:
            raise ValueError("depolarizing needs p")
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"depolarizing strength {p} outside [0, 1]")
        branches = [(w, s) for w, s in ensemble.branches]
        if p == 0.0:
            return state
        weights = (1.0 - 3.0 * p / 4.0, p / 4.0, p / 4.0, p / 4.0)
        for q in targets:
            new_branches = []
            for w, s in branches:
                for kick_weight, letter in zip(weights, ("I", "X", "Y", "Z")):
                    if kick_weight == 0.0:
                        continue
                    kicked = s.copy()
                    if letter != "I":
                        kicked.apply_pauli(PauliString.single(ensemble.n, q, letter))
                    new_branches.append((w * kick_weight, kicked))
            branches = new_branches
        return BranchEnsemble(branches)

    raise ValueError(f"unknown perturbation model {model!r}")


def random_perturbed_cluster(g: Graph, rng: np.random.Generator, *,
                             beta_range: tuple[float, float] = (0.0, 0.6),
                             with_x: bool = False) -> StateVector:
    """Cluster state with uniform local Z (optionally plus X) rotations."""
    state = build_cluster(g, "dense")
    beta = float(rng.uniform(*beta_range))
    state = perturb(state, "local_z_rotation", beta=beta)
    if with_x:
        beta_x = float(rng.uniform(*beta_range))
        state = perturb(state, "local_x_rotation", beta=beta_x)
    return state
