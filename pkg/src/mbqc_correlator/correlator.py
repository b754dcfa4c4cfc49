"""Two evaluation routes for gate-teleportation correlations, and their bridge.

Route one (`post_measurement_expectation`) runs the plan: every measurement
outcome branch is enumerated with its Born weight, the outcome-dependent
Pauli correction is applied, and the two-qubit observable is averaged over
the corrected ensemble.

Route two (`pre_measurement_expectation` over
`derive_pre_measurement_expression`) never measures anything: the correction
parities are absorbed into the measured observables - for an outcome m of
observable O the projector identity m*P = P*O trades each recorded sign for
an operator insertion - leaving a single outcome-independent operator string
whose plain expectation on the input state equals the route-one average.

`stabilizer_product_form` stores the cluster-generator product shape of each
tabulated correlation; its expansion must reproduce the derived string as
exact Pauli algebra.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dense import (
    ZERO_PROBABILITY,
    BranchEnsemble,
    StateVector,
    as_ensemble,
    expectation as dense_expectation,
    reduced_density,
)
from .lattice import cluster_stabilizer
from .pauli import OperatorExpression, PauliError, PauliString
from .plans import GatePlan, MeasurementStep, PlanError
from .tableau import Tableau


class BackendError(ValueError):
    """Requested backend cannot execute the plan."""


# ---------------------------------------------------------------------------
# route one: enumerate, correct, average
# ---------------------------------------------------------------------------

def _resolve_step(step: MeasurementStep, outcomes: dict[int, int]):
    """Basis and angle for this branch; adaptive angles scale by recorded outcomes."""
    if not step.adaptive:
        return step.basis, None
    eta = step.theta
    for d in step.deps:
        eta *= outcomes[d]
    return "XETA", eta


def _dense_branches(state: StateVector, plan: GatePlan):
    branches = [(1.0, state.copy(), {})]
    for step in plan.steps:
        grown = []
        for weight, psi, outcomes in branches:
            basis, eta = _resolve_step(step, outcomes)
            for prob, post, outcome in psi.measure_branches(step.qubit, basis, eta=eta):
                if prob < ZERO_PROBABILITY:
                    continue
                grown.append((weight * prob, post, {**outcomes, step.qubit: outcome}))
        branches = grown
    return branches


def _tableau_branches(t: Tableau, plan: GatePlan):
    if plan.adaptive:
        raise BackendError("tableau backend cannot run adaptive (rotated-basis) plans")
    branches = [(1.0, t.copy(), {})]
    for step in plan.steps:
        observable = PauliString.single(t.n, step.qubit, step.basis)
        grown = []
        for weight, tab, outcomes in branches:
            fixed = tab.expectation_pauli(observable)
            if fixed != 0:
                grown.append((weight, tab, {**outcomes, step.qubit: fixed}))
                continue
            for forced in (1, -1):
                branch_tab = tab.copy()
                branch_tab.measure_pauli(observable, forced=forced)
                grown.append((weight * 0.5, branch_tab, {**outcomes, step.qubit: forced}))
        branches = grown
    return branches


def corrected_branch_ensemble(rho0, plan: GatePlan):
    """Run the plan on an input state; corrected branches with Born weights.

    Dense inputs give a BranchEnsemble; a Tableau input (non-adaptive plans
    only) gives a list of (weight, Tableau, outcomes) triples.
    """
    if isinstance(rho0, Tableau):
        out = []
        for weight, tab, outcomes in _tableau_branches(rho0, plan):
            tab.apply_pauli(plan.correction_for(outcomes))
            out.append((weight, tab, outcomes))
        return out
    ensemble = as_ensemble(rho0)
    if ensemble.n != plan.graph.n:
        raise PauliError(f"state has {ensemble.n} qubits, plan graph {plan.graph.n}")
    corrected = []
    for base_weight, state in ensemble.branches:
        if base_weight < ZERO_PROBABILITY:
            continue
        for weight, psi, outcomes in _dense_branches(state, plan):
            psi.apply_pauli(plan.correction_for(outcomes))
            corrected.append((base_weight * weight, psi))
    return BranchEnsemble(corrected)


def _check_support(plan: GatePlan, op, qubits: tuple[int, ...], side: str) -> None:
    ps = op.terms() if isinstance(op, OperatorExpression) else [(1.0, op)]
    for _, p in ps:
        if any(q not in qubits for q in p.support):
            raise PlanError(f"{side} operator acts outside the plan's {side} qubits")


def post_measurement_expectation(rho0, plan: GatePlan, a, b) -> float:
    """<A (x) B> on the corrected post-measurement resource state.

    ``a`` acts on the plan's input qubit(s), ``b`` on its output qubit(s);
    both are Pauli strings (or Hermitian expressions) on graph qubits.
    """
    a = OperatorExpression.from_pauli(a) if isinstance(a, PauliString) else a
    b = OperatorExpression.from_pauli(b) if isinstance(b, PauliString) else b
    _check_support(plan, a, plan.inputs, "input")
    _check_support(plan, b, plan.outputs, "output")
    observable = a * b
    branches = corrected_branch_ensemble(rho0, plan)
    if isinstance(branches, BranchEnsemble):
        return dense_expectation(branches, observable)
    total = 0.0
    for weight, tab, _ in branches:
        for coeff, p in observable.terms():
            total += weight * coeff * tab.expectation_pauli(p)
    return total


# ---------------------------------------------------------------------------
# route two: outcome-independent operator strings
# ---------------------------------------------------------------------------

def _absorber(plan: GatePlan, qubit: int) -> OperatorExpression:
    """Operator E with m*P_J = P_J*E for the outcome recorded at ``qubit``.

    Fixed bases absorb as their own observable.  For the adaptive basis with
    angle theta scaled by earlier outcomes, expanding the rotated observable
    and absorbing the scaling outcomes in turn yields
    cos(theta) X + sin(theta) (prod of dependency observables) Y.
    """
    n = plan.graph.n
    step = next(s for s in plan.steps if s.qubit == qubit)
    if not step.adaptive:
        return OperatorExpression.from_pauli(PauliString.single(n, qubit, step.basis))
    dep_product = OperatorExpression.identity(n)
    for d in step.deps:
        dep_product = dep_product * _absorber(plan, d)
    c, s = math.cos(step.theta), math.sin(step.theta)
    x_term = OperatorExpression.from_pauli(PauliString.single(n, qubit, "X"), c)
    y_term = dep_product * OperatorExpression.from_pauli(
        PauliString.single(n, qubit, "Y"), s
    )
    return x_term + y_term


def derive_pre_measurement_expression(rho0_plan: GatePlan, a, b) -> OperatorExpression:
    """Outcome-independent operator string equal to the corrected average.

    Conjugating B through the correction X^{p_x} Z^{p_z} multiplies it by the
    recorded outcomes referenced by each firing parity; each such outcome is
    then traded for its measured observable.  The result A * B * (absorbers)
    never mentions outcomes.
    """
    plan = rho0_plan
    a = OperatorExpression.from_pauli(a) if isinstance(a, PauliString) else a
    b = OperatorExpression.from_pauli(b) if isinstance(b, PauliString) else b
    _check_support(plan, a, plan.inputs, "input")
    _check_support(plan, b, plan.outputs, "output")
    n = plan.graph.n
    result = OperatorExpression(n)
    for coeff_b, pb in b.terms():
        absorbed: set[int] = set()
        sign = 1
        for rule in plan.corrections:
            correction_pauli = PauliString.single(n, rule.qubit, rule.axis)
            if pb.commutes(correction_pauli):
                continue
            absorbed ^= set(rule.parity.qubits)
            sign *= rule.parity.sign
        string = OperatorExpression.from_pauli(pb, coeff_b * sign)
        for q in sorted(absorbed):
            string = string * _absorber(plan, q)
        result = result + string
    return a * result


def pre_measurement_expectation(rho0, expr: OperatorExpression) -> float:
    """Plain expectation of an operator string on the un-measured input."""
    if isinstance(rho0, Tableau):
        total = 0.0
        for coeff, p in expr.terms():
            total += coeff * rho0.expectation_pauli(p)
        return total
    return dense_expectation(rho0, expr)


# ---------------------------------------------------------------------------
# cluster-generator product forms of the tabulated correlations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilizerProductForm:
    """Weighted sum of cluster-generator products, with optional extra factors.

    Each term is (coefficient, generator vertices, extra Pauli or None); the
    expansion multiplies the cluster generator of every listed vertex and the
    extra factor.  For the tabulated correlations the expansion equals the
    mechanically derived operator string exactly.
    """

    graph_n: int
    terms: tuple[tuple[float, tuple[int, ...], PauliString | None], ...]

    def expand(self, graph) -> OperatorExpression:
        out = []
        for coeff, vertices, extra in self.terms:
            p = PauliString.identity(self.graph_n) if extra is None else extra
            for v in vertices:
                p = p * cluster_stabilizer(graph, v)
            if not p.is_hermitian:
                raise PauliError(f"form term expands to non-Hermitian {p}")
            out.append((coeff, p))
        return OperatorExpression(self.graph_n, out)


def stabilizer_product_form(plan: GatePlan, name: str) -> StabilizerProductForm:
    """Tabulated generator-product shape of a named correlation.

    Raises KeyError for untabulated (plan, correlation) pairs; callers fall
    back to the derived operator string.
    """
    n = plan.graph.n
    label = plan.label

    if label.startswith("identity"):
        k, l = plan.params["k"], plan.params["l"]
        if name == "XX":
            return StabilizerProductForm(
                n, ((1.0, tuple(k + 2 * j for j in range(l + 1)), None),)
            )
        if name == "ZZ":
            return StabilizerProductForm(
                n, ((1.0, tuple(k + 2 * j - 1 for j in range(1, l + 1)), None),)
            )
        if name == "YY":
            return StabilizerProductForm(
                n, ((-1.0, tuple(range(k, k + 2 * l + 1)), None),)
            )
    elif label == "hadamard":
        if name == "XZ":
            return StabilizerProductForm(n, ((1.0, (1, 3, 4), None),))
        if name == "ZX":
            return StabilizerProductForm(n, ((1.0, (2, 3, 5), None),))
    elif label == "pi2":
        if name == "ZZ":
            return StabilizerProductForm(n, ((1.0, (2, 4), None),))
        if name == "X(-Y)":
            return StabilizerProductForm(n, ((1.0, (1, 3, 4, 5), None),))
    elif label == "zrot":
        theta = plan.params["theta"]
        c, s = math.cos(theta), math.sin(theta)
        if name == "ZZ":
            return StabilizerProductForm(n, ((1.0, (2, 4), None),))
        if name == "XX_-theta":
            remainder = PauliString.from_sparse("+Z0 Y1 Z2", n)
            return StabilizerProductForm(
                n,
                (
                    (c * c, (1, 3, 5), None),
                    (s * s, (1, 3, 5, 4), None),
                    (c * s, (2, 3, 5), remainder),
                    (-(c * s), (2, 3, 4, 5), remainder),
                ),
            )
    elif label.startswith("diag-identity"):
        g = plan.graph
        size = plan.params["n"]
        if name == "XX":
            verts = tuple(g.vertex_at((i, i)) for i in range(1, size + 1))
            return StabilizerProductForm(n, ((1.0, verts, None),))
        if name == "ZZ":
            verts = tuple(g.vertex_at((i + 1, i)) for i in range(1, size))
            return StabilizerProductForm(n, ((1.0, verts, None),))
    elif label == "csign":
        lab = plan.params["labeling"]
        table = {
            "Xa.XaZb": (lab["a_in"], lab["m3"], lab["a_out"]),
            "Xb.ZaXb": (lab["b_in"], lab["m4"], lab["b_out"]),
            "Za.XbXb": (lab["b_in"], lab["m4"], lab["b_out"]),
            "Za.Za": (lab["m1"], lab["m4"]),
            "Zb.Zb": (lab["m2"], lab["m3"]),
        }
        if name in table:
            return StabilizerProductForm(n, ((1.0, table[name], None),))
    raise KeyError(f"no tabulated stabilizer form for {label}:{name}")


def derived_expression_for_named(plan: GatePlan, name: str) -> OperatorExpression:
    """Derived operator string of a named ideal correlation (by linearity)."""
    for corr_name, a, b, _ in plan.ideal_correlations():
        if corr_name == name:
            result = OperatorExpression(plan.graph.n)
            for ca, pa in a.terms():
                for cb, pb in b.terms():
                    contrib = derive_pre_measurement_expression(plan, pa, pb)
                    result = result + contrib.scaled(ca * cb)
            return result
    raise KeyError(f"plan {plan.label} has no correlation named {name}")


# ---------------------------------------------------------------------------
# resource-state reconstruction and fidelity
# ---------------------------------------------------------------------------

_LOCAL = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _small_matrix(expr: OperatorExpression) -> np.ndarray:
    dim = 1 << expr.n
    out = np.zeros((dim, dim), dtype=complex)
    for coeff, p in expr.terms():
        m = np.array([[1.0 + 0j]])
        for q in range(p.n):  # resource index 0 = most significant axis
            m = np.kron(m, _LOCAL[p.letter_at(q)])
        out += coeff * p.phase.value * m
    return out


def _pauli_letters(k: int):
    if k == 1:
        for letter in "IXYZ":
            yield (letter,)
    else:
        for rest in _pauli_letters(k - 1):
            for letter in "IXYZ":
                yield (letter,) + rest


def resource_tomography(rho0, plan: GatePlan) -> np.ndarray:
    """Reconstruct the corrected resource state from Pauli correlations.

    All 4^k two-sided Pauli expectations (k resource qubits) are evaluated on
    the corrected ensemble and assembled into rho = 2^-k sum <P> P.  The
    matrix index orders resource qubits inputs-first, matching
    `reduced_density(ensemble, plan.resource_qubits)`.
    """
    k = len(plan.resource_qubits)
    branches = corrected_branch_ensemble(rho0, plan)
    dim = 1 << k
    rho = np.zeros((dim, dim), dtype=complex)
    n = plan.graph.n
    n_in = len(plan.inputs)
    for letters in _pauli_letters(k):
        a_sites = [
            (plan.inputs[i], letters[i]) for i in range(n_in) if letters[i] != "I"
        ]
        b_sites = [
            (plan.outputs[i - n_in], letters[i])
            for i in range(n_in, k)
            if letters[i] != "I"
        ]
        a = OperatorExpression.from_pauli(PauliString.from_sites(n, a_sites))
        b = OperatorExpression.from_pauli(PauliString.from_sites(n, b_sites))
        if isinstance(branches, BranchEnsemble):
            val = dense_expectation(branches, a * b)
        else:
            val = sum(
                w * coeff * tab.expectation_pauli(p)
                for w, tab, _ in branches
                for coeff, p in (a * b).terms()
            )
        small = OperatorExpression.from_pauli(
            PauliString.from_sites(k, list(enumerate(letters)))
        )
        rho += val * _small_matrix(small) / dim
    if not np.allclose(rho, rho.conj().T, atol=1e-9):
        raise ValueError("tomographic reconstruction is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9:
        raise ValueError(f"tomographic reconstruction has trace {np.trace(rho)}")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise ValueError("tomographic reconstruction is not positive semidefinite")
    return rho


def ideal_resource_state(plan: GatePlan) -> np.ndarray:
    """Unique joint +1 eigenstate of the plan's ideal stabilizer set.

    Built by applying the projector product prod (1+S_i)/2 to a fixed seed
    vector; if a seed is annihilated the next computational basis state is
    tried, then a uniform superposition.
    """
    k = len(plan.resource_qubits)
    dim = 1 << k
    projector = np.eye(dim, dtype=complex)
    for s in plan.ideal_stabilizers:
        projector = projector @ (np.eye(dim) + _small_matrix(s)) / 2.0
    seeds = [np.eye(dim, dtype=complex)[:, i] for i in range(dim)]
    seeds.append(np.full(dim, 1.0 / math.sqrt(dim), dtype=complex))
    for seed in seeds:
        vec = projector @ seed
        norm = np.linalg.norm(vec)
        if norm > 1e-9:
            return vec / norm
    raise PlanError("ideal stabilizer projector annihilates every seed state")


def gate_fidelity(rho: np.ndarray, plan: GatePlan) -> float:
    """Overlap of a resource density matrix with the plan's ideal state.

    Computed both as <psi|rho|psi> and as the stabilizer-group average
    2^-g sum_S Tr[rho S]; the two must agree to 1e-10.
    """
    psi = ideal_resource_state(plan)
    direct = float(np.real(psi.conj() @ rho @ psi))
    gens = plan.ideal_stabilizers
    total = 0.0
    for mask in range(1 << len(gens)):
        prod = OperatorExpression.identity(gens[0].n if gens else 1)
        for i, s in enumerate(gens):
            if (mask >> i) & 1:
                prod = prod * s
        total += float(np.real(np.trace(rho @ _small_matrix(prod))))
    group_avg = total / (1 << len(gens))
    if abs(direct - group_avg) > 1e-10:
        raise RuntimeError(
            f"fidelity formulas disagree: {direct} vs {group_avg}"
        )
    return direct


def resource_density_oracle(rho0, plan: GatePlan) -> np.ndarray:
    """Partial-trace route to the corrected resource density (dense inputs)."""
    branches = corrected_branch_ensemble(rho0, plan)
    if not isinstance(branches, BranchEnsemble):
        raise BackendError("density oracle needs a dense input state")
    return reduced_density(branches, plan.resource_qubits)
