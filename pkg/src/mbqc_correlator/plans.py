"""Declarative measurement plans for gate teleportation on cluster states.

A :class:`GatePlan` bundles everything a correlator needs to execute and
analyze one gate: the graph, the ordered single-qubit measurement steps
(fixed X/Y/Z bases or the adaptive rotated basis X_eta), outcome-parity
formulas selecting the Pauli correction on each output qubit, and the
two-qubit (or four-qubit) stabilizer pair of the ideal resource state.

Outcome labels are the measured qubit ids; a parity evaluates to
``[1 - sign * prod_q m_q] / 2`` over the recorded +-1 outcomes.

The chain plans (identity, hadamard, pi2, zrot) sit on a path graph with a
Z-measured terminator one site beyond each end.  Their correction parities
are hard-coded closed forms; an independent byproduct-propagation calculus
(`derive_chain_parities`) re-derives them mechanically and also powers
:func:`concatenate`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .lattice import Graph, chain, cluster_stabilizer, diagonal_strip, grid_region
from .pauli import OperatorExpression, PauliString


class PlanError(ValueError):
    """Malformed plan construction or unsupported plan combination."""


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementStep:
    """One single-qubit measurement: fixed basis X/Y/Z, or XETA with angle
    theta scaled by the product of previously recorded outcomes at ``deps``."""

    qubit: int
    basis: str
    theta: float = 0.0
    deps: tuple[int, ...] = ()

    def __post_init__(self):
        if self.basis not in ("X", "Y", "Z", "XETA"):
            raise PlanError(f"unknown basis {self.basis!r}")
        if self.basis != "XETA" and self.deps:
            raise PlanError("only XETA steps may carry dependencies")

    @property
    def adaptive(self) -> bool:
        return self.basis == "XETA"


@dataclass(frozen=True)
class ParityFormula:
    """p = [1 - sign * prod of outcomes at ``qubits``] / 2, in {0, 1}."""

    qubits: tuple[int, ...]
    sign: int = 1

    def evaluate(self, outcomes: Mapping[int, int]) -> int:
        prod = self.sign
        for q in self.qubits:
            try:
                prod *= outcomes[q]
            except KeyError:
                raise PlanError(f"outcome for qubit {q} missing") from None
        return (1 - prod) // 2


@dataclass(frozen=True)
class CorrectionRule:
    """Apply ``axis`` (X or Z) on ``qubit`` when the parity evaluates to 1."""

    qubit: int
    axis: str
    parity: ParityFormula


@dataclass(frozen=True)
class ChainLayout:
    """Bookkeeping for plans living on a path graph."""

    left_end: int
    input: int
    interior: tuple[int, ...]
    output: int
    right_end: int


@dataclass(frozen=True)
class GatePlan:
    label: str
    graph: Graph
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    steps: tuple[MeasurementStep, ...]
    corrections: tuple[CorrectionRule, ...]
    ideal_stabilizers: tuple[OperatorExpression, ...]
    chain_layout: ChainLayout | None = None
    params: dict = field(default_factory=dict)

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        return tuple(s.qubit for s in self.steps)

    @property
    def resource_qubits(self) -> tuple[int, ...]:
        """Unmeasured qubits carrying the resource state, inputs first."""
        return self.inputs + self.outputs

    @property
    def adaptive(self) -> bool:
        return any(s.adaptive for s in self.steps)

    def validate(self) -> None:
        g = self.graph
        measured = list(self.measured_qubits)
        if len(set(measured)) != len(measured):
            raise PlanError("a qubit is measured twice")
        for q in measured + list(self.resource_qubits):
            if not 0 <= q < g.n:
                raise PlanError(f"plan qubit {q} not in graph")
        overlap = set(measured) & set(self.resource_qubits)
        if overlap:
            raise PlanError(f"resource qubits {overlap} are measured by the plan")
        seen: set[int] = set()
        for s in self.steps:
            if s.adaptive and not set(s.deps) <= seen:
                raise PlanError(f"step on {s.qubit} depends on later outcomes")
            seen.add(s.qubit)
        for c in self.corrections:
            if c.qubit not in self.resource_qubits:
                raise PlanError("correction targets a non-resource qubit")
            if c.axis not in ("X", "Z"):
                raise PlanError(f"bad correction axis {c.axis!r}")
            if not set(c.parity.qubits) <= set(measured):
                raise PlanError("parity references unmeasured qubits")
        k = len(self.resource_qubits)
        for s in self.ideal_stabilizers:
            if s.n != k:
                raise PlanError("ideal stabilizer on wrong qubit count")
        for i, a in enumerate(self.ideal_stabilizers):
            for b in self.ideal_stabilizers[i + 1:]:
                if not a.commutes_with(b):
                    raise PlanError("ideal stabilizers do not commute")
        self._check_stabilizer_independence()

    def _check_stabilizer_independence(self) -> None:
        # every nonempty product of distinct generators must be traceless,
        # which pins the joint +1 eigenspace to a single state
        gens = self.ideal_stabilizers
        for mask in range(1, 1 << len(gens)):
            prod = OperatorExpression.identity(gens[0].n)
            for i, s in enumerate(gens):
                if (mask >> i) & 1:
                    prod = prod * s
            if prod.identity_coefficient() != 0.0:
                raise PlanError("ideal stabilizers are not independent")

    def correction_for(self, outcomes: Mapping[int, int]) -> PauliString:
        """Evaluate all parities on an outcome record; product Pauli on outputs."""
        missing = set(self.measured_qubits) - set(outcomes)
        if missing:
            raise PlanError(f"outcome record missing qubits {sorted(missing)}")
        extra = set(outcomes) - set(self.measured_qubits)
        if extra:
            raise PlanError(f"outcome record covers unmeasured qubits {sorted(extra)}")
        op = PauliString.identity(self.graph.n)
        for rule in self.corrections:
            if rule.parity.evaluate(outcomes):
                op = op * PauliString.single(self.graph.n, rule.qubit, rule.axis)
        return op

    def embed_resource_operator(self, expr: OperatorExpression) -> OperatorExpression:
        """Lift an operator on the (inputs+outputs) ordering to graph qubits."""
        if expr.n != len(self.resource_qubits):
            raise PlanError("operator size does not match resource qubits")
        out_terms = []
        for coeff, p in expr.terms():
            sites = [
                (self.resource_qubits[i], p.letter_at(i))
                for i in range(p.n)
                if p.letter_at(i) != "I"
            ]
            out_terms.append((coeff, PauliString.from_sites(self.graph.n, sites)))
        return OperatorExpression(self.graph.n, out_terms)

    def ideal_correlations(self) -> list[tuple[str, OperatorExpression, OperatorExpression, float]]:
        """Named target correlations of the ideal resource state.

        Returns (name, A on inputs, B on outputs, expected value) with A and B
        embedded on graph qubits.
        """
        return list(self.params.get("_ideal_correlations", ()))


def correction_for(plan: GatePlan, outcomes: Mapping[int, int]) -> PauliString:
    return plan.correction_for(outcomes)


# ---------------------------------------------------------------------------
# byproduct-propagation calculus for chain plans
# ---------------------------------------------------------------------------

def _require_chain(plan_or_layout, graph: Graph) -> None:
    layout = plan_or_layout
    seq = [layout.left_end, layout.input, *layout.interior, layout.output, layout.right_end]
    for a, b in zip(seq, seq[1:]):
        if (min(a, b), max(a, b)) not in graph.edges:
            raise PlanError("chain layout does not follow graph edges")


def derive_chain_parities(steps: Sequence[MeasurementStep], layout: ChainLayout,
                          *, fix_deps: bool = False):
    """Re-derive correction parities by pushing measurement byproducts along
    the wire.

    Walks the interior steps left to right, tracking which recorded outcomes
    feed the X and Z byproduct exponents on the output.  Fixed bases advance
    the tracker through their basis rotation; an XETA step is consistent only
    if its declared dependencies equal the X byproduct entering it (that is
    what makes the net rotation angle outcome-independent).  With
    ``fix_deps`` the dependencies are rewritten instead of checked, which is
    how concatenation recomputes feedforward across a join.

    Returns (p_x, p_z, steps) with parity formulas for the output correction.
    """
    by_qubit = {s.qubit: s for s in steps}
    acc_x: set[int] = set()
    acc_z: set[int] = {layout.left_end}
    acc_x, acc_z = acc_z, acc_x  # entangling link between input and first site
    new_steps = list(steps)
    for q in layout.interior:
        step = by_qubit[q]
        if step.basis == "Y":
            acc_z ^= acc_x
        elif step.basis == "XETA":
            if fix_deps:
                fixed = replace(step, deps=tuple(sorted(acc_x)))
                new_steps[new_steps.index(step)] = fixed
            elif set(step.deps) != acc_x:
                raise PlanError(
                    f"adaptive step on {q} must depend on outcomes {sorted(acc_x)}"
                )
        elif step.basis != "X":
            raise PlanError(f"basis {step.basis} cannot sit on a wire interior")
        acc_x, acc_z = acc_z, acc_x  # teleport step
        acc_x ^= {q}
    acc_z ^= {layout.right_end}
    p_x = ParityFormula(tuple(sorted(acc_x)))
    p_z = ParityFormula(tuple(sorted(acc_z)))
    return p_x, p_z, tuple(new_steps)


def _wire_tokens(steps: Sequence[MeasurementStep], layout: ChainLayout) -> list:
    """Single-qubit gate tokens of the wire unitary, in application order."""
    tokens: list = ["H"]
    by_qubit = {s.qubit: s for s in steps}
    for q in layout.interior:
        step = by_qubit[q]
        if step.basis == "Y":
            tokens.append("SDG")
        elif step.basis == "XETA":
            tokens.append(("UZ", -step.theta))
        tokens.append("H")
    return tokens


def _conjugate_letter_through(letter: str, tokens: Iterable) -> OperatorExpression:
    expr = OperatorExpression.from_pauli(PauliString.single(1, 0, letter))
    for tok in tokens:
        if tok == "H":
            expr = OperatorExpression(1, [(c, p.conjugated("H", 0)) for c, p in expr.terms()])
        elif tok == "SDG":
            expr = OperatorExpression(
                1,
                [(c, p.conjugated("S", 0).conjugated("S", 0).conjugated("S", 0))
                 for c, p in expr.terms()],
            )
        elif isinstance(tok, tuple) and tok[0] == "UZ":
            phi = tok[1]
            c_, s_ = math.cos(phi), math.sin(phi)
            x = PauliString.single(1, 0, "X")
            y = PauliString.single(1, 0, "Y")
            out = []
            for coeff, p in expr.terms():
                letter_p = p.letter_at(0)
                sign = p.sign
                if letter_p == "X":
                    out += [(coeff * sign * c_, x), (coeff * sign * s_, y)]
                elif letter_p == "Y":
                    out += [(coeff * sign * c_, y), (-coeff * sign * s_, x)]
                else:
                    out.append((coeff, p))
            expr = OperatorExpression(1, out)
        else:
            raise PlanError(f"unknown wire token {tok!r}")
    return expr


def _pair_expr(a_letter: str, b_expr: OperatorExpression) -> OperatorExpression:
    """Two-qubit expression A (x) B on the (input, output) ordering."""
    out = []
    for coeff, p in b_expr.terms():
        sites = []
        if a_letter != "I":
            sites.append((0, a_letter))
        if p.letter_at(0) != "I":
            sites.append((1, p.letter_at(0)))
        out.append((coeff * p.sign, PauliString.from_sites(2, sites)))
    return OperatorExpression(2, out)


def _chain_ideal_stabilizers(steps, layout) -> tuple[OperatorExpression, OperatorExpression]:
    tokens = _wire_tokens(steps, layout)
    s_z = _pair_expr("Z", _conjugate_letter_through("Z", tokens))
    s_x = _pair_expr("X", _conjugate_letter_through("X", tokens))
    return s_z, s_x


# ---------------------------------------------------------------------------
# chain plan constructors
# ---------------------------------------------------------------------------

def _letter_expr(n: int, qubit: int, letter: str, coeff: float = 1.0) -> OperatorExpression:
    if letter == "I":
        return OperatorExpression.identity(n).scaled(coeff)
    return OperatorExpression.from_pauli(PauliString.single(n, qubit, letter), coeff)


def _chain_plan(label, g, layout, steps, p_x, p_z, ideal, params):
    _require_chain(layout, g)
    corrections = (
        CorrectionRule(layout.output, "X", p_x),
        CorrectionRule(layout.output, "Z", p_z),
    )
    plan = GatePlan(
        label=label,
        graph=g,
        inputs=(layout.input,),
        outputs=(layout.output,),
        steps=tuple(steps),
        corrections=corrections,
        ideal_stabilizers=ideal,
        chain_layout=layout,
        params=params,
    )
    plan.validate()
    return plan


def identity_plan(g: Graph, k: int, half_length: int) -> GatePlan:
    """Identity gate between chain qubits k and k+2l.

    X measurements on the 2l-1 qubits between them, Z on qubits k-1 and
    k+2l+1.  Outcome labels are qubit ids, so the closed-form parities read
    p_z = [1 - m_{k-1} m_{k+2l+1} prod_{j<l} m_{k+2j}]/2 and
    p_x = [1 - prod_{j<=l} m_{k+2j-1}]/2.
    """
    l = half_length
    if l < 1:
        raise PlanError("half-length must be >= 1")
    if k - 1 < 0 or k + 2 * l + 1 >= g.n:
        raise PlanError("chain too short for identity gate")
    layout = ChainLayout(
        left_end=k - 1,
        input=k,
        interior=tuple(range(k + 1, k + 2 * l)),
        output=k + 2 * l,
        right_end=k + 2 * l + 1,
    )
    steps = [MeasurementStep(layout.left_end, "Z")]
    steps += [MeasurementStep(q, "X") for q in layout.interior]
    steps += [MeasurementStep(layout.right_end, "Z")]
    p_z = ParityFormula(
        (layout.left_end, *[k + 2 * j for j in range(1, l)], layout.right_end)
    )
    p_x = ParityFormula(tuple(k + 2 * j - 1 for j in range(1, l + 1)))
    ideal = (
        _two_qubit_pauli_pair("X", "X"),
        _two_qubit_pauli_pair("Z", "Z"),
    )
    params = {"k": k, "l": l}
    plan = _chain_plan(f"identity(l={l})", g, layout, steps, p_x, p_z, ideal, params)
    return _with_named_correlations(
        plan,
        [
            ("XX", "X", _letter_expr(1, 0, "X"), 1.0),
            ("ZZ", "Z", _letter_expr(1, 0, "Z"), 1.0),
            ("YY", "Y", _letter_expr(1, 0, "Y"), -1.0),
        ],
    )


def _two_qubit_pauli_pair(a: str, b: str, sign: float = 1.0) -> OperatorExpression:
    sites = [(i, letter) for i, letter in ((0, a), (1, b)) if letter != "I"]
    return OperatorExpression(2, [(sign, PauliString.from_sites(2, sites))])


def _seven_chain_layout(g: Graph) -> ChainLayout:
    if g.n != 7 or g.edges != chain(7).edges:
        raise PlanError("plan needs the 7-qubit chain 0-1-...-6")
    return ChainLayout(0, 1, (2, 3, 4), 5, 6)


def hadamard_plan(g: Graph) -> GatePlan:
    """Hadamard teleportation: Y on qubits 2,3,4 and Z on 0,6; in 1, out 5.

    p_z = [1 - m2 m3 m6]/2, p_x = [1 - m0 m3 m4]/2.
    """
    layout = _seven_chain_layout(g)
    steps = [
        MeasurementStep(0, "Z"),
        MeasurementStep(2, "Y"),
        MeasurementStep(3, "Y"),
        MeasurementStep(4, "Y"),
        MeasurementStep(6, "Z"),
    ]
    p_z = ParityFormula((2, 3, 6))
    p_x = ParityFormula((0, 3, 4))
    ideal = (_two_qubit_pauli_pair("X", "Z"), _two_qubit_pauli_pair("Z", "X"))
    plan = _chain_plan("hadamard", g, layout, steps, p_x, p_z, ideal, {})
    return _with_named_correlations(
        plan,
        [
            ("XZ", "X", _letter_expr(1, 0, "Z"), 1.0),
            ("ZX", "Z", _letter_expr(1, 0, "X"), 1.0),
        ],
    )


def pi2_plan(g: Graph) -> GatePlan:
    """Quarter-turn phase gate: X on 2,4, Y on 3, Z on 0,6; in 1, out 5.

    p_x = [1 - m2 m4]/2, p_z = [1 - m0 m2 m3 m6]/2.
    """
    layout = _seven_chain_layout(g)
    steps = [
        MeasurementStep(0, "Z"),
        MeasurementStep(2, "X"),
        MeasurementStep(3, "Y"),
        MeasurementStep(4, "X"),
        MeasurementStep(6, "Z"),
    ]
    p_x = ParityFormula((2, 4))
    p_z = ParityFormula((0, 2, 3, 6))
    ideal = (_two_qubit_pauli_pair("Z", "Z"), _two_qubit_pauli_pair("X", "Y", -1.0))
    plan = _chain_plan("pi2", g, layout, steps, p_x, p_z, ideal, {})
    return _with_named_correlations(
        plan,
        [
            ("ZZ", "Z", _letter_expr(1, 0, "Z"), 1.0),
            ("X(-Y)", "X", _letter_expr(1, 0, "Y", -1.0), 1.0),
        ],
    )


def zrot_plan(g: Graph, theta: float) -> GatePlan:
    """Z-axis rotation by theta: X on 2,4 and the adaptive basis X_eta on 3
    with eta = m2 * theta; Z on 0,6; in 1, out 5.

    p_x = [1 - m2 m4]/2, p_z = [1 - m0 m3 m6]/2.  The ideal resource pair is
    {Z Z, X (cos(theta) X - sin(theta) Y)}.
    """
    layout = _seven_chain_layout(g)
    steps = [
        MeasurementStep(0, "Z"),
        MeasurementStep(2, "X"),
        MeasurementStep(3, "XETA", theta=theta, deps=(2,)),
        MeasurementStep(4, "X"),
        MeasurementStep(6, "Z"),
    ]
    p_x = ParityFormula((2, 4))
    p_z = ParityFormula((0, 3, 6))
    c, s = math.cos(theta), math.sin(theta)
    rotated = OperatorExpression(
        2,
        [
            (c, PauliString.from_sites(2, [(0, "X"), (1, "X")])),
            (-s, PauliString.from_sites(2, [(0, "X"), (1, "Y")])),
        ],
    )
    ideal = (_two_qubit_pauli_pair("Z", "Z"), rotated)
    plan = _chain_plan("zrot", g, layout, steps, p_x, p_z, ideal, {"theta": theta})
    b_rot = OperatorExpression(
        1,
        [(c, PauliString.single(1, 0, "X")), (-s, PauliString.single(1, 0, "Y"))],
    )
    return _with_named_correlations(
        plan,
        [
            ("ZZ", "Z", _letter_expr(1, 0, "Z"), 1.0),
            ("XX_-theta", "X", b_rot, 1.0),
        ],
    )


def _with_named_correlations(plan: GatePlan, entries) -> GatePlan:
    """Attach (name, A, B, expected) tuples, embedding A/B on graph qubits."""
    named = []
    for name, a_letter, b_expr, expected in entries:
        a = _letter_expr(plan.graph.n, plan.inputs[0], a_letter)
        terms = []
        for coeff, p in b_expr.terms():
            sites = [
                (plan.outputs[i], p.letter_at(i))
                for i in range(p.n)
                if p.letter_at(i) != "I"
            ]
            terms.append((coeff * p.sign, PauliString.from_sites(plan.graph.n, sites)))
        named.append((name, a, OperatorExpression(plan.graph.n, terms), expected))
    plan.params["_ideal_correlations"] = tuple(named)
    return plan


# ---------------------------------------------------------------------------
# stabilizer-product decomposition and mechanical correction solving
# ---------------------------------------------------------------------------

def decompose_stabilizer_product(
    g: Graph,
    product: PauliString,
    target_sites: Mapping[int, str],
    measured: Mapping[int, str],
):
    """Split a stabilizer product into target x measured-basis factors.

    Succeeds when ``product`` equals, with phase exactly +1, the target
    operator times factors that each match the measured basis of their qubit
    (those factors turn into outcome signs after measurement).  Returns the
    sorted tuple of measured qubits contributing a factor, or raises.
    """
    if product.phase.exponent != 0:
        raise PlanError(f"product carries phase {product.phase}, expected +1")
    contributing = []
    for q in range(g.n):
        letter = product.letter_at(q)
        if q in target_sites:
            if letter != target_sites[q]:
                raise PlanError(
                    f"site {q}: product has {letter}, target needs {target_sites[q]}"
                )
        elif q in measured:
            if letter == "I":
                continue
            if letter != measured[q]:
                raise PlanError(
                    f"site {q}: product has {letter}, measurement basis is {measured[q]}"
                )
            contributing.append(q)
        else:
            if letter != "I":
                raise PlanError(f"site {q}: stray {letter} on unmeasured non-target qubit")
    return tuple(sorted(contributing))


def solve_corrections(
    targets: Sequence[tuple[PauliString, tuple[int, ...]]],
    correction_ops: Sequence[tuple[int, str]],
    n: int,
) -> tuple[CorrectionRule, ...]:
    """Choose parities so every target correlation is +1 after correction.

    ``targets`` pairs each target operator (on graph qubits) with the set of
    measured outcomes whose product gives its pre-correction expectation.
    Solved as a GF(2) linear system in the correction exponents.
    """
    k = len(correction_ops)
    if len(targets) != k:
        raise PlanError("need as many targets as correction components")
    ops = [PauliString.single(n, q, axis) for q, axis in correction_ops]
    rows = []
    for target, outcome_set in targets:
        row = [0 if target.commutes(op) else 1 for op in ops]
        rows.append((row, set(outcome_set)))
    # Gaussian elimination with set-valued right-hand sides
    solution: list[set[int] | None] = [None] * k
    pivot_rows = []
    for col in range(k):
        pivot = next(
            (i for i, (row, _) in enumerate(rows)
             if row[col] == 1 and i not in [p[0] for p in pivot_rows]),
            None,
        )
        if pivot is None:
            raise PlanError("correction system is singular")
        pivot_rows.append((pivot, col))
        prow, pset = rows[pivot]
        for i, (row, rset) in enumerate(rows):
            if i != pivot and row[col] == 1:
                rows[i] = ([a ^ b for a, b in zip(row, prow)], rset ^ pset)
    for pivot, col in pivot_rows:
        solution[col] = rows[pivot][1]
    return tuple(
        CorrectionRule(q, axis, ParityFormula(tuple(sorted(solution[i]))))
        for i, (q, axis) in enumerate(correction_ops)
    )


# ---------------------------------------------------------------------------
# two-dimensional diagonal identity
# ---------------------------------------------------------------------------

def diagonal_identity_plan(g: Graph, n: int) -> GatePlan:
    """Identity gate along the lattice diagonal (1,1) -> (n,n).

    X measurements on the interior diagonal cells (i,i), 1<i<n, and on the
    sub-diagonal cells (i+1,i), 1<=i<=n-1; Z measurements on the six end
    cells only - nothing beside the strip needs to be touched.  The two
    correction parities are read off the diagonal stabilizer products, which
    telescope to X(1,1) X(n,n) and Z(1,1) Z(n,n) times end factors.
    """
    if n < 2:
        raise PlanError("diagonal length must be >= 2")
    diag = [(i, i) for i in range(1, n + 1)]
    subdiag = [(i + 1, i) for i in range(1, n)]
    ends = [(0, 1), (1, 0), (2, 0), (n, n + 1), (n + 1, n), (n + 1, n - 1)]
    for cell in diag + subdiag + ends:
        if not g.has_coord(cell):
            raise PlanError(f"lattice too small: missing cell {cell}")
    v = {cell: g.vertex_at(cell) for cell in diag + subdiag + ends}
    vin, vout = v[(1, 1)], v[(n, n)]

    steps = [MeasurementStep(v[c], "Z") for c in ends]
    steps += [MeasurementStep(v[(i, i)], "X") for i in range(2, n)]
    steps += [MeasurementStep(v[c], "X") for c in subdiag]
    measured_basis = {s.qubit: ("Z" if s.basis == "Z" else "X") for s in steps}

    prod_x = PauliString.identity(g.n)
    for i in range(1, n + 1):
        prod_x = prod_x * cluster_stabilizer(g, v[(i, i)])
    prod_z = PauliString.identity(g.n)
    for c in subdiag:
        prod_z = prod_z * cluster_stabilizer(g, v[c])
    set_x = decompose_stabilizer_product(
        g, prod_x, {vin: "X", vout: "X"}, measured_basis
    )
    set_z = decompose_stabilizer_product(
        g, prod_z, {vin: "Z", vout: "Z"}, measured_basis
    )
    corrections = solve_corrections(
        [
            (PauliString.from_sites(g.n, [(vin, "X"), (vout, "X")]), set_x),
            (PauliString.from_sites(g.n, [(vin, "Z"), (vout, "Z")]), set_z),
        ],
        [(vout, "X"), (vout, "Z")],
        g.n,
    )
    ideal = (_two_qubit_pauli_pair("X", "X"), _two_qubit_pauli_pair("Z", "Z"))
    plan = GatePlan(
        label=f"diag-identity(n={n})",
        graph=g,
        inputs=(vin,),
        outputs=(vout,),
        steps=tuple(steps),
        corrections=corrections,
        ideal_stabilizers=ideal,
        params={"n": n},
    )
    plan.validate()
    return _with_named_correlations(
        plan,
        [
            ("XX", "X", _letter_expr(1, 0, "X"), 1.0),
            ("ZZ", "Z", _letter_expr(1, 0, "Z"), 1.0),
        ],
    )


def diagonal_identity_graph(n: int) -> Graph:
    return diagonal_strip(n)


# ---------------------------------------------------------------------------
# CSIGN (controlled-Z with crossover)
# ---------------------------------------------------------------------------

CSIGN_LABELS = ("a_in", "b_in", "a_out", "b_out", "m1", "m2", "m3", "m4")

# Lattice cells of the shipped geometry, found by constraint search over
# lattice sub-regions (see cli.run_csign_search): a 2x4 ladder whose rungs
# carry the measured qubits; each logical wire enters on one rail and exits
# on the other, realizing the crossover.
CSIGN_GEOMETRY_CELLS: dict[str, tuple[int, int]] = {
    "a_in": (0, 0),
    "m1": (0, 1),
    "m2": (0, 2),
    "b_out": (0, 3),
    "b_in": (1, 0),
    "m3": (1, 1),
    "m4": (1, 2),
    "a_out": (1, 3),
}


@dataclass(frozen=True)
class CsignValidation:
    ok: bool
    variant: str | None = None  # which qubit carries Z in the second identity
    outcome_sets: tuple[tuple[int, ...], ...] = ()
    reason: str | None = None


def _csign_identities(labeling: Mapping[str, int], variant: str):
    a_in, b_in = labeling["a_in"], labeling["b_in"]
    a_out, b_out = labeling["a_out"], labeling["b_out"]
    m1, m2, m3, m4 = (labeling[k] for k in ("m1", "m2", "m3", "m4"))
    z_site = a_in if variant == "a_in" else a_out
    return [
        ((a_in, m3, a_out), {a_in: "X", a_out: "X", b_out: "Z"}),
        ((b_in, m4, b_out), {z_site: "Z", b_in: "X", b_out: "X"}),
        ((m1, m4), {a_in: "Z", a_out: "Z"}),
        ((m2, m3), {b_in: "Z", b_out: "Z"}),
    ]


def validate_csign_geometry(g: Graph, labeling: Mapping[str, int]) -> CsignValidation:
    """Check the four stabilizer-product identities that define the gate.

    Each listed product of cluster generators must reduce, as exact Pauli
    algebra, to its target operator times X factors on the measured qubits
    m1..m4 and Z factors on any remaining (Z-measured boundary) vertices.
    The second identity is accepted with the Z factor on either a_in or
    a_out; the variant that validates is reported.
    """
    missing = [k for k in CSIGN_LABELS if k not in labeling]
    if missing:
        return CsignValidation(False, reason=f"labeling missing {missing}")
    verts = [labeling[k] for k in CSIGN_LABELS]
    if len(set(verts)) != len(verts):
        return CsignValidation(False, reason="labeling repeats a vertex")
    if any(not 0 <= v < g.n for v in verts):
        return CsignValidation(False, reason="labeling outside graph")
    measured = {labeling[f"m{i}"]: "X" for i in range(1, 5)}
    boundary = {v: "Z" for v in range(g.n) if v not in verts}
    bases = {**measured, **boundary}

    last_reason = None
    for variant in ("a_in", "a_out"):
        sets = []
        try:
            for k_vertices, target in _csign_identities(labeling, variant):
                prod = PauliString.identity(g.n)
                for kv in k_vertices:
                    prod = prod * cluster_stabilizer(g, kv)
                sets.append(decompose_stabilizer_product(g, prod, target, bases))
        except PlanError as exc:
            last_reason = f"variant {variant}: {exc}"
            continue
        return CsignValidation(True, variant=variant, outcome_sets=tuple(sets))
    return CsignValidation(False, reason=last_reason)


def csign_geometry() -> tuple[Graph, dict[str, int]]:
    """The shipped validated geometry as (graph, labeling)."""
    g = grid_region(CSIGN_GEOMETRY_CELLS.values())
    labeling = {k: g.vertex_at(c) for k, c in CSIGN_GEOMETRY_CELLS.items()}
    return g, labeling


def csign_plan() -> GatePlan:
    """Two-qubit CSIGN-with-crossover plan on its embedded validated graph.

    X measurements on m1..m4 prepare a four-qubit resource on
    (a_in, b_in, a_out, b_out) whose stabilizers realize the controlled-Z
    input-output map.
    """
    g, labeling = csign_geometry()
    result = validate_csign_geometry(g, labeling)
    if not result.ok:
        raise PlanError(f"shipped CSIGN geometry failed validation: {result.reason}")
    a_in, b_in = labeling["a_in"], labeling["b_in"]
    a_out, b_out = labeling["a_out"], labeling["b_out"]
    boundary = [v for v in range(g.n) if v not in labeling.values()]
    steps = tuple(MeasurementStep(v, "Z") for v in boundary) + tuple(
        MeasurementStep(labeling[f"m{i}"], "X") for i in range(1, 5)
    )
    z_site = a_in if result.variant == "a_in" else a_out
    targets_sites = [
        [(a_in, "X"), (a_out, "X"), (b_out, "Z")],
        [(z_site, "Z"), (b_in, "X"), (b_out, "X")],
        [(a_in, "Z"), (a_out, "Z")],
        [(b_in, "Z"), (b_out, "Z")],
    ]
    targets = [
        (PauliString.from_sites(g.n, sites), outcome_set)
        for sites, outcome_set in zip(targets_sites, result.outcome_sets)
    ]
    corrections = solve_corrections(
        targets,
        [(a_out, "X"), (a_out, "Z"), (b_out, "X"), (b_out, "Z")],
        g.n,
    )
    # resource ordering (a_in, b_in, a_out, b_out) = indices 0..3
    idx = {a_in: 0, b_in: 1, a_out: 2, b_out: 3}
    ideal = tuple(
        OperatorExpression(
            4,
            [(1.0, PauliString.from_sites(4, [(idx[q], letter) for q, letter in sites]))],
        )
        for sites in targets_sites
    )
    plan = GatePlan(
        label="csign",
        graph=g,
        inputs=(a_in, b_in),
        outputs=(a_out, b_out),
        steps=steps,
        corrections=corrections,
        ideal_stabilizers=ideal,
        params={"variant": result.variant, "labeling": dict(labeling)},
    )
    plan.validate()
    named = []
    for name, sites in [
        ("Xa.XaZb", targets_sites[0]),
        ("Za.XbXb" if result.variant == "a_in" else "Xb.ZaXb", targets_sites[1]),
        ("Za.Za", targets_sites[2]),
        ("Zb.Zb", targets_sites[3]),
    ]:
        a_part = [(q, letter) for q, letter in sites if q in (a_in, b_in)]
        b_part = [(q, letter) for q, letter in sites if q in (a_out, b_out)]
        named.append(
            (
                name,
                OperatorExpression.from_pauli(PauliString.from_sites(g.n, a_part)),
                OperatorExpression.from_pauli(PauliString.from_sites(g.n, b_part)),
                1.0,
            )
        )
    plan.params["_ideal_correlations"] = tuple(named)
    return plan


# ---------------------------------------------------------------------------
# concatenation
# ---------------------------------------------------------------------------

def concatenate(p1: GatePlan, p2: GatePlan) -> GatePlan:
    """Join two chain plans: p2's wire continues where p1's output sits.

    The Z terminators at the junction are dropped along with their parity
    contributions, an X measurement lands on the joining qubit, and the
    composite correction parities and ideal stabilizers are re-derived
    mechanically from the combined wire.
    """
    if p1.chain_layout is None or p2.chain_layout is None:
        raise PlanError("concatenation needs chain plans")
    if len(p1.outputs) != 1 or len(p2.inputs) != 1:
        raise PlanError("concatenation needs single-output and single-input plans")
    if p1.adaptive and p2.adaptive:
        raise PlanError(
            "cannot concatenate two adaptive plans: the second plan's "
            "measurement bases would depend on the full outcome history of "
            "the first, so no outcome-independent correction formula exists; "
            "concatenate an adaptive plan with non-adaptive ones only"
        )
    l1, l2 = p1.chain_layout, p2.chain_layout
    seq1 = [l1.left_end, l1.input, *l1.interior, l1.output]
    seq2 = [*l2.interior, l2.output, l2.right_end]
    # composite chain vertices renumbered 0..N-1 in wire order
    n = len(seq1) + len(seq2)
    g = chain(n)
    map1 = {q: i for i, q in enumerate(seq1)}
    join = map1[l1.output]
    map2 = {q: len(seq1) + i for i, q in enumerate(seq2)}
    map2[l2.input] = join

    layout = ChainLayout(
        left_end=0,
        input=map1[l1.input],
        interior=tuple(map1[q] for q in l1.interior) + (join,)
        + tuple(map2[q] for q in l2.interior),
        output=map2[l2.output],
        right_end=map2[l2.right_end],
    )

    def _remap(step: MeasurementStep, mapping) -> MeasurementStep:
        return replace(
            step,
            qubit=mapping[step.qubit],
            deps=tuple(mapping[d] for d in step.deps),
        )

    by_qubit1 = {s.qubit: s for s in p1.steps}
    by_qubit2 = {s.qubit: s for s in p2.steps}
    steps = [MeasurementStep(layout.left_end, "Z")]
    steps += [_remap(by_qubit1[q], map1) for q in l1.interior]
    steps += [MeasurementStep(join, "X")]
    steps += [_remap(by_qubit2[q], map2) for q in l2.interior]
    steps += [MeasurementStep(layout.right_end, "Z")]

    p_x, p_z, steps = derive_chain_parities(steps, layout, fix_deps=True)
    ideal = _chain_ideal_stabilizers(steps, layout)
    params = {"first": p1.label, "second": p2.label}
    plan = _chain_plan(
        f"{p1.label}*{p2.label}", g, layout, steps, p_x, p_z, ideal, params
    )
    named = []
    for s_expr, base_name in zip(ideal, ("Z-line", "X-line")):
        a_letter = "Z" if base_name == "Z-line" else "X"
        b_small = OperatorExpression(
            1,
            [
                (coeff * p.sign, PauliString.single(1, 0, p.letter_at(1)))
                for coeff, p in s_expr.terms()
            ],
        )
        named.append((base_name, a_letter, b_small, 1.0))
    return _with_named_correlations(plan, named)
