"""Gate plans: structure, parity formulas, geometry validation, concatenation."""
import math

import numpy as np
import pytest

from mbqc_correlator.lattice import chain, cluster_stabilizer, diagonal_strip, grid_region
from mbqc_correlator.pauli import OperatorExpression, PauliString
from mbqc_correlator.plans import (
    ChainLayout,
    CSIGN_GEOMETRY_CELLS,
    GatePlan,
    MeasurementStep,
    ParityFormula,
    PlanError,
    concatenate,
    csign_geometry,
    csign_plan,
    derive_chain_parities,
    diagonal_identity_plan,
    hadamard_plan,
    identity_plan,
    pi2_plan,
    validate_csign_geometry,
    zrot_plan,
)


def seven_chain():
    return chain(7)


# -- construction and printed parity formulas ---------------------------------

def test_identity_plan_l1_structure():
    g = chain(5)
    plan = identity_plan(g, k=1, half_length=1)
    assert plan.inputs == (1,) and plan.outputs == (3,)
    bases = {s.qubit: s.basis for s in plan.steps}
    assert bases == {0: "Z", 2: "X", 4: "Z"}


def test_identity_plan_l2_parities():
    plan = identity_plan(seven_chain(), k=1, half_length=2)
    rules = {c.axis: c.parity for c in plan.corrections}
    assert rules["X"] == ParityFormula((2, 4))
    assert rules["Z"] == ParityFormula((0, 3, 6))


def test_identity_all_plus_outcomes_no_correction():
    plan = identity_plan(seven_chain(), k=1, half_length=2)
    outcomes = {q: 1 for q in plan.measured_qubits}
    assert plan.correction_for(outcomes) == PauliString.identity(7)


def test_identity_first_x_minus_gives_x_correction():
    plan = identity_plan(seven_chain(), k=1, half_length=2)
    outcomes = {q: 1 for q in plan.measured_qubits}
    outcomes[2] = -1  # first X-measured qubit
    assert plan.correction_for(outcomes) == PauliString.single(7, 5, "X")


def test_identity_l1_left_end_minus_gives_z_correction():
    plan = identity_plan(chain(5), k=1, half_length=1)
    outcomes = {0: -1, 2: 1, 4: 1}
    assert plan.correction_for(outcomes) == PauliString.single(5, 3, "Z")


def test_identity_chain_too_short():
    with pytest.raises(PlanError):
        identity_plan(chain(5), k=1, half_length=2)


def test_hadamard_plan_bases_and_parities():
    plan = hadamard_plan(seven_chain())
    bases = {s.qubit: s.basis for s in plan.steps}
    assert bases == {0: "Z", 2: "Y", 3: "Y", 4: "Y", 6: "Z"}
    rules = {c.axis: c.parity for c in plan.corrections}
    assert rules["Z"] == ParityFormula((2, 3, 6))
    assert rules["X"] == ParityFormula((0, 3, 4))


def test_hadamard_worked_outcome_example():
    # m0 = m3 = -1 gives p_x = 0 and p_z = 1: a Z correction
    plan = hadamard_plan(seven_chain())
    outcomes = {0: -1, 2: 1, 3: -1, 4: 1, 6: 1}
    assert plan.correction_for(outcomes) == PauliString.single(7, 5, "Z")


def test_pi2_plan_bases_and_parities():
    plan = pi2_plan(seven_chain())
    bases = {s.qubit: s.basis for s in plan.steps}
    assert bases == {0: "Z", 2: "X", 3: "Y", 4: "X", 6: "Z"}
    rules = {c.axis: c.parity for c in plan.corrections}
    assert rules["X"] == ParityFormula((2, 4))
    assert rules["Z"] == ParityFormula((0, 2, 3, 6))


def test_pi2_worked_outcome_example():
    # m2 = -1 fires both parities: correction XZ on the output
    plan = pi2_plan(seven_chain())
    outcomes = {0: 1, 2: -1, 3: 1, 4: 1, 6: 1}
    got = plan.correction_for(outcomes)
    want = PauliString.single(7, 5, "X") * PauliString.single(7, 5, "Z")
    assert got == want


def test_zrot_plan_structure():
    plan = zrot_plan(seven_chain(), theta=0.7)
    steps = {s.qubit: s for s in plan.steps}
    assert steps[3].basis == "XETA" and steps[3].deps == (2,)
    assert steps[3].theta == 0.7
    rules = {c.axis: c.parity for c in plan.corrections}
    assert rules["X"] == ParityFormula((2, 4))
    assert rules["Z"] == ParityFormula((0, 3, 6))
    assert plan.adaptive


def test_zrot_deps_must_be_measured_earlier():
    with pytest.raises(PlanError):
        GatePlan(
            label="bad",
            graph=chain(5),
            inputs=(1,),
            outputs=(3,),
            steps=(
                MeasurementStep(0, "Z"),
                MeasurementStep(2, "XETA", theta=0.1, deps=(4,)),
                MeasurementStep(4, "Z"),
            ),
            corrections=(),
            ideal_stabilizers=(),
        ).validate()


def test_wrong_chain_size_rejected():
    with pytest.raises(PlanError):
        hadamard_plan(chain(6))
    with pytest.raises(PlanError):
        pi2_plan(chain(8))


# -- mechanical re-derivation of the printed parities ---------------------------

@pytest.mark.parametrize(
    "maker",
    [
        lambda g: identity_plan(g, 1, 2),
        hadamard_plan,
        pi2_plan,
        lambda g: zrot_plan(g, 0.7),
    ],
)
def test_wire_calculus_reproduces_declared_parities(maker):
    plan = maker(seven_chain())
    p_x, p_z, _ = derive_chain_parities(plan.steps, plan.chain_layout)
    rules = {c.axis: c.parity for c in plan.corrections}
    assert p_x == rules["X"]
    assert p_z == rules["Z"]


def test_wire_calculus_identity_general_length():
    for l in (1, 2, 3):
        g = chain(2 * l + 3)
        plan = identity_plan(g, 1, l)
        p_x, p_z, _ = derive_chain_parities(plan.steps, plan.chain_layout)
        rules = {c.axis: c.parity for c in plan.corrections}
        assert (p_x, p_z) == (rules["X"], rules["Z"])


def test_wire_calculus_rejects_wrong_deps():
    g = seven_chain()
    steps = (
        MeasurementStep(0, "Z"),
        MeasurementStep(2, "X"),
        MeasurementStep(3, "XETA", theta=0.3, deps=(4,)),
        MeasurementStep(4, "X"),
        MeasurementStep(6, "Z"),
    )
    layout = ChainLayout(0, 1, (2, 3, 4), 5, 6)
    with pytest.raises(PlanError):
        derive_chain_parities(steps, layout)


# -- ideal stabilizers -----------------------------------------------------------

def two_qubit(a, b, sign=1.0):
    sites = [(i, l) for i, l in ((0, a), (1, b)) if l != "I"]
    return OperatorExpression(2, [(sign, PauliString.from_sites(2, sites))])


def test_declared_ideal_pairs():
    g = seven_chain()
    assert set(identity_plan(g, 1, 2).ideal_stabilizers) == {
        two_qubit("X", "X"), two_qubit("Z", "Z")
    }
    assert set(hadamard_plan(g).ideal_stabilizers) == {
        two_qubit("X", "Z"), two_qubit("Z", "X")
    }
    assert set(pi2_plan(g).ideal_stabilizers) == {
        two_qubit("Z", "Z"), two_qubit("X", "Y", -1.0)
    }


def test_zrot_ideal_pair():
    theta = 0.42
    plan = zrot_plan(seven_chain(), theta)
    c, s = math.cos(theta), math.sin(theta)
    rotated = OperatorExpression(
        2,
        [
            (c, PauliString.from_sites(2, [(0, "X"), (1, "X")])),
            (-s, PauliString.from_sites(2, [(0, "X"), (1, "Y")])),
        ],
    )
    assert set(plan.ideal_stabilizers) == {two_qubit("Z", "Z"), rotated}


def test_zrot_theta_zero_matches_identity_pair():
    plan = zrot_plan(seven_chain(), 0.0)
    assert set(plan.ideal_stabilizers) == {two_qubit("Z", "Z"), two_qubit("X", "X")}


def test_ideal_pair_commutes_and_is_independent():
    for plan in (
        identity_plan(seven_chain(), 1, 2),
        hadamard_plan(seven_chain()),
        pi2_plan(seven_chain()),
        zrot_plan(seven_chain(), 1.1),
        csign_plan(),
    ):
        plan.validate()  # includes commutation and independence checks


# -- 2D diagonal identity ----------------------------------------------------------

def test_diagonal_plan_structure_n3():
    g = diagonal_strip(3)
    plan = diagonal_identity_plan(g, 3)
    assert g.n == 11
    x_steps = [s for s in plan.steps if s.basis == "X"]
    z_steps = [s for s in plan.steps if s.basis == "Z"]
    assert len(x_steps) == 3  # one interior diagonal + two sub-diagonal
    assert len(z_steps) == 6
    assert plan.inputs == (g.vertex_at((1, 1)),)
    assert plan.outputs == (g.vertex_at((3, 3)),)


def test_diagonal_stabilizer_products_telescope():
    n = 3
    g = diagonal_strip(n)
    prod_x = PauliString.identity(g.n)
    for i in range(1, n + 1):
        prod_x = prod_x * cluster_stabilizer(g, g.vertex_at((i, i)))
    expected_x = PauliString.from_sites(
        g.n,
        [(g.vertex_at((i, i)), "X") for i in range(1, n + 1)]
        + [(g.vertex_at(c), "Z") for c in [(0, 1), (1, 0), (3, 4), (4, 3)]],
    )
    assert prod_x == expected_x

    prod_z = PauliString.identity(g.n)
    for i in range(1, n):
        prod_z = prod_z * cluster_stabilizer(g, g.vertex_at((i + 1, i)))
    expected_z = PauliString.from_sites(
        g.n,
        [(g.vertex_at((i + 1, i)), "X") for i in range(1, n)]
        + [(g.vertex_at(c), "Z") for c in [(1, 1), (3, 3), (2, 0), (4, 2)]],
    )
    assert prod_z == expected_z


def test_diagonal_parities_read_off_products():
    g = diagonal_strip(3)
    plan = diagonal_identity_plan(g, 3)
    rules = {c.axis: c.parity for c in plan.corrections}
    ends_x = [g.vertex_at(c) for c in [(0, 1), (1, 0), (3, 4), (4, 3)]]
    interior = [g.vertex_at((2, 2))]
    assert set(rules["Z"].qubits) == set(ends_x + interior)
    subdiag = [g.vertex_at(c) for c in [(2, 1), (3, 2)]]
    ends_z = [g.vertex_at(c) for c in [(2, 0), (4, 2)]]
    assert set(rules["X"].qubits) == set(subdiag + ends_z)


def test_diagonal_all_plus_no_correction():
    g = diagonal_strip(3)
    plan = diagonal_identity_plan(g, 3)
    outcomes = {q: 1 for q in plan.measured_qubits}
    assert plan.correction_for(outcomes) == PauliString.identity(g.n)


def test_diagonal_lattice_too_small():
    with pytest.raises(PlanError):
        diagonal_identity_plan(diagonal_strip(3), 4)


# -- CSIGN -------------------------------------------------------------------------

def test_shipped_csign_geometry_validates():
    g, labeling = csign_geometry()
    result = validate_csign_geometry(g, labeling)
    assert result.ok
    # the shipped ladder satisfies the in-side variant of the second identity
    assert result.variant == "a_in"
    assert len(result.outcome_sets) == 4


def test_csign_empty_graph_fails():
    g = grid_region([(r, c) for r in range(3) for c in range(3)])
    labeling = {k: i for i, k in enumerate(
        ("a_in", "b_in", "a_out", "b_out", "m1", "m2", "m3", "m4"))}
    result = validate_csign_geometry(g, labeling)
    assert not result.ok and result.reason


def test_csign_chain_labeling_fails():
    g = chain(8)
    labeling = {k: i for i, k in enumerate(
        ("a_in", "b_in", "a_out", "b_out", "m1", "m2", "m3", "m4"))}
    assert not validate_csign_geometry(g, labeling).ok


def test_csign_plan_corrections():
    plan = csign_plan()
    lab = plan.params["labeling"]
    rules = {(c.qubit, c.axis): c.parity for c in plan.corrections}
    m = {i: lab[f"m{i}"] for i in range(1, 5)}
    a_out, b_out = lab["a_out"], lab["b_out"]
    assert rules[(a_out, "X")] == ParityFormula(tuple(sorted((m[1], m[4]))))
    assert rules[(a_out, "Z")] == ParityFormula((m[2],))
    assert rules[(b_out, "X")] == ParityFormula(tuple(sorted((m[2], m[3]))))
    assert rules[(b_out, "Z")] == ParityFormula((m[4],))


def test_csign_ideal_stabilizers_are_the_four_targets():
    plan = csign_plan()
    # ordering (a_in, b_in, a_out, b_out); second target carries Z on a_in
    assert len(plan.ideal_stabilizers) == 4
    expected = {
        OperatorExpression.from_pauli(PauliString.from_sparse("+X0 X2 Z3", 4)),
        OperatorExpression.from_pauli(PauliString.from_sparse("+Z0 X1 X3", 4)),
        OperatorExpression.from_pauli(PauliString.from_sparse("+Z0 Z2", 4)),
        OperatorExpression.from_pauli(PauliString.from_sparse("+Z1 Z3", 4)),
    }
    assert set(plan.ideal_stabilizers) == expected


# -- concatenation -------------------------------------------------------------------

def test_concatenate_identity_identity_matches_longer_identity():
    p1 = identity_plan(chain(5), 1, 1)
    p2 = identity_plan(chain(5), 1, 1)
    comp = concatenate(p1, p2)
    ref = identity_plan(chain(7), 1, 2)
    assert comp.graph.edges == ref.graph.edges
    assert {s.qubit: s.basis for s in comp.steps} == {s.qubit: s.basis for s in ref.steps}
    comp_rules = {c.axis: c.parity for c in comp.corrections}
    ref_rules = {c.axis: c.parity for c in ref.corrections}
    assert comp_rules == ref_rules
    assert set(comp.ideal_stabilizers) == set(ref.ideal_stabilizers)


def test_concatenate_hadamard_hadamard_is_identity_resource():
    g = seven_chain()
    comp = concatenate(hadamard_plan(g), hadamard_plan(g))
    assert comp.graph.n == 11
    assert set(comp.ideal_stabilizers) == {two_qubit("X", "X"), two_qubit("Z", "Z")}
    bases = [s.basis for s in sorted(comp.steps, key=lambda s: s.qubit)]
    assert bases == ["Z", "Y", "Y", "Y", "X", "Y", "Y", "Y", "Z"]


def test_concatenate_pi2_pi2_matches_zrot_pi():
    g = seven_chain()
    comp = concatenate(pi2_plan(g), pi2_plan(g))
    ref = zrot_plan(g, math.pi).ideal_stabilizers
    # numerical comparison: cos(pi) = -1, sin(pi) ~ 1e-16
    comp_set = sorted(comp.ideal_stabilizers, key=str)
    for got in comp_set:
        matched = any(_expr_close(got, want) for want in ref)
        assert matched, f"{got} not among zrot(pi) stabilizers"


def _expr_close(a, b, tol=1e-12):
    terms_a = {(p.x, p.z): c for c, p in a.terms()}
    terms_b = {(p.x, p.z): c for c, p in b.terms()}
    keys = set(terms_a) | set(terms_b)
    return all(abs(terms_a.get(k, 0.0) - terms_b.get(k, 0.0)) <= tol for k in keys)


def test_concatenate_clifford_with_zrot_permitted():
    g = seven_chain()
    comp = concatenate(identity_plan(chain(5), 1, 1), zrot_plan(g, 0.6))
    eta_steps = [s for s in comp.steps if s.basis == "XETA"]
    assert len(eta_steps) == 1
    # feedforward recomputed across the join: two prior X outcomes feed eta
    assert len(eta_steps[0].deps) == 2
    comp2 = concatenate(zrot_plan(g, 0.6), identity_plan(chain(5), 1, 1))
    eta2 = [s for s in comp2.steps if s.basis == "XETA"][0]
    assert len(eta2.deps) == 1  # prefix unchanged, standalone dependency survives


def test_concatenate_two_adaptive_rejected():
    g = seven_chain()
    with pytest.raises(PlanError, match="adaptive"):
        concatenate(zrot_plan(g, 0.3), zrot_plan(g, 0.5))


def test_concatenate_is_associative_structurally():
    g = seven_chain()
    a, b, c = hadamard_plan(g), pi2_plan(g), identity_plan(chain(5), 1, 1)
    left = concatenate(concatenate(a, b), c)
    right = concatenate(a, concatenate(b, c))
    assert left.graph.edges == right.graph.edges
    assert [
        (s.qubit, s.basis) for s in sorted(left.steps, key=lambda s: s.qubit)
    ] == [(s.qubit, s.basis) for s in sorted(right.steps, key=lambda s: s.qubit)]
    assert {c.axis: c.parity for c in left.corrections} == {
        c.axis: c.parity for c in right.corrections
    }
    assert set(left.ideal_stabilizers) == set(right.ideal_stabilizers)


def test_concatenate_needs_chain_plans():
    with pytest.raises(PlanError):
        concatenate(csign_plan(), hadamard_plan(seven_chain()))


# -- outcome record validation ----------------------------------------------------

def test_correction_rejects_incomplete_record():
    plan = hadamard_plan(seven_chain())
    with pytest.raises(PlanError):
        plan.correction_for({0: 1, 2: 1})
    with pytest.raises(PlanError):
        plan.correction_for({q: 1 for q in plan.measured_qubits} | {1: 1})
