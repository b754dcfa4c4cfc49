"""Stabilizer-tableau simulation of Clifford circuits and Pauli measurements.

A state is tracked by 2n generator rows: n stabilizers (the state is their
joint +1 eigenstate) and n destabilizers.  Destabilizer i anticommutes with
stabilizer i and commutes with every other stabilizer, which lets
deterministic measurement outcomes be resolved in O(n^2) row products instead
of an exponential search.

Measurements accept arbitrary Hermitian Pauli strings, not only single-qubit
observables, so stabilizer-product checks and lattice updates are one call.
Random outcomes are drawn from a caller-supplied generator; nothing in this
module owns global randomness.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .pauli import PauliError, PauliString


class MeasurementContradictionError(ValueError):
    """Forced outcome conflicts with a deterministic measurement."""


class Tableau:
    """Pure stabilizer state on ``n`` qubits, initialized to |0...0>."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("tableau needs at least one qubit")
        self.n = n
        self.stabilizers = [PauliString.single(n, q, "Z") for q in range(n)]
        self.destabilizers = [PauliString.single(n, q, "X") for q in range(n)]

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.stabilizers = list(self.stabilizers)
        t.destabilizers = list(self.destabilizers)
        return t

    # -- evolution ----------------------------------------------------------

    def apply_clifford(self, gate: str, *qubits: int) -> "Tableau":
        """Conjugate every generator row by the gate; returns self."""
        self.stabilizers = [p.conjugated(gate, *qubits) for p in self.stabilizers]
        self.destabilizers = [p.conjugated(gate, *qubits) for p in self.destabilizers]
        return self

    def apply_circuit(self, ops: Iterable[tuple]) -> "Tableau":
        for gate, *qubits in ops:
            self.apply_clifford(gate, *qubits)
        return self

    def apply_pauli(self, p: PauliString) -> "Tableau":
        """Conjugate the state by a Pauli unitary (sign kicks only)."""
        if p.n != self.n:
            raise PauliError("dimension mismatch")
        new_stabs = []
        for s in self.stabilizers:
            new_stabs.append(s if s.commutes(p) else s.negate())
        self.stabilizers = new_stabs
        new_destabs = []
        for d in self.destabilizers:
            new_destabs.append(d if d.commutes(p) else d.negate())
        self.destabilizers = new_destabs
        return self

    # -- measurement ----------------------------------------------------------

    def _check_observable(self, p: PauliString) -> None:
        if p.n != self.n:
            raise PauliError(f"observable on {p.n} qubits, state has {self.n}")
        if not p.is_hermitian:
            raise PauliError(f"observable {p} is not Hermitian")

    def _deterministic_sign(self, p: PauliString) -> int | None:
        """+1/-1 if +-p lies in the stabilizer group, else None.

        Requires p to commute with every stabilizer.  The generator subset
        whose product gives +-p is read off the destabilizers: generator i
        participates exactly when destabilizer i anticommutes with p.
        """
        prod = PauliString.identity(self.n)
        for d, s in zip(self.destabilizers, self.stabilizers):
            if not d.commutes(p):
                prod = prod * s
        if (prod.x, prod.z) != (p.x, p.z):
            raise RuntimeError("tableau inconsistency: commuting observable not in group")
        return 1 if prod == p else -1

    def expectation_pauli(self, p: PauliString) -> int:
        """Exact expectation of a Hermitian Pauli string: -1, 0, or +1."""
        self._check_observable(p)
        if any(not s.commutes(p) for s in self.stabilizers):
            return 0
        return self._deterministic_sign(p)

    def measure_pauli(self, p, *, forced: int | None = None, rng: np.random.Generator | None = None):
        """Projectively measure a Hermitian Pauli string, updating in place.

        Returns ``(outcome, self, deterministic)``.  When the outcome is not
        determined it is taken from ``forced`` (+1/-1) if given, otherwise
        drawn fair from ``rng``.  Forcing against a deterministic outcome
        raises MeasurementContradictionError.
        """
        self._check_observable(p)
        anti = [i for i, s in enumerate(self.stabilizers) if not s.commutes(p)]
        if not anti:
            outcome = self._deterministic_sign(p)
            if forced is not None and forced != outcome:
                raise MeasurementContradictionError(
                    f"outcome {forced} forced but measurement is fixed at {outcome}"
                )
            return outcome, self, True

        if forced is not None:
            if forced not in (1, -1):
                raise ValueError("forced outcome must be +1 or -1")
            outcome = forced
        else:
            if rng is None:
                raise ValueError("random measurement needs an rng")
            outcome = 1 if rng.integers(0, 2) == 0 else -1

        pivot = anti[0]
        pivot_row = self.stabilizers[pivot]
        for i in anti[1:]:
            self.stabilizers[i] = self.stabilizers[i] * pivot_row
        self.destabilizers = [
            d if d.commutes(p) else d * pivot_row for d in self.destabilizers
        ]
        self.destabilizers[pivot] = pivot_row
        self.stabilizers[pivot] = p if outcome == 1 else p.negate()
        return outcome, self, False

    # -- integrity ------------------------------------------------------------

    def validate(self) -> None:
        """Check all tableau invariants; raises AssertionError on violation."""
        n = self.n
        for i in range(n):
            for j in range(i + 1, n):
                assert self.stabilizers[i].commutes(self.stabilizers[j]), (
                    f"stabilizers {i},{j} anticommute"
                )
        for i in range(n):
            for j in range(n):
                ok = self.destabilizers[i].commutes(self.stabilizers[j]) == (i != j)
                assert ok, f"destabilizer {i} vs stabilizer {j} pairing broken"
        assert self._symplectic_rank() == n, "stabilizers not independent"
        for row in self.stabilizers + self.destabilizers:
            assert row.is_hermitian, f"non-Hermitian generator {row}"

    def _symplectic_rank(self) -> int:
        rows = [(s.x, s.z) for s in self.stabilizers]
        rank = 0
        for col in range(2 * self.n):
            pick = None
            for r in range(rank, len(rows)):
                x, z = rows[r]
                bit = (x >> col) & 1 if col < self.n else (z >> (col - self.n)) & 1
                if bit:
                    pick = r
                    break
            if pick is None:
                continue
            rows[rank], rows[pick] = rows[pick], rows[rank]
            px, pz = rows[rank]
            for r in range(len(rows)):
                if r == rank:
                    continue
                x, z = rows[r]
                bit = (x >> col) & 1 if col < self.n else (z >> (col - self.n)) & 1
                if bit:
                    rows[r] = (x ^ px, z ^ pz)
            rank += 1
        return rank

    # -- text dump/load ---------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"n {self.n}", "[stabilizers]"]
        lines += [p.to_label() for p in self.stabilizers]
        lines.append("[destabilizers]")
        lines += [p.to_label() for p in self.destabilizers]
        return "\n".join(lines) + "\n"

    @staticmethod
    def loads(text: str) -> "Tableau":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("n "):
            raise ValueError("tableau dump must start with 'n <count>'")
        n = int(lines[0].split()[1])
        sections: dict[str, list[PauliString]] = {}
        current = None
        for ln in lines[1:]:
            if ln.startswith("["):
                current = ln.strip("[]")
                sections[current] = []
            else:
                if current is None:
                    raise ValueError("generator line before section marker")
                sections[current].append(PauliString.from_label(ln, n))
        t = Tableau.__new__(Tableau)
        t.n = n
        try:
            t.stabilizers = sections["stabilizers"]
            t.destabilizers = sections["destabilizers"]
        except KeyError as exc:
            raise ValueError(f"missing section {exc}") from None
        if len(t.stabilizers) != n or len(t.destabilizers) != n:
            raise ValueError("wrong number of generator rows")
        t.validate()
        return t

    def __str__(self) -> str:
        return self.dumps()
