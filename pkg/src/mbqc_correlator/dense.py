"""Exact dense statevector simulation.

Covers what the tableau engine cannot: rotated X_eta measurement bases,
arbitrary perturbed input states, and the brute-force oracle role in
equivalence tests.  Everything is exact linear algebra on 2^n complex
amplitudes - no sampling.

Mixed states are represented as :class:`BranchEnsemble`, a weighted list of
pure branches, mirroring how measurement averages actually arise.

Qubit 0 is the least significant bit of the amplitude index.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .pauli import OperatorExpression, PauliError, PauliString

DEFAULT_QUBIT_CAP = 22
ZERO_PROBABILITY = 1e-14

_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED_GATES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def uz_matrix(theta: float) -> np.ndarray:
    """Rotation about the Z axis: diag(e^{-i theta/2}, e^{+i theta/2})."""
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


def x_eta_matrix(eta: float) -> np.ndarray:
    """Rotated observable X_eta = Uz(eta) X Uz(-eta) = cos(eta) X + sin(eta) Y."""
    return math.cos(eta) * _FIXED_GATES["X"] + math.sin(eta) * _FIXED_GATES["Y"]


def _bit_parity(values: np.ndarray) -> np.ndarray:
    """Parity of the set bits of each entry (entries < 2^62)."""
    v = values.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


class StateVector:
    """Dense pure state; mutated in place by gates, copied for branches."""

    def __init__(self, amplitudes: np.ndarray, n: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex)
        if n is None:
            n = int(amps.size).bit_length() - 1
        if amps.size != 1 << n:
            raise ValueError(f"need 2^{n} amplitudes, got {amps.size}")
        self.n = n
        self.amplitudes = amps.reshape(-1).copy()

    @staticmethod
    def zero(n: int, *, max_qubits: int = DEFAULT_QUBIT_CAP) -> "StateVector":
        if n > max_qubits:
            raise ValueError(
                f"{n} qubits exceeds the dense cap of {max_qubits}; "
                "pass max_qubits explicitly to override"
            )
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1.0
        return StateVector(amps, n)

    @staticmethod
    def plus(n: int, *, max_qubits: int = DEFAULT_QUBIT_CAP) -> "StateVector":
        s = StateVector.zero(n, max_qubits=max_qubits)
        s.amplitudes[:] = 1.0 / math.sqrt(1 << n)
        return s

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes, self.n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    # -- unitaries ----------------------------------------------------------

    def apply_gate(self, gate, *qubits: int, theta: float | None = None) -> "StateVector":
        """Apply a named gate, Uz(theta), or an explicit 2x2 unitary in place."""
        for q in qubits:
            if not 0 <= q < self.n:
                raise ValueError(f"qubit {q} out of range for n={self.n}")
        if isinstance(gate, str):
            name = gate.upper()
            if name == "CZ":
                a, b = qubits
                idx = np.arange(1 << self.n)
                mask = ((idx >> a) & 1) & ((idx >> b) & 1)
                self.amplitudes[mask == 1] *= -1
                return self
            if name == "UZ":
                if theta is None:
                    raise ValueError("Uz needs an angle")
                matrix = uz_matrix(theta)
            else:
                try:
                    matrix = _FIXED_GATES[name]
                except KeyError:
                    raise ValueError(f"unsupported gate {gate!r}") from None
        else:
            matrix = np.asarray(gate, dtype=complex)
            if matrix.shape != (2, 2):
                raise ValueError("explicit gate must be 2x2")
            if not np.allclose(matrix @ matrix.conj().T, np.eye(2), atol=1e-10):
                raise ValueError("explicit 2x2 gate is not unitary")
        (q,) = qubits
        # stride view: index = high * 2^(q+1) + bit * 2^q + low
        view = self.amplitudes.reshape(-1, 2, 1 << q)
        self.amplitudes = np.einsum("ab,ibj->iaj", matrix, view).reshape(-1)
        return self

    def apply_pauli(self, p: PauliString) -> "StateVector":
        """Apply a Pauli string (exact phase included) in place."""
        if p.n != self.n:
            raise PauliError("dimension mismatch")
        idx = np.arange(1 << self.n)
        signs = 1.0 - 2.0 * _bit_parity(idx & p.z)
        out = np.empty_like(self.amplitudes)
        out[idx ^ p.x] = (1j ** p.exp_xz) * signs * self.amplitudes
        self.amplitudes = out
        return self

    # -- measurement ----------------------------------------------------------

    def measure_branches(self, qubit: int, basis: str = "Z", eta: float | None = None):
        """Project onto both eigenstates of a single-qubit observable.

        ``basis`` is one of X/Y/Z or "XETA" with an explicit ``eta`` angle.
        Returns [(probability, post_state, outcome)] for outcomes +1 and -1;
        a branch with probability < ZERO_PROBABILITY carries its unnormalized
        remnant and should be skipped downstream.
        """
        if not 0 <= qubit < self.n:
            raise ValueError(f"qubit {qubit} out of range")
        name = basis.upper()
        if name == "XETA":
            if eta is None:
                raise ValueError("XETA basis needs an angle")
            obs = x_eta_matrix(eta)
        else:
            try:
                obs = _FIXED_GATES[name]
            except KeyError:
                raise ValueError(f"unknown measurement basis {basis!r}") from None
        eye = np.eye(2, dtype=complex)
        branches = []
        for outcome in (1, -1):
            projector = (eye + outcome * obs) / 2.0
            view = self.amplitudes.reshape(-1, 2, 1 << qubit)
            projected = np.einsum("ab,ibj->iaj", projector, view).reshape(-1)
            prob = float(np.real(np.vdot(projected, projected)))
            state = StateVector(projected, self.n)
            if prob >= ZERO_PROBABILITY:
                state.amplitudes /= math.sqrt(prob)
            branches.append((prob, state, outcome))
        return branches

    # -- expectations -----------------------------------------------------------

    def expectation_pauli(self, p: PauliString) -> complex:
        if p.n != self.n:
            raise PauliError("dimension mismatch")
        idx = np.arange(1 << self.n)
        signs = 1.0 - 2.0 * _bit_parity(idx & p.z)
        moved = np.empty_like(self.amplitudes)
        moved[idx ^ p.x] = (1j ** p.exp_xz) * signs * self.amplitudes
        return complex(np.vdot(self.amplitudes, moved))

    def dumps(self) -> str:
        lines = [f"{idx} {amp.real:+.17g}{amp.imag:+.17g}j"
                 for idx, amp in enumerate(self.amplitudes)]
        return "\n".join(lines) + "\n"


class BranchEnsemble:
    """Mixed state as a weighted list of pure branches: rho = sum w |psi><psi|."""

    def __init__(self, branches: Iterable[tuple[float, StateVector]], *, check: bool = True):
        self.branches = [(float(w), s) for w, s in branches]
        if not self.branches:
            raise ValueError("ensemble needs at least one branch")
        self.n = self.branches[0][1].n
        if check:
            if any(s.n != self.n for _, s in self.branches):
                raise ValueError("mixed qubit counts in ensemble")
            if any(w < 0 for w, _ in self.branches):
                raise ValueError("negative branch weight")
            total = sum(w for w, _ in self.branches)
            if abs(total - 1.0) > 1e-10:
                raise ValueError(f"branch weights sum to {total}, not 1")

    @staticmethod
    def pure(state: StateVector) -> "BranchEnsemble":
        return BranchEnsemble([(1.0, state)])

    def map_states(self, fn) -> "BranchEnsemble":
        return BranchEnsemble(
            [(w, fn(s.copy())) for w, s in self.branches], check=False
        )


def as_ensemble(state) -> BranchEnsemble:
    if isinstance(state, BranchEnsemble):
        return state
    if isinstance(state, StateVector):
        return BranchEnsemble.pure(state)
    raise TypeError(f"expected StateVector or BranchEnsemble, got {type(state)}")


def expectation(state, expr) -> float:
    """Ensemble-weighted real expectation of a Pauli string or expression.

    A residual imaginary part above 1e-10 means the operator was not
    Hermitian and is reported as an error rather than silently dropped.
    """
    if isinstance(expr, PauliString):
        expr = OperatorExpression.from_pauli(expr)
    ensemble = as_ensemble(state)
    if expr.n != ensemble.n:
        raise PauliError(f"operator on {expr.n} qubits, state has {ensemble.n}")
    total = 0.0 + 0.0j
    for weight, psi in ensemble.branches:
        if weight < ZERO_PROBABILITY:
            continue
        for coeff, p in expr.terms():
            total += weight * coeff * psi.expectation_pauli(p)
    if abs(total.imag) > 1e-10:
        raise ValueError(f"non-Hermitian expectation: imaginary residue {total.imag}")
    return float(total.real)


def reduced_density(state, qubits: Sequence[int]) -> np.ndarray:
    """Partial trace onto ``qubits`` (given order = tensor order, first qubit
    is the most significant index of the returned matrix)."""
    ensemble = as_ensemble(state)
    n = ensemble.n
    k = len(qubits)
    if len(set(qubits)) != k:
        raise ValueError("duplicate qubits in partial trace")
    for q in qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range")
    rho = np.zeros((1 << k, 1 << k), dtype=complex)
    keep_axes = [n - 1 - q for q in qubits]  # axis of qubit q in tensor layout
    other_axes = [ax for ax in range(n) if ax not in keep_axes]
    for weight, psi in ensemble.branches:
        if weight < ZERO_PROBABILITY:
            continue
        tensor = psi.amplitudes.reshape([2] * n)
        moved = np.transpose(tensor, keep_axes + other_axes).reshape(1 << k, -1)
        rho += weight * (moved @ moved.conj().T)
    return rho


def reduced_two_qubit_density(state, pair: tuple[int, int]) -> np.ndarray:
    """4x4 reduced density matrix on an ordered qubit pair, with validation."""
    a, b = pair
    if a == b:
        raise ValueError("pair qubits must differ")
    rho = reduced_density(state, (a, b))
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("reduced density not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ValueError(f"reduced density trace {np.trace(rho)}")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("reduced density not positive semidefinite")
    return rho


def states_equal_up_to_phase(a: StateVector, b: StateVector, tol: float = 1e-10) -> bool:
    return abs(abs(a.overlap(b)) - 1.0) <= tol
