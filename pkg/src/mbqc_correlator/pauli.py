"""Exact phased Pauli-string algebra over n qubits.

Encoding
--------
An n-qubit Pauli operator is stored as two bit masks plus a phase exponent:

* ``x`` - bit q set iff an X factor acts on qubit q,
* ``z`` - bit q set iff a Z factor acts on qubit q,
* ``exp_xz`` - integer mod 4 such that the operator matrix equals

      i**exp_xz  *  prod_q  X_q**x_q Z_q**z_q        (X left of Z on each qubit)

A qubit with both bits set carries Y = i*X*Z, so the displayed ("group")
phase relative to letters I/X/Y/Z is ``i**(exp_xz - #Y)``.  All phase
arithmetic is integer mod 4 - never floating point - so products and
conjugations are exact.

Masks are plain Python integers, i.e. arbitrary-width bit vectors; the qubit
count is limited only by memory.

Text forms (both lossless round-trips):

* dense:  ``+XIZY`` - qubit 0 is the leftmost letter, sign prefix one of
  ``+ - +i -i`` (bare ``i`` accepted on input),
* sparse: ``+X0 Z2 Y3`` - explicit 0-indexed sites, identity elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

_PHASE_VALUES = (1, 1j, -1, -1j)
_PHASE_LABELS = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}

# Single-qubit Clifford action on the (x, z, exp) triple of one site, derived
# from (H: X<->Z), (S: X->Y), (X/Y/Z: sign kicks).  CZ is handled separately.
_SUPPORTED_1Q = ("H", "S", "X", "Y", "Z")


class PauliError(ValueError):
    """Raised on dimension mismatches and malformed Pauli inputs."""


@dataclass(frozen=True)
class Phase:
    """A fourth root of unity i**exponent with exact mod-4 arithmetic."""

    exponent: int

    def __post_init__(self):
        object.__setattr__(self, "exponent", self.exponent % 4)

    @property
    def value(self) -> complex:
        return _PHASE_VALUES[self.exponent]

    def __mul__(self, other: "Phase") -> "Phase":
        return Phase(self.exponent + other.exponent)

    def inverse(self) -> "Phase":
        return Phase(-self.exponent)

    def __str__(self) -> str:
        return _PHASE_LABELS[self.exponent]


def _parity(mask: int) -> int:
    return mask.bit_count() & 1


@dataclass(frozen=True)
class PauliString:
    """Phased Pauli operator on ``n`` qubits in symplectic (x, z, phase) form.

    Equality and hashing are bit-exact: equal operators compare equal.
    """

    n: int
    x: int
    z: int
    exp_xz: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise PauliError("qubit count must be non-negative")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise PauliError("mask exceeds qubit count")
        object.__setattr__(self, "exp_xz", self.exp_xz % 4)

    # -- constructors -----------------------------------------------------

    @staticmethod
    def identity(n: int) -> "PauliString":
        return PauliString(n, 0, 0, 0)

    @staticmethod
    def single(n: int, qubit: int, letter: str, sign: int = 1) -> "PauliString":
        """One-site operator ``sign * letter`` at ``qubit``, identity elsewhere."""
        if not 0 <= qubit < n:
            raise PauliError(f"qubit {qubit} out of range for n={n}")
        xb, zb = _LETTER_BITS[letter.upper()]
        exp = (1 if letter.upper() == "Y" else 0) + (0 if sign == 1 else 2)
        return PauliString(n, xb << qubit, zb << qubit, exp)

    @staticmethod
    def from_label(label: str, n: int | None = None) -> "PauliString":
        """Parse dense form like ``-XIZY`` (qubit 0 leftmost)."""
        s = label.strip()
        exp = 0
        for prefix, e in (("+i", 1), ("-i", 3), ("+", 0), ("-", 2), ("i", 1)):
            if s.startswith(prefix):
                exp = e
                s = s[len(prefix):]
                break
        letters = s.strip()
        if n is None:
            n = len(letters)
        if len(letters) != n:
            raise PauliError(f"label {label!r} has {len(letters)} sites, expected {n}")
        x = z = 0
        for q, ch in enumerate(letters):
            try:
                xb, zb = _LETTER_BITS[ch.upper()]
            except KeyError:
                raise PauliError(f"unknown Pauli letter {ch!r}") from None
            x |= xb << q
            z |= zb << q
            if ch.upper() == "Y":
                exp += 1
        return PauliString(n, x, z, exp)

    @staticmethod
    def from_sparse(label: str, n: int) -> "PauliString":
        """Parse sparse form like ``+X0 Z2 Y3`` on ``n`` qubits."""
        s = label.strip()
        exp = 0
        for prefix, e in (("+i", 1), ("-i", 3), ("+", 0), ("-", 2), ("i", 1)):
            if s.startswith(prefix):
                exp = e
                s = s[len(prefix):]
                break
        x = z = 0
        for tok in s.split():
            letter, idx = tok[0].upper(), int(tok[1:])
            if not 0 <= idx < n:
                raise PauliError(f"site {idx} out of range for n={n}")
            if (x >> idx) & 1 or (z >> idx) & 1:
                raise PauliError(f"site {idx} assigned twice in {label!r}")
            xb, zb = _LETTER_BITS[letter]
            if (xb, zb) == (0, 0):
                continue
            x |= xb << idx
            z |= zb << idx
            if letter == "Y":
                exp += 1
        return PauliString(n, x, z, exp)

    @staticmethod
    def from_sites(n: int, sites: Iterable[tuple[int, str]], sign: int = 1) -> "PauliString":
        """Build from (qubit, letter) pairs; sites must be distinct."""
        p = PauliString.identity(n) if sign == 1 else PauliString(n, 0, 0, 2)
        for q, letter in sites:
            p = p * PauliString.single(n, q, letter)
        return p

    # -- structure ---------------------------------------------------------

    @property
    def phase(self) -> Phase:
        """Group phase relative to I/X/Y/Z letters (Y counted as Y, not iXZ)."""
        return Phase(self.exp_xz - (self.x & self.z).bit_count())

    @property
    def is_hermitian(self) -> bool:
        return self.phase.exponent % 2 == 0

    @property
    def sign(self) -> int:
        """+1 or -1 for Hermitian strings."""
        e = self.phase.exponent
        if e % 2:
            raise PauliError("sign undefined for non-Hermitian string")
        return 1 if e == 0 else -1

    @property
    def support(self) -> tuple[int, ...]:
        m = self.x | self.z
        return tuple(q for q in range(self.n) if (m >> q) & 1)

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def letter_at(self, qubit: int) -> str:
        return _BITS_LETTER[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    def negate(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, self.exp_xz + 2)

    # -- algebra -----------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise PauliError(f"dimension mismatch: {self.n} vs {other.n}")
        # Moving other's X block left through self's Z block anticommutes once
        # per overlapping site; X*X and Z*Z reductions are phase-free.
        exp = self.exp_xz + other.exp_xz + 2 * (self.z & other.x).bit_count()
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z, exp)

    def commutes(self, other: "PauliString") -> bool:
        if self.n != other.n:
            raise PauliError(f"dimension mismatch: {self.n} vs {other.n}")
        return (_parity(self.x & other.z) ^ _parity(self.z & other.x)) == 0

    def conjugated(self, gate: str, *qubits: int) -> "PauliString":
        """Return U P U^dagger for a tabulated Clifford generator U.

        Supported gates: H, S, X, Y, Z on one qubit and CZ on a pair.
        """
        gate = gate.upper()
        for q in qubits:
            if not 0 <= q < self.n:
                raise PauliError(f"qubit {q} out of range for n={self.n}")
        x, z, exp = self.x, self.z, self.exp_xz
        if gate == "CZ":
            if len(qubits) != 2 or qubits[0] == qubits[1]:
                raise PauliError("CZ needs two distinct qubits")
            a, b = qubits
            xa, xb = (x >> a) & 1, (x >> b) & 1
            exp += 2 * (xa & xb)
            z ^= (xb << a) | (xa << b)
            return PauliString(self.n, x, z, exp)
        if gate not in _SUPPORTED_1Q:
            raise PauliError(f"unsupported Clifford gate {gate!r}")
        if len(qubits) != 1:
            raise PauliError(f"{gate} acts on exactly one qubit")
        (q,) = qubits
        bit = 1 << q
        xq, zq = (x >> q) & 1, (z >> q) & 1
        if gate == "H":
            exp += 2 * (xq & zq)
            x = (x & ~bit) | (zq << q)
            z = (z & ~bit) | (xq << q)
        elif gate == "S":
            exp += xq
            z ^= xq << q
        elif gate == "X":
            exp += 2 * zq
        elif gate == "Z":
            exp += 2 * xq
        elif gate == "Y":
            exp += 2 * (xq ^ zq)
        return PauliString(self.n, x, z, exp)

    # -- text forms ----------------------------------------------------------

    def to_label(self) -> str:
        letters = "".join(self.letter_at(q) for q in range(self.n))
        return f"{self.phase}{letters}"

    def to_sparse_label(self) -> str:
        sites = " ".join(f"{self.letter_at(q)}{q}" for q in self.support)
        return f"{self.phase}{sites}" if sites else f"{self.phase}"

    def __str__(self) -> str:
        return self.to_label()


class OperatorExpression:
    """Hermitian weighted sum of Pauli strings.

    Terms are canonical: each stored Pauli carries phase +1, with any -1
    folded into its real coefficient, and duplicate masks are merged.  Terms
    whose coefficient is exactly 0.0 are dropped, so structurally equal
    expressions compare equal with no tolerance.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Iterable[tuple[float, PauliString]] = ()):
        self.n = n
        accum: dict[tuple[int, int], float] = {}
        for coeff, p in terms:
            if p.n != n:
                raise PauliError(f"term on {p.n} qubits in {n}-qubit expression")
            if not p.is_hermitian:
                raise PauliError(f"non-Hermitian term {p}")
            c = float(coeff) * p.sign
            key = (p.x, p.z)
            accum[key] = accum.get(key, 0.0) + c
        self._terms = {k: v for k, v in accum.items() if v != 0.0}

    @staticmethod
    def from_pauli(p: PauliString, coeff: float = 1.0) -> "OperatorExpression":
        return OperatorExpression(p.n, [(coeff, p)])

    @staticmethod
    def identity(n: int) -> "OperatorExpression":
        return OperatorExpression.from_pauli(PauliString.identity(n))

    def terms(self) -> list[tuple[float, PauliString]]:
        """Canonical (coefficient, +1-phase Pauli) pairs, mask-sorted."""
        out = []
        for (x, z) in sorted(self._terms):
            exp = (x & z).bit_count()  # phase +1 in letter convention
            out.append((self._terms[(x, z)], PauliString(self.n, x, z, exp)))
        return out

    def __len__(self) -> int:
        return len(self._terms)

    def __add__(self, other: "OperatorExpression") -> "OperatorExpression":
        if self.n != other.n:
            raise PauliError("dimension mismatch in expression sum")
        merged = dict(self._terms)
        for k, v in other._terms.items():
            merged[k] = merged.get(k, 0.0) + v
        out = OperatorExpression(self.n)
        out._terms = {k: v for k, v in merged.items() if v != 0.0}
        return out

    def __sub__(self, other: "OperatorExpression") -> "OperatorExpression":
        return self + other.scaled(-1.0)

    def scaled(self, factor: float) -> "OperatorExpression":
        out = OperatorExpression(self.n)
        if factor != 0.0:
            out._terms = {k: factor * v for k, v in self._terms.items()}
        return out

    def __mul__(self, other) -> "OperatorExpression":
        if isinstance(other, PauliString):
            other = OperatorExpression.from_pauli(other)
        if self.n != other.n:
            raise PauliError("dimension mismatch in expression product")
        pairs = []
        for ca, pa in self.terms():
            for cb, pb in other.terms():
                pairs.append((ca * cb, pa * pb))
        return OperatorExpression(self.n, pairs)

    def __rmul__(self, other) -> "OperatorExpression":
        if isinstance(other, PauliString):
            return OperatorExpression.from_pauli(other) * self
        raise TypeError(f"cannot multiply {type(other)} with OperatorExpression")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, OperatorExpression)
            and self.n == other.n
            and self._terms == other._terms
        )

    def __hash__(self):
        return hash((self.n, tuple(sorted(self._terms.items()))))

    def identity_coefficient(self) -> float:
        return self._terms.get((0, 0), 0.0)

    def commutes_with(self, other: "OperatorExpression") -> bool:
        """True when every term of self commutes with every term of other."""
        return all(
            pa.commutes(pb)
            for _, pa in self.terms()
            for _, pb in other.terms()
        )

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(f"{c:+g}*{p.to_label()[1:]}" for c, p in self.terms())

    def __repr__(self) -> str:
        return f"OperatorExpression({self.n}, {self})"
