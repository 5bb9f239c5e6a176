"""Signed N-qubit Pauli strings in symplectic (x-mask, z-mask, phase) form.

A string is stored as ``i^k * prod_j X_j^{x_j} Z_j^{z_j}`` with ``k`` an
integer mod 4 and the masks packed into arbitrary-precision ints, bit ``j``
for site ``j``.  All phase arithmetic is exact integer arithmetic; products
never leave the group {+1, +i, -1, -i} x {Pauli words}.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, PauliParseError

DENSE_QUBIT_LIMIT = 12

_SINGLE = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),          # X
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),         # Z
    (1, 1): np.array([[0, -1], [1, 0]], dtype=complex),         # XZ = -iY
}

_PHASE = (1, 1j, -1, -1j)


def _popcount(mask: int) -> int:
    return mask.bit_count()


@dataclass(frozen=True)
class PauliString:
    """A signed Pauli word ``i^phase_k * prod_j X^{x_j} Z^{z_j}``."""

    n_qubits: int
    x: int
    z: int
    phase_k: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        full = (1 << self.n_qubits) - 1
        if (self.x | self.z) & ~full:
            raise ValueError("mask bits beyond n_qubits")
        object.__setattr__(self, "phase_k", self.phase_k % 4)

    # -- algebra ------------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n_qubits != other.n_qubits:
            raise DimensionError(
                f"qubit counts differ: {self.n_qubits} vs {other.n_qubits}"
            )
        # X^x Z^z . X^x' Z^z' picks up (-1) for every site where z and x' meet.
        k = self.phase_k + other.phase_k + 2 * _popcount(self.z & other.x)
        return PauliString(
            self.n_qubits, self.x ^ other.x, self.z ^ other.z, k % 4
        )

    def __neg__(self) -> "PauliString":
        return PauliString(self.n_qubits, self.x, self.z, self.phase_k + 2)

    def dagger(self) -> "PauliString":
        k = -self.phase_k + 2 * _popcount(self.x & self.z)
        return PauliString(self.n_qubits, self.x, self.z, k % 4)

    @property
    def phase(self) -> complex:
        """Scalar prefactor of the bare X/Z word, one of +1, +i, -1, -i."""
        return _PHASE[self.phase_k]

    def is_hermitian(self) -> bool:
        return (self.phase_k + _popcount(self.x & self.z)) % 2 == 0

    def is_identity_word(self) -> bool:
        return self.x == 0 and self.z == 0

    def commutes(self, other: "PauliString") -> bool:
        if self.n_qubits != other.n_qubits:
            raise DimensionError(
                f"qubit counts differ: {self.n_qubits} vs {other.n_qubits}"
            )
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def anticommutes(self, other: "PauliString") -> bool:
        return not self.commutes(other)

    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(j for j in range(self.n_qubits) if (mask >> j) & 1)

    def unsigned(self) -> "PauliString":
        """Hermitian representative with +1 prefix (letters only)."""
        n_y = _popcount(self.x & self.z)
        return PauliString(self.n_qubits, self.x, self.z, n_y % 4)

    def letter_phase(self) -> complex:
        """Prefactor relative to the plain letter word (Y counted as Y)."""
        n_y = _popcount(self.x & self.z)
        return _PHASE[(self.phase_k - n_y) % 4]

    # -- dense realization ----------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Kronecker-product matrix; site 0 is the least significant index bit."""
        if self.n_qubits > DENSE_QUBIT_LIMIT:
            raise CapacityError(
                f"dense matrix for {self.n_qubits} qubits exceeds the "
                f"{DENSE_QUBIT_LIMIT}-qubit guard"
            )
        factors = [
            _SINGLE[((self.x >> j) & 1, (self.z >> j) & 1)]
            for j in reversed(range(self.n_qubits))
        ]
        mat = functools.reduce(np.kron, factors)
        return self.phase * mat

    # -- text form ------------------------------------------------------------

    def __str__(self) -> str:
        pre = {1: "", 1j: "i ", -1: "- ", -1j: "-i "}[self.letter_phase()]
        letters = []
        for j in range(self.n_qubits):
            xb, zb = (self.x >> j) & 1, (self.z >> j) & 1
            if (xb, zb) == (1, 0):
                letters.append(f"X{j}")
            elif (xb, zb) == (0, 1):
                letters.append(f"Z{j}")
            elif (xb, zb) == (1, 1):
                letters.append(f"Y{j}")
        if not letters:
            return pre + "I"
        return pre + " ".join(letters)

    def key(self) -> tuple[int, int, int]:
        """Hashable (x, z, phase_k) triple; n_qubits implied by context."""
        return (self.x, self.z, self.phase_k)


def identity(n_qubits: int) -> PauliString:
    return PauliString(n_qubits, 0, 0, 0)


_TOKEN = re.compile(r"^([IXYZ])(\d+)$")
_SIGNS = {
    "+": 0, "-": 2, "−": 2,
    "i": 1, "+i": 1, "-i": 3, "−i": 3,
}


def parse_pauli(text: str, n_qubits: int) -> PauliString:
    """Parse text like ``"Z0 Z1"``, ``"- X3"``, ``"-i Y2"`` or ``"I"``.

    Duplicate site indices are rejected; sites must be < ``n_qubits``.
    """
    parts = text.split()
    if not parts:
        raise PauliParseError("empty Pauli text")
    k = 0
    if parts[0] in _SIGNS:
        k = _SIGNS[parts[0]]
        parts = parts[1:]
        if not parts:
            raise PauliParseError(f"sign with no operator in {text!r}")
    x = z = 0
    seen: set[int] = set()
    for tok in parts:
        if tok == "I":
            continue
        m = _TOKEN.match(tok)
        if m is None:
            raise PauliParseError(f"bad token {tok!r} in {text!r}")
        letter, site = m.group(1), int(m.group(2))
        if site >= n_qubits:
            raise PauliParseError(
                f"site {site} out of range for {n_qubits} qubits in {text!r}"
            )
        if site in seen:
            raise PauliParseError(f"duplicate site {site} in {text!r}")
        seen.add(site)
        if letter == "I":
            continue
        if letter in ("X", "Y"):
            x |= 1 << site
        if letter in ("Z", "Y"):
            z |= 1 << site
        if letter == "Y":
            k += 1          # Y = i XZ
    return PauliString(n_qubits, x, z, k % 4)


class PauliSum:
    """A complex linear combination of Pauli words on a fixed register.

    Terms are keyed by the bare (x, z) word; phases are folded into the
    coefficients.  Supports the small amount of operator arithmetic the
    rest of the package needs.
    """

    __slots__ = ("n_qubits", "terms")

    def __init__(self, n_qubits: int, terms: dict[tuple[int, int], complex] | None = None):
        self.n_qubits = n_qubits
        self.terms: dict[tuple[int, int], complex] = dict(terms or {})

    @classmethod
    def from_pairs(cls, pairs, n_qubits: int) -> "PauliSum":
        """Build from an iterable of (coefficient, PauliString) pairs."""
        out = cls(n_qubits)
        for coeff, p in pairs:
            out.add(coeff, p)
        return out

    def add(self, coeff: complex, p: PauliString) -> None:
        if p.n_qubits != self.n_qubits:
            raise DimensionError("term acts on a different register")
        key = (p.x, p.z)
        self.terms[key] = self.terms.get(key, 0.0) + coeff * p.phase
        if abs(self.terms[key]) < 1e-300:
            del self.terms[key]

    def items(self):
        """Yield (coefficient, PauliString with +1 phase) pairs."""
        for (x, z), coeff in self.terms.items():
            yield coeff, PauliString(self.n_qubits, x, z, 0)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        out = PauliSum(self.n_qubits, self.terms)
        for coeff, p in other.items():
            out.add(coeff, p)
        return out

    def __rmul__(self, scalar: complex) -> "PauliSum":
        return PauliSum(
            self.n_qubits, {k: scalar * v for k, v in self.terms.items()}
        )

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        out = PauliSum(self.n_qubits)
        for ca, pa in self.items():
            for cb, pb in other.items():
                out.add(ca * cb, pa * pb)
        return out

    def dagger(self) -> "PauliSum":
        out = PauliSum(self.n_qubits)
        for coeff, p in self.items():
            out.add(np.conjugate(coeff), p.dagger())
        return out

    def prune(self, tol: float = 1e-14) -> "PauliSum":
        return PauliSum(
            self.n_qubits,
            {k: v for k, v in self.terms.items() if abs(v) > tol},
        )

    def to_dense(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        if self.n_qubits > DENSE_QUBIT_LIMIT:
            raise CapacityError("register too large for dense form")
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, p in self.items():
            out += coeff * p.to_dense()
        return out

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max((abs(c) for c in self.terms.values()), default=1.0)
        for coeff, p in self.items():
            pd = p.dagger()
            back = self.terms.get((pd.x, pd.z), 0.0) * 1.0
            if abs(np.conjugate(coeff) * pd.phase - back) > tol * max(1.0, scale):
                return False
        return True

    def __len__(self) -> int:
        return len(self.terms)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for coeff, p in sorted(self.items(), key=lambda t: (t[1].x, t[1].z)):
            bits.append(f"({coeff:.6g}) {p}")
        return " + ".join(bits)
