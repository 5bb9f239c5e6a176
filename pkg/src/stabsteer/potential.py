"""Stabilizer potentials Phi = -sum_a mu_a S_a and the local eigenoperator
basis of the map S(A) = sigma^{1/2} A sigma^{-1/2}, sigma = exp(-Phi).

The eigenoperators ("dressed jumps") are P * prod_{a in A_P} (1 + n_a S_a)/2
with eigenvalue c = exp(-sum_a n_a mu_a), where A_P indexes the stabilizers
anticommuting with P.  They are the local jump-operator basis used by every
downstream module.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapacityError, ConstraintError, DimensionError, OutcomeKeyError
from .pauli import (
    DENSE_QUBIT_LIMIT,
    PauliString,
    PauliSum,
    identity,
    parse_pauli,
)


class StabilizerPotential:
    """Phi = -sum_a mu_a S_a over mutually commuting Hermitian Pauli strings.

    Parameters
    ----------
    n_qubits : register size.
    terms : list of (PauliString, mu) pairs.  Strings must have +1 phase,
        square to the identity, commute pairwise, and be pairwise distinct.
    mu_ratios : optional list of exact rationals r_a with mu_a = r_a * unit
        for a common (possibly irrational) unit.  When given, eigenvalue
        degeneracy c_i = c_j is decided exactly from the integer linear form
        sum_a n_a r_a instead of floating-point comparison.  If omitted and
        all mu are equal, ratios of 1 are assumed; otherwise grouping falls
        back to a relative tolerance of 1e-12.
    """

    def __init__(self, n_qubits, terms, mu_ratios=None):
        self.n_qubits = n_qubits
        self.stabilizers: list[PauliString] = []
        self.mus: list[float] = []
        seen = set()
        for s, mu in terms:
            if s.n_qubits != n_qubits:
                raise DimensionError("stabilizer acts on a different register")
            if not s.is_hermitian() or s.phase != 1:
                raise ConstraintError(f"stabilizer {s} must be Hermitian with +1 phase")
            if s.is_identity_word():
                raise ConstraintError("identity is not an admissible stabilizer")
            if (s.x, s.z) in seen:
                raise ConstraintError(f"duplicate stabilizer {s}")
            seen.add((s.x, s.z))
            self.stabilizers.append(s)
            self.mus.append(float(mu))
        for i, si in enumerate(self.stabilizers):
            for sj in self.stabilizers[i + 1:]:
                if not si.commutes(sj):
                    raise ConstraintError(f"stabilizers {si} and {sj} do not commute")
        if mu_ratios is not None:
            if len(mu_ratios) != len(self.stabilizers):
                raise ConstraintError("mu_ratios length mismatch")
            self.mu_ratios = [Fraction(r) for r in mu_ratios]
        elif len(set(self.mus)) <= 1:
            self.mu_ratios = [Fraction(1)] * len(self.stabilizers)
        else:
            self.mu_ratios = None

    def __len__(self):
        return len(self.stabilizers)

    # -- anticommutation structure -----------------------------------------

    def anticommuting_set(self, p: PauliString) -> tuple[int, ...]:
        """Indices a with S_a P + P S_a = 0, in increasing order."""
        if p.n_qubits != self.n_qubits:
            raise DimensionError("operator acts on a different register")
        return tuple(
            a for a, s in enumerate(self.stabilizers) if s.anticommutes(p)
        )

    def exponent_key(self, outcomes: dict[int, int]):
        """Hashable key identifying the linear form sum_a n_a mu_a.

        Exact (rational) when commensurate ratios are known, otherwise the
        float value rounded to 12 relative digits.
        """
        if self.mu_ratios is not None:
            return sum(
                (Fraction(n) * self.mu_ratios[a] for a, n in outcomes.items()),
                Fraction(0),
            )
        val = sum(n * self.mus[a] for a, n in outcomes.items())
        scale = max(abs(m) for m in self.mus) if self.mus else 1.0
        return round(val / (scale or 1.0), 12)

    # -- dense builders ------------------------------------------------------

    def _check_capacity(self):
        if self.n_qubits > DENSE_QUBIT_LIMIT:
            raise CapacityError(
                f"{self.n_qubits} qubits exceeds the dense guard "
                f"({DENSE_QUBIT_LIMIT})"
            )

    def sigma(self, normalize=False, half=False) -> np.ndarray:
        """Dense sigma = exp(-Phi) (or exp(-Phi/2) for half=True).

        Built exactly as a product of cosh/sinh factors; stored
        unnormalized unless requested.
        """
        self._check_capacity()
        dim = 2 ** self.n_qubits
        out = np.eye(dim, dtype=complex)
        for s, mu in zip(self.stabilizers, self.mus):
            m = mu / 2 if half else mu
            out = np.cosh(m) * out + np.sinh(m) * (out @ s.to_dense())
        if normalize:
            out = out / np.trace(out).real
        return out

    def apply_S_dense(self, op: np.ndarray, power: float = 1.0) -> np.ndarray:
        """sigma^{power/2} op sigma^{-power/2} for a dense operator."""
        self._check_capacity()
        left = np.eye(2 ** self.n_qubits, dtype=complex)
        for s, mu in zip(self.stabilizers, self.mus):
            m = power * mu / 2
            left = np.cosh(m) * left + np.sinh(m) * (left @ s.to_dense())
        right = np.eye(2 ** self.n_qubits, dtype=complex)
        for s, mu in zip(self.stabilizers, self.mus):
            m = -power * mu / 2
            right = np.cosh(m) * right + np.sinh(m) * (right @ s.to_dense())
        return left @ op @ right

    def apply_S_sum(self, op: PauliSum) -> PauliSum:
        """Algebraic S action on a Pauli sum (no dense capacity limit)."""
        out = PauliSum(self.n_qubits)
        for coeff, p in op.items():
            term = PauliSum.from_pairs([(coeff, p)], self.n_qubits)
            for a in self.anticommuting_set(p):
                s, mu = self.stabilizers[a], self.mus[a]
                # exp(mu S/2) P exp(-mu S/2) = cosh(mu) P + sinh(mu) S P
                nxt = PauliSum(self.n_qubits)
                for cc, pp in term.items():
                    nxt.add(np.cosh(mu) * cc, pp)
                    nxt.add(np.sinh(mu) * cc, s * pp)
                term = nxt
            out = out + term
        return out.prune()


def chain_potential(L, mu, pbc=True, mu_ratios=None) -> StabilizerPotential:
    """1D Ising chain Phi = -mu sum_x Z_x Z_{x+1}."""
    n_bonds = L if pbc else L - 1
    terms = []
    for x in range(n_bonds):
        terms.append((parse_pauli(f"Z{x} Z{(x + 1) % L}", L), mu))
    return StabilizerPotential(L, terms, mu_ratios=mu_ratios)


def field_potential(L, mu) -> StabilizerPotential:
    """Paramagnet Phi = -mu sum_x Z_x."""
    return StabilizerPotential(L, [(parse_pauli(f"Z{x}", L), mu) for x in range(L)])


def torus_potential(Lx, Ly, mu) -> StabilizerPotential:
    """2D square-lattice Ising bonds on an Lx x Ly torus; site (i,j) -> i + Lx*j."""
    n = Lx * Ly
    terms = []
    for j in range(Ly):
        for i in range(Lx):
            site = i + Lx * j
            right = (i + 1) % Lx + Lx * j
            up = i + Lx * ((j + 1) % Ly)
            terms.append((parse_pauli(f"Z{site} Z{right}", n), mu))
            terms.append((parse_pauli(f"Z{site} Z{up}", n), mu))
    return StabilizerPotential(n, terms)


@dataclass(frozen=True)
class DressedJump:
    """Eigenoperator prefactor * P * prod_a (1 + n_a S_a)/2.

    `base` is the Hermitian +1-phase representative of the Pauli string;
    any residual phase of a non-Hermitian input lives in `prefactor`.
    The outcome word normally runs exactly over the anticommuting set A_P;
    motif-style operators may carry extra projectors onto stabilizers that
    commute with `base` (those do not enter the eigenvalue and are fixed
    points of the adjoint map).
    """

    potential: StabilizerPotential = field(compare=False)
    base: PauliString
    outcomes: tuple[tuple[int, int], ...]      # sorted (stabilizer index, +-1)
    prefactor: complex = 1.0

    @property
    def outcome_dict(self) -> dict[int, int]:
        return dict(self.outcomes)

    def _flipping(self, a: int) -> bool:
        return self.potential.stabilizers[a].anticommutes(self.base)

    def core_outcomes(self) -> tuple[tuple[int, int], ...]:
        """Entries keyed by the anticommuting set A_P only."""
        return tuple((a, n) for a, n in self.outcomes if self._flipping(a))

    @property
    def c(self) -> float:
        """Eigenvalue exp(-sum_{a in A_P} n_a mu_a) of the S map."""
        return float(
            np.exp(-sum(n * self.potential.mus[a] for a, n in self.core_outcomes()))
        )

    @property
    def weight(self) -> int:
        """Number of -1 entries in the outcome word (the paper-style |n|)."""
        return sum(1 for _, n in self.outcomes if n == -1)

    def adjoint(self) -> "DressedJump":
        """The dagger, which is the pi-image: flipped outcomes on A_P, c -> 1/c."""
        return DressedJump(
            self.potential,
            self.base,
            tuple(
                (a, -n if self._flipping(a) else n) for a, n in self.outcomes
            ),
            np.conjugate(self.prefactor),
        )

    def sort_key(self):
        return (str(self.base), self.outcomes)

    def projector_sum(self) -> PauliSum:
        """prod (1 + n_a S_a)/2 expanded as a Pauli sum."""
        pot = self.potential
        out = PauliSum.from_pairs([(1.0, identity(pot.n_qubits))], pot.n_qubits)
        for a, n in self.outcomes:
            half = PauliSum.from_pairs(
                [(0.5, identity(pot.n_qubits)), (0.5 * n, pot.stabilizers[a])],
                pot.n_qubits,
            )
            out = out @ half
        return out

    def to_sum(self) -> PauliSum:
        return (self.prefactor *
                (PauliSum.from_pairs([(1.0, self.base)], self.potential.n_qubits)
                 @ self.projector_sum()))

    def dense(self) -> np.ndarray:
        pot = self.potential
        pot._check_capacity()
        dim = 2 ** pot.n_qubits
        mat = self.base.to_dense()
        for a, n in self.outcomes:
            proj = 0.5 * (np.eye(dim) + n * pot.stabilizers[a].to_dense())
            mat = mat @ proj
        return self.prefactor * mat

    def __str__(self):
        word = " ".join(f"{a}:{'+' if n > 0 else '-'}" for a, n in self.outcomes)
        pre = "" if self.prefactor == 1 else f"({self.prefactor:.3g}) "
        return f"{pre}{self.base} [{word or 'no projector'}]"


def dressed_jump(p: PauliString, outcomes, potential: StabilizerPotential) -> DressedJump:
    """Dress a Pauli string with the projector for outcome word `outcomes`.

    `outcomes` must be keyed exactly by anticommuting_set(p, potential).
    """
    acset = potential.anticommuting_set(p)
    out = dict(outcomes)
    if set(out) != set(acset):
        raise OutcomeKeyError(
            f"outcome word keyed by {sorted(out)} but the anticommuting set "
            f"is {sorted(acset)}"
        )
    if any(n not in (-1, 1) for n in out.values()):
        raise OutcomeKeyError("outcomes must be +-1")
    base = p.unsigned()
    prefactor = complex(p.letter_phase())
    return DressedJump(potential, base, tuple(sorted(out.items())), prefactor)


def projected_jump(p: PauliString, outcomes, potential: StabilizerPotential) -> DressedJump:
    """Like dressed_jump but allows extra projectors onto stabilizers that
    commute with p (motif operators).  Keys must still cover A_P."""
    acset = set(potential.anticommuting_set(p))
    out = dict(outcomes)
    if not acset <= set(out):
        raise OutcomeKeyError(
            f"outcome word must cover the anticommuting set {sorted(acset)}"
        )
    if any(n not in (-1, 1) for n in out.values()):
        raise OutcomeKeyError("outcomes must be +-1")
    base = p.unsigned()
    return DressedJump(
        potential, base, tuple(sorted(out.items())), complex(p.letter_phase())
    )


def all_dressings(p: PauliString, potential: StabilizerPotential) -> list[DressedJump]:
    """All 2^{|A_P|} dressed jumps of a Pauli string, in lexicographic
    outcome order (+1 before -1 at each index)."""
    acset = potential.anticommuting_set(p)
    jumps = []
    for bits in range(2 ** len(acset)):
        word = {
            a: (1 if not (bits >> i) & 1 else -1)
            for i, a in enumerate(acset)
        }
        jumps.append(dressed_jump(p, word, potential))
    return jumps


def decompose_operator(op, potential: StabilizerPotential):
    """Write an operator as sum_k coeff_k * DressedJump_k.

    `op` may be a PauliSum or a dense matrix (the latter is projected onto
    the Pauli word basis first).  Returned jumps carry prefactor 1; phases
    are folded into the coefficients.
    """
    if isinstance(op, np.ndarray):
        n = potential.n_qubits
        potential._check_capacity()
        dim = 2 ** n
        if op.shape != (dim, dim):
            raise DimensionError("matrix shape does not match the register")
        psum = PauliSum(n)
        for x in range(dim):
            for z in range(dim):
                word = PauliString(n, x, z)
                coeff = np.trace(word.to_dense().conj().T @ op) / dim
                if abs(coeff) > 1e-14:
                    psum.add(coeff, word)
        op = psum
    terms = []
    for coeff, p in op.items():
        for jump in all_dressings(p, potential):
            terms.append((coeff, jump))
    return terms


def apply_S(op, potential: StabilizerPotential):
    """The superoperator S(A) = sigma^{1/2} A sigma^{-1/2}.

    Accepts a dense matrix, a PauliSum, or a DressedJump (for which the
    eigenvalue relation S(A) = c A is used directly).
    """
    if isinstance(op, DressedJump):
        return DressedJump(
            op.potential, op.base, op.outcomes, op.prefactor * op.c
        )
    if isinstance(op, PauliSum):
        return potential.apply_S_sum(op)
    return potential.apply_S_dense(np.asarray(op, dtype=complex))
