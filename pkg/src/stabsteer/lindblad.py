"""Assembling Lindbladians over a dressed-jump basis.

The generator is

    L(rho) = -i[H, rho] + sum_ij gamma_ij (A_i rho A_j^dag
                                           - {A_j^dag A_i, rho}/2)

with the jumps A_i drawn from the eigenoperator basis of
S(A) = sigma^{1/2} A sigma^{-1/2}.  The m-matrix ansatz, the time-reversal
transformation (gamma~_ij = gamma_{pi(j)pi(i)} c_i c_j), Davies generators,
and the verification helpers (stationarity residual, weak/strong symmetry,
rate-matrix diagonalization) all live here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CapacityError,
    ConstraintError,
    DimensionError,
    InvalidModelError,
    NonStationaryError,
)
from .pauli import PauliString, PauliSum, identity, parse_pauli
from .potential import (
    DressedJump,
    StabilizerPotential,
    all_dressings,
    decompose_operator,
    dressed_jump,
)

SUPEROP_QUBIT_LIMIT = 6
STATIONARITY_TOL = 1e-10


def _jump_key(j: DressedJump):
    return (j.base.x, j.base.z, j.outcomes)


class LindbladModel:
    """A Lindbladian over an ordered dressed-jump basis.

    Basis jumps are canonicalized to prefactor 1 (phases are absorbed into
    gamma), the involution pi with A_{pi(i)} = A_i^dag is resolved at
    construction, and gamma is checked Hermitian and PSD up to roundoff.
    """

    def __init__(self, potential, basis, gamma, hamiltonian=None, m=None,
                 psd_padding=0.0, check=True):
        self.potential: StabilizerPotential = potential
        gamma = np.array(gamma, dtype=complex)
        basis = list(basis)
        # fold jump prefactors into gamma so the basis is phase-canonical
        phases = np.array([j.prefactor for j in basis], dtype=complex)
        if np.any(phases != 1.0):
            gamma = gamma * np.outer(phases, phases.conj())
            basis = [
                DressedJump(j.potential, j.base, j.outcomes, 1.0) for j in basis
            ]
        self.basis: list[DressedJump] = basis
        self.gamma = gamma
        self.hamiltonian: PauliSum = (
            hamiltonian if hamiltonian is not None else PauliSum(potential.n_qubits)
        )
        self.m = None if m is None else np.array(m, dtype=complex)
        self.psd_padding = psd_padding

        index = {_jump_key(j): i for i, j in enumerate(basis)}
        if len(index) != len(basis):
            raise ConstraintError("duplicate jumps in basis")
        pi = np.empty(len(basis), dtype=int)
        for i, j in enumerate(basis):
            k = index.get(_jump_key(j.adjoint()))
            if k is None:
                raise ConstraintError(
                    f"basis is not closed under adjoints (missing dagger of {j})"
                )
            pi[i] = k
        self.pi = pi
        self.c = np.array([j.c for j in basis])

        if check and len(basis):
            if gamma.shape != (len(basis), len(basis)):
                raise DimensionError("gamma shape does not match basis")
            if np.abs(gamma - gamma.conj().T).max() > 1e-10 * max(
                1.0, np.abs(gamma).max()
            ):
                raise ConstraintError("gamma is not Hermitian")
            if len(basis) and self.min_gamma_eig() < -1e-9 * max(
                1.0, np.abs(gamma).max()
            ):
                raise InvalidModelError(
                    f"gamma has negative eigenvalue {self.min_gamma_eig():.3e}"
                )
            if not self.hamiltonian.is_hermitian():
                raise ConstraintError("Hamiltonian is not Hermitian")

    # -- inspection ----------------------------------------------------------

    @property
    def n_qubits(self) -> int:
        return self.potential.n_qubits

    def min_gamma_eig(self) -> float:
        if not len(self.basis):
            return 0.0
        return float(np.linalg.eigvalsh((self.gamma + self.gamma.conj().T) / 2)[0])

    def dense_jumps(self) -> list[np.ndarray]:
        return [j.dense() for j in self.basis]

    def _dense_cache(self):
        # models are immutable after construction, so cache the heavy parts
        if not hasattr(self, "_cache"):
            h = self.hamiltonian.to_dense()
            if self.basis:
                mats = np.stack(self.dense_jumps())
                # decay operator sum_ij gamma_ij A_j^dag A_i
                v = np.einsum("ij,iab->jab", self.gamma, mats)
                decay = np.einsum("jba,jbc->ac", mats.conj(), v)
            else:
                mats = np.zeros((0, h.shape[0], h.shape[1]), dtype=complex)
                decay = np.zeros_like(h)
            self._cache = (h, mats, decay)
        return self._cache

    def apply_dense(self, rho: np.ndarray) -> np.ndarray:
        """L(rho) for a dense density matrix."""
        h, mats, decay = self._dense_cache()
        out = -1j * (h @ rho - rho @ h)
        if len(mats):
            arho = mats @ rho
            w = np.einsum("ij,iab->jab", self.gamma, arho)
            out += np.einsum("jab,jcb->ac", w, mats.conj())
        out -= 0.5 * (decay @ rho + rho @ decay)
        return out

    def to_superoperator(self) -> np.ndarray:
        """Dense matrix of L acting on row-major vectorized rho."""
        if self.n_qubits > SUPEROP_QUBIT_LIMIT:
            raise CapacityError(
                f"dense superoperator beyond {SUPEROP_QUBIT_LIMIT} qubits"
            )
        dim = 2 ** self.n_qubits
        eye = np.eye(dim)
        h = self.hamiltonian.to_dense()
        sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        mats = self.dense_jumps()
        for i in range(len(mats)):
            for j in range(len(mats)):
                g = self.gamma[i, j]
                if abs(g) < 1e-15:
                    continue
                adag_a = mats[j].conj().T @ mats[i]
                sup += g * (
                    np.kron(mats[i], mats[j].conj())
                    - 0.5 * np.kron(adag_a, eye)
                    - 0.5 * np.kron(eye, adag_a.T)
                )
        return sup

    def with_hamiltonian(self, extra: PauliSum) -> "LindbladModel":
        """A copy with `extra` added to the Hamiltonian."""
        return LindbladModel(
            self.potential, self.basis, self.gamma,
            self.hamiltonian + extra, m=self.m, psd_padding=self.psd_padding,
        )


def close_jump_basis(jumps, gamma):
    """Append adjoints missing from a jump list, zero-padding gamma."""
    jumps = list(jumps)
    gamma = np.array(gamma, dtype=complex)
    index = {_jump_key(j): i for i, j in enumerate(jumps)}
    for j in list(jumps):
        key = _jump_key(j.adjoint())
        if key not in index:
            index[key] = len(jumps)
            jumps.append(j.adjoint())
    if len(jumps) != gamma.shape[0]:
        grown = np.zeros((len(jumps), len(jumps)), dtype=complex)
        grown[: gamma.shape[0], : gamma.shape[1]] = gamma
        gamma = grown
    return jumps, gamma


def merge_models(a: LindbladModel, b: LindbladModel) -> LindbladModel:
    """Sum of two generators over the union of their bases."""
    if a.potential is not b.potential and (
        a.n_qubits != b.n_qubits
    ):
        raise DimensionError("models act on different registers")
    keys = {}
    basis = []
    for j in list(a.basis) + list(b.basis):
        k = _jump_key(j)
        if k not in keys:
            keys[k] = len(basis)
            basis.append(j)
    n = len(basis)
    gamma = np.zeros((n, n), dtype=complex)
    for model in (a, b):
        idx = [keys[_jump_key(j)] for j in model.basis]
        gamma[np.ix_(idx, idx)] += model.gamma
    return LindbladModel(
        a.potential, basis, gamma, a.hamiltonian + b.hamiltonian, check=False
    )


# -- generic local bases --------------------------------------------------------


def single_site_flip_basis(potential, include_stabilizers=True,
                           sites=None) -> list[DressedJump]:
    """All dressings of single-site X operators (plus, optionally, the
    stabilizers themselves as c = 1 dephasing jumps), deterministically
    ordered."""
    jumps = []
    sites = range(potential.n_qubits) if sites is None else sites
    for x in sites:
        p = parse_pauli(f"X{x}", potential.n_qubits)
        jumps.extend(all_dressings(p, potential))
    if include_stabilizers:
        for s in potential.stabilizers:
            jumps.append(dressed_jump(s, {}, potential))
    jumps.sort(key=lambda j: j.sort_key())
    return jumps


def resolve_pi(basis: list[DressedJump]) -> np.ndarray:
    index = {_jump_key(j): i for i, j in enumerate(basis)}
    return np.array([index[_jump_key(j.adjoint())] for j in basis], dtype=int)


# -- the m-matrix ansatz ---------------------------------------------------------


def is_admissible_m(m: np.ndarray, pi: np.ndarray, tol=1e-10) -> bool:
    """Hermiticity constraint m_ij = conj(m_{pi(i) pi(j)})."""
    return bool(
        np.abs(m - m[np.ix_(pi, pi)].conj()).max()
        <= tol * max(1.0, np.abs(m).max())
    )


def admissible_projection(m: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Project an arbitrary matrix onto the admissible set."""
    return (m + m[np.ix_(pi, pi)].conj()) / 2


def random_admissible_m(basis, rng, scale=1.0, hermitian=False) -> np.ndarray:
    """Random admissible m over `basis`, PSD-padded downstream as needed.

    With hermitian=True the anti-Hermitian (T-odd) part is removed.
    """
    n = len(basis)
    pi = resolve_pi(basis)
    raw = scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    m = admissible_projection(raw, pi)
    if hermitian:
        m = (m + m.conj().T) / 2
        m = admissible_projection(m, pi)
    return m


def _gamma_from_m(m, c, pi):
    # gamma_ij = m_ij c_j + m_{pi(j) pi(i)} c_i
    return m * c[None, :] + m[np.ix_(pi, pi)].T * c[:, None]


def _h_sum_from_m(m, basis, c, pi) -> PauliSum:
    n_qubits = basis[0].potential.n_qubits if basis else 1
    coeffs = 0.5j * (m * c[None, :] - m[np.ix_(pi, pi)].T * c[:, None])
    h = PauliSum(n_qubits)
    sums = [j.to_sum() for j in basis]
    dags = [sums[k] for k in pi]
    for i in range(len(basis)):
        for j in range(len(basis)):
            if abs(coeffs[i, j]) < 1e-15:
                continue
            h = h + coeffs[i, j] * (dags[j] @ sums[i])
    return h.prune()


def minimal_psd_padding(gamma, c, tol=1e-12) -> float:
    """Smallest uniform delta with gamma + 2*delta*diag(c) >= 0."""
    lam = np.linalg.eigvalsh((gamma + gamma.conj().T) / 2)[0]
    if lam >= -tol:
        return 0.0
    lo, hi = 0.0, max(-lam / (2 * c.min()), 1e-30)
    while np.linalg.eigvalsh(gamma + 2 * hi * np.diag(c))[0] < -tol:
        hi *= 2
    for _ in range(80):
        mid = (lo + hi) / 2
        if np.linalg.eigvalsh(gamma + 2 * mid * np.diag(c))[0] < -tol:
            lo = mid
        else:
            hi = mid
    return hi


def from_m_matrix(basis, m, potential=None, pad_to_psd=True) -> LindbladModel:
    """Build the Lindbladian L = -sum m_ij [A_i, T [A_j, .]^dag T^{-1}].

    The unitary and dissipative parts are
        H        = (i/2) sum (m_ij c_j - m_{pi(j)pi(i)} c_i) A_j^dag A_i
        gamma_ij = m_ij c_j + m_{pi(j)pi(i)} c_i
    An indefinite gamma is repaired by the minimal uniform diagonal padding
    of m (recorded on the model as `psd_padding`).
    """
    basis = list(basis)
    if potential is None:
        if not basis:
            raise ConstraintError("empty basis needs an explicit potential")
        potential = basis[0].potential
    m = np.array(m, dtype=complex)
    pi = resolve_pi(basis)
    c = np.array([j.c for j in basis])
    if not is_admissible_m(m, pi):
        raise ConstraintError(
            "m violates the Hermiticity constraint m_ij = conj(m_{pi(i)pi(j)})"
        )
    pad = 0.0
    gamma = _gamma_from_m(m, c, pi)
    if pad_to_psd:
        pad = minimal_psd_padding(gamma, c)
        if pad > 0.0:
            m = m + pad * np.eye(len(basis))
            gamma = _gamma_from_m(m, c, pi)
    h = _h_sum_from_m(m, basis, c, pi)
    return LindbladModel(potential, basis, gamma, h, m=m, psd_padding=pad)


# -- time reversal -----------------------------------------------------------------


def stationarity_residual(model: LindbladModel, rel=True) -> float:
    """||L(sigma)||_F, relative to ||sigma||_F by default (dense check)."""
    sigma = model.potential.sigma()
    res = np.linalg.norm(model.apply_dense(sigma))
    return float(res / np.linalg.norm(sigma)) if rel else float(res)


def time_reverse(model: LindbladModel, tol=STATIONARITY_TOL) -> LindbladModel:
    """The reversed generator L~ = T L^dag T^{-1}, T(rho) = sqrt(sigma) rho sqrt(sigma).

    Defined only on stationary models (the transformation rules are derived
    using L(sigma) = 0); the residual is checked first.  In the m-matrix
    form T acts by m -> m^dag; otherwise the eigenbasis rules
    gamma~_ij = gamma_{pi(j)pi(i)} c_i c_j and the matching Hamiltonian
    transformation are applied.
    """
    if model.n_qubits <= SUPEROP_QUBIT_LIMIT:
        res = stationarity_residual(model)
        if res > tol:
            raise NonStationaryError(res, tol)
    if model.m is not None:
        return from_m_matrix(
            model.basis, model.m.conj().T, model.potential, pad_to_psd=False
        )
    c, pi = model.c, model.pi
    gamma_t = model.gamma[np.ix_(pi, pi)].T * np.outer(c, c)
    # H~ = -1/2 sum (c_i + 1/c_i) h_i A_i - (i/4) sum gamma_ij (c_i/c_j - c_j/c_i) Aj^dag Ai
    h_new = PauliSum(model.n_qubits)
    for coeff, jump in decompose_operator(model.hamiltonian, model.potential):
        ci = jump.c
        h_new = h_new + (-0.5 * (ci + 1.0 / ci) * coeff) * jump.to_sum()
    sums = [j.to_sum() for j in model.basis]
    dags = [sums[k] for k in pi]
    for i in range(len(model.basis)):
        for j in range(len(model.basis)):
            g = model.gamma[i, j]
            if abs(g) < 1e-15:
                continue
            w = -0.25j * g * (c[i] / c[j] - c[j] / c[i])
            if abs(w) < 1e-18:
                continue
            h_new = h_new + w * (dags[j] @ sums[i])
    return LindbladModel(
        model.potential, model.basis, gamma_t, h_new.prune(), m=None
    )


def t_parity_split(model: LindbladModel):
    """Split an m-form model into its T-even part and the T-odd m remainder.

    Returns (t_even_model, m_odd) with m = m_H + m_A, m_H Hermitian.
    """
    if model.m is None:
        raise ConstraintError("t_parity_split needs the m-matrix form")
    m_h = (model.m + model.m.conj().T) / 2
    m_a = (model.m - model.m.conj().T) / 2
    even = from_m_matrix(model.basis, m_h, model.potential, pad_to_psd=True)
    return even, m_a


# -- Davies generators ---------------------------------------------------------------


def davies_generator(h_terms, beta, base_rates, n_qubits=None,
                     seed_paulis=None) -> LindbladModel:
    """Purely dissipative thermal generator for sigma = exp(-beta H_sys).

    `h_terms` is a Pauli sum (list of (coeff, PauliString) with real
    coefficients, mutually commuting) defining the system Hamiltonian in the
    stabilizer eigenbasis.  Jumps are the dressings of `seed_paulis`
    (default: one X per site) grouped by Bohr frequency omega = -2 ln(c)/beta,
    with rates gamma(omega) = base_rates(|omega|) * exp(-beta*omega/2), which
    satisfies the KMS condition gamma(omega) = exp(-beta*omega) gamma(-omega)
    identically.
    """
    h_terms = list(h_terms)
    if n_qubits is None:
        n_qubits = h_terms[0][1].n_qubits
    for cf, p in h_terms:
        if abs(np.imag(cf)) > 1e-12 or not p.is_hermitian():
            raise ConstraintError("H_sys must be Hermitian with real coefficients")
    for i, (_, p) in enumerate(h_terms):
        for _, q in h_terms[i + 1:]:
            if not p.commutes(q):
                raise ConstraintError(
                    "noncommuting H_sys is unsupported: "
                    f"{p} and {q} do not commute"
                )
    pot = StabilizerPotential(
        n_qubits, [(p, -beta * np.real(cf)) for cf, p in h_terms]
    )
    if seed_paulis is None:
        seed_paulis = [parse_pauli(f"X{x}", n_qubits) for x in range(n_qubits)]
        seed_paulis += list(pot.stabilizers)
    basis = []
    for p in seed_paulis:
        basis.extend(all_dressings(p, pot))
    seen = set()
    uniq = []
    for j in sorted(basis, key=lambda j: j.sort_key()):
        if _jump_key(j) not in seen:
            seen.add(_jump_key(j))
            uniq.append(j)
    basis = uniq
    c = np.array([j.c for j in basis])
    if beta != 0.0:
        omega = -2.0 * np.log(c) / beta
    else:
        omega = np.zeros_like(c)
    rates = np.array([base_rates(abs(w)) for w in omega]) * c
    if np.any(rates < 0):
        raise ConstraintError("base_rates must be nonnegative")
    m = np.diag(rates / (2.0 * c))
    return from_m_matrix(basis, m, pot, pad_to_psd=False)


def bohr_frequencies(model: LindbladModel, beta: float) -> np.ndarray:
    return -2.0 * np.log(model.c) / beta


# -- symmetry checks -----------------------------------------------------------------


def _as_dense_unitary(u, n_qubits):
    if isinstance(u, PauliString):
        return u.to_dense()
    if isinstance(u, PauliSum):
        return u.to_dense()
    return np.asarray(u, dtype=complex)


def check_weak_symmetry(model: LindbladModel, u, tol=1e-10) -> bool:
    """True iff L commutes with rho -> U rho U^dag."""
    sup = model.to_superoperator()
    ud = _as_dense_unitary(u, model.n_qubits)
    u_s = np.kron(ud, ud.conj())
    comm = sup @ u_s - u_s @ sup
    return bool(np.abs(comm).max() <= tol * max(1.0, np.abs(sup).max()))


def check_strong_symmetry(model: LindbladModel, u, tol=1e-10) -> bool:
    """True iff L commutes with the left and right actions separately."""
    sup = model.to_superoperator()
    ud = _as_dense_unitary(u, model.n_qubits)
    dim = ud.shape[0]
    left = np.kron(ud, np.eye(dim))
    right = np.kron(np.eye(dim), np.linalg.inv(ud).T)
    scale = max(1.0, np.abs(sup).max())
    ok_l = np.abs(sup @ left - left @ sup).max() <= tol * scale
    ok_r = np.abs(sup @ right - right @ sup).max() <= tol * scale
    return bool(ok_l and ok_r)


# -- canonical (diagonal-gamma) form ---------------------------------------------------


@dataclass
class AssembledModel:
    """Diagonalized form: H plus jumps L_k = sum_i V_ik A_i at rate lam_k."""

    potential: StabilizerPotential
    hamiltonian: PauliSum
    jumps: list = field(default_factory=list)   # (rate, PauliSum) pairs

    def apply_dense(self, rho: np.ndarray) -> np.ndarray:
        h = self.hamiltonian.to_dense()
        out = -1j * (h @ rho - rho @ h)
        for rate, op in self.jumps:
            ld = op.to_dense()
            ldl = ld.conj().T @ ld
            out += rate * (ld @ rho @ ld.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
        return out

    def to_superoperator(self) -> np.ndarray:
        if self.potential.n_qubits > SUPEROP_QUBIT_LIMIT:
            raise CapacityError("dense superoperator capacity exceeded")
        dim = 2 ** self.potential.n_qubits
        eye = np.eye(dim)
        h = self.hamiltonian.to_dense()
        sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for rate, op in self.jumps:
            ld = op.to_dense()
            ldl = ld.conj().T @ ld
            sup += rate * (
                np.kron(ld, ld.conj())
                - 0.5 * np.kron(ldl, eye)
                - 0.5 * np.kron(eye, ldl.T)
            )
        return sup


def assemble(model: LindbladModel, rate_tol=1e-12) -> AssembledModel:
    """Unitary congruence gamma = V diag(lam) V^dag; jumps L_k = sum_i V_ik A_i."""
    lam, vecs = np.linalg.eigh((model.gamma + model.gamma.conj().T) / 2)
    scale = max(1.0, np.abs(model.gamma).max())
    if lam.min() < -1e-10 * scale:
        raise InvalidModelError(
            f"gamma eigenvalue {lam.min():.3e} below the PSD tolerance"
        )
    sums = [j.to_sum() for j in model.basis]
    jumps = []
    for k in range(len(lam)):
        if lam[k] <= rate_tol * scale:
            continue
        op = PauliSum(model.n_qubits)
        for i in range(len(sums)):
            v = vecs[i, k]
            if abs(v) < 1e-14:
                continue
            op = op + v * sums[i]
        jumps.append((float(lam[k]), op.prune()))
    return AssembledModel(model.potential, model.hamiltonian, jumps)
