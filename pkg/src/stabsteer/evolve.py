"""Density-matrix evolution, steady states, correlators, Kraus maps, and
stochastic protocol sampling.

Application paths for the generator:
  * dense   -- the 4^N x 4^N superoperator matrix (N <= 6), evolved with
               scaling-and-squaring matrix exponentials;
  * matvec  -- term-by-term application to a 2^N x 2^N array via bit-mask
               kernels (a Pauli acts as an XOR index permutation with a
               phase vector, a Z-type projector as a 0/1 diagonal mask);
               nothing of superoperator size is ever materialized;
  * trajectories -- Poisson-timed measurement and feedback sampling of a
               FeedbackProtocol with counter-based per-trajectory RNG.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.linalg import expm

from .errors import CapacityError, ConstraintError, IntegrationError
from .lindblad import (
    SUPEROP_QUBIT_LIMIT,
    AssembledModel,
    LindbladModel,
    assemble,
)
from .pauli import PauliString, PauliSum
from .potential import StabilizerPotential

MATVEC_QUBIT_LIMIT = 12


def svd_generalized_measurement(op: np.ndarray, tol=1e-10):
    """Split a jump operator as L = U E with E positive semidefinite.

    U = W V^dag from the full SVD L = W S V^dag (unitary everywhere, with a
    deterministic completion on the cokernel) and E = V S V^dag.  The
    `projective` flag is True when every singular value is 0 or 1, in which
    case the generalized measurement reduces to a projection.
    """
    op = np.asarray(op, dtype=complex)
    if not np.any(op):
        raise ConstraintError("zero jump operator has no polar decomposition")
    w, s, vh = np.linalg.svd(op)
    unitary = w @ vh
    positive = vh.conj().T @ np.diag(s) @ vh
    projective = bool(np.all((np.abs(s) < tol) | (np.abs(s - 1) < tol)))
    return unitary, positive, projective


# -- bit-mask kernels ------------------------------------------------------------


def _parity_vec(z_mask: int, n: int) -> np.ndarray:
    """(-1)^{popcount(z & b)} over basis labels b = 0 .. 2^n - 1."""
    b = np.arange(2 ** n, dtype=np.int64)
    par = np.zeros(2 ** n, dtype=np.int64)
    zz = z_mask
    while zz:
        bit = zz & -zz
        par ^= ((b & bit) != 0).astype(np.int64)
        zz ^= bit
    return 1.0 - 2.0 * par


def _xor_axes(x_mask: int, n: int):
    """Compact (shape, slices) pair realizing index ^ x_mask on a length-2^n
    axis: runs of equal flip-flags are merged into single axes so the strided
    copy touches large contiguous blocks.  Flipping a run of k set bits is k
    single-bit reversals, i.e. a (2,)*k block reversal, not one (2^k)-axis
    reversal, so set bits stay as individual axes while clear runs merge."""
    shape, slices = [], []
    k = n - 1
    while k >= 0:
        if (x_mask >> k) & 1:
            shape.append(2)
            slices.append(slice(None, None, -1))
            k -= 1
        else:
            run = 0
            while k >= 0 and not (x_mask >> k) & 1:
                run += 1
                k -= 1
            shape.append(2 ** run)
            slices.append(slice(None))
    return tuple(shape), tuple(slices)


class Masked:
    """Operator K with K|b> = w[b] |b ^ x>: a weighted XOR permutation.

    Pauli strings, Z-type projectors, dressed jumps, and all their products
    have this form; it is the closed family behind the matvec engine.  The
    XOR permutation is applied through reversed-stride views, never through
    index arrays.
    """

    __slots__ = ("x", "w", "idx", "n")

    def __init__(self, x: int, w: np.ndarray):
        self.x = x
        self.w = w
        self.n = int(np.log2(len(w)) + 0.5)
        self.idx = np.arange(len(w), dtype=np.intp) ^ x

    @classmethod
    def from_pauli(cls, p: PauliString) -> "Masked":
        return cls(p.x, p.phase * _parity_vec(p.z, p.n_qubits).astype(complex))

    @classmethod
    def from_jump(cls, jump) -> "Masked":
        pot = jump.potential
        n = pot.n_qubits
        diag = np.ones(2 ** n)
        for a, nv in jump.outcomes:
            s = pot.stabilizers[a]
            if s.x != 0:
                raise CapacityError(
                    "matvec kernels require Z-type stabilizer projectors"
                )
            diag *= 0.5 * (1.0 + nv * _parity_vec(s.z, n))
        base = cls.from_pauli(jump.base)
        return cls(base.x, jump.prefactor * base.w * diag)

    def dagger(self) -> "Masked":
        # K^dag |b> = conj(w[b ^ x]) |b ^ x>
        return Masked(self.x, np.conjugate(self.w[self.idx]))

    def __matmul__(self, other: "Masked") -> "Masked":
        # (self @ other)|b> = other.w[b] self.w[b ^ other.x] |b ^ x1 ^ x2>
        return Masked(self.x ^ other.x, other.w * self.w[other.idx])

    def is_zero(self, tol=0.0) -> bool:
        return not np.any(np.abs(self.w) > tol)

    def left(self, rho):
        """K @ rho."""
        out = self.w[:, None] * rho
        if self.x:
            shape, slices = _xor_axes(self.x, self.n)
            view = out.reshape(shape + (rho.shape[1],))[slices]
            out = np.ascontiguousarray(view).reshape(rho.shape)
        return out

    def right(self, rho):
        """rho @ K."""
        if self.x:
            shape, slices = _xor_axes(self.x, self.n)
            view = rho.reshape((rho.shape[0],) + shape)[(slice(None),) + slices]
            rho = np.ascontiguousarray(view).reshape(rho.shape)
        return rho * self.w[None, :]

    def to_dense(self):
        dim = len(self.w)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[self.idx, np.arange(dim)] = self.w
        return mat


def _sandwich(rho, ki: Masked, kj: Masked):
    """K_i @ rho @ K_j^dag in one fused pass (gather via strided views)."""
    out = (ki.w[:, None] * rho) * np.conjugate(kj.w)[None, :]
    if ki.x == 0 and kj.x == 0:
        return out
    rshape, rslices = _xor_axes(ki.x, ki.n)
    cshape, cslices = _xor_axes(kj.x, kj.n)
    view = out.reshape(rshape + cshape)[rslices + cslices]
    return np.ascontiguousarray(view).reshape(rho.shape)


try:
    import numba as _numba

    @_numba.njit(parallel=True, fastmath=True, cache=True)
    def _fused_rhs_kernel(rho, out, ex, syn, a_t, b_t, bp_t, c_t, ad):
        dim = rho.shape[0]
        nsite = ex.shape[0]
        for r in _numba.prange(dim):
            for c in range(dim):
                acc = -0.5 * (ad[r] + ad[c]) * rho[r, c]
                for k in range(nsite):
                    sr = syn[k, r]
                    sc = syn[k, c]
                    rx = r ^ ex[k]
                    cx = c ^ ex[k]
                    acc += a_t[k, sr ^ 3, sc ^ 3] * rho[rx, cx]
                    acc += b_t[k, sr ^ 3, sc] * rho[rx, c]
                    acc += bp_t[k, sr, sc ^ 3] * rho[r, cx]
                    acc += c_t[k, sr, sc] * rho[r, c]
                out[r, c] = acc

    _HAVE_NUMBA = True
except Exception:                                    # pragma: no cover
    _HAVE_NUMBA = False


class _FusedConditionalFlip:
    """Fused bit-mask evaluation of L(rho) for conditional-flip models.

    Applies when every jump is (identity or single-site X) dressed with
    projectors measurable from that site's adjacent-stabilizer syndrome and
    the Hamiltonian is a sum of single-site X terms: then every pair
    contribution reduces to a per-site 4x4 syndrome table multiplying one of
    rho[r^x, c^x], rho[r^x, c], rho[r, c^x], rho[r, c]."""

    def __init__(self, model, h_terms, pairs, anti_diag):
        if not _HAVE_NUMBA:
            raise CapacityError("numba unavailable")
        n = model.n_qubits
        dim = 2 ** n
        pot = model.potential
        # per-site syndrome of the adjacent stabilizers (at most 2 bits)
        adjacency = {}
        for x in range(n):
            p = PauliString(n, 1 << x, 0)
            acset = pot.anticommuting_set(p)
            if len(acset) > 2:
                raise CapacityError("site touches more than two stabilizers")
            adjacency[x] = acset
        basis_states = np.arange(dim, dtype=np.int64)
        syn = np.zeros((n, dim), dtype=np.uint8)
        for x in range(n):
            for bit, a in enumerate(adjacency[x]):
                z = pot.stabilizers[a].z
                if pot.stabilizers[a].x:
                    raise CapacityError("fused path needs Z-type stabilizers")
                par = np.zeros(dim, dtype=np.uint8)
                zz = z
                while zz:
                    b = zz & -zz
                    par ^= ((basis_states & b) != 0).astype(np.uint8)
                    zz ^= b
                syn[x] |= par << bit
        reps = np.zeros((n, 4), dtype=np.int64)
        seen = np.zeros((n, 4), dtype=bool)
        for x in range(n):
            for r in range(dim):
                s = syn[x, r]
                if not seen[x, s]:
                    seen[x, s] = True
                    reps[x, s] = r

        def site_of(mask):
            if mask == 0 or mask & (mask - 1):
                return None
            return int(mask).bit_length() - 1

        def rep_values(x, w):
            vals = w[reps[x]]
            if not np.allclose(w, vals[syn[x]], rtol=0, atol=1e-13):
                raise CapacityError("weight not syndrome measurable")
            return vals

        a_t = np.zeros((n, 4, 4), dtype=complex)
        b_t = np.zeros((n, 4, 4), dtype=complex)
        bp_t = np.zeros((n, 4, 4), dtype=complex)
        c_t = np.zeros((n, 4, 4), dtype=complex)
        for g, ki, kj, prod in pairs:
            if prod is not None:
                raise CapacityError("nondiagonal pair product")
            xi, xj = site_of(ki.x), site_of(kj.x)
            if ki.x and xi is None or kj.x and xj is None:
                raise CapacityError("multi-site flip")
            site = xi if ki.x else xj
            if site is None:
                # both diagonal: find a site whose syndrome resolves both
                site = next(
                    (x for x in range(n)
                     if _measurable(ki.w, syn[x], reps[x])
                     and _measurable(kj.w, syn[x], reps[x])),
                    None,
                )
                if site is None:
                    raise CapacityError("projector pair not single-site local")
            if ki.x and kj.x:
                if xi != xj:
                    raise CapacityError("cross-site flip pair")
                table = a_t
            elif ki.x:
                table = b_t
            elif kj.x:
                table = bp_t
            else:
                table = c_t
            wi = rep_values(site, ki.w)
            wj = rep_values(site, kj.w)
            table[site] += g * np.outer(wi, np.conjugate(wj))
        ex = np.zeros(n, dtype=np.int64)
        for x in range(n):
            ex[x] = 1 << x
        for coeff, hk in h_terms:
            x = site_of(hk.x)
            if x is None or np.any(hk.w != hk.w[0]):
                raise CapacityError("Hamiltonian term is not a bare X")
            b_t[x] += -1j * coeff * hk.w[0]
            bp_t[x] += 1j * np.conjugate(coeff * hk.w[0])
        self._args = (
            ex, syn, a_t, b_t, bp_t, c_t, anti_diag.astype(float)
        )
        self.dim = dim

    def apply(self, rho):
        out = np.empty_like(rho, dtype=complex)
        _fused_rhs_kernel(np.ascontiguousarray(rho, dtype=complex), out,
                          *self._args)
        return out


def _measurable(w, syn_x, reps_x):
    return np.allclose(w, w[reps_x][syn_x], rtol=0, atol=1e-13)


class SuperoperatorHandle:
    """Apply L (or its adjoint, the Heisenberg generator) to a 2^N x 2^N array.

    mode 'dense' caches the superoperator matrix; 'matvec' works term by
    term with Masked kernels and never allocates beyond a few state-sized
    scratch arrays.  Conditional-flip models (single-site X jumps dressed
    with adjacent-bond projectors) are routed through a fused per-site
    syndrome-table kernel when numba is available.
    """

    def __init__(self, model, mode="auto", adjoint=False):
        if isinstance(model, AssembledModel):
            raise ConstraintError("wrap the undiagonalized LindbladModel")
        self.model = model
        self.adjoint = adjoint
        n = model.n_qubits
        if mode == "auto":
            mode = "dense" if n <= SUPEROP_QUBIT_LIMIT else "matvec"
        self.mode = mode
        if mode == "dense":
            if n > SUPEROP_QUBIT_LIMIT:
                raise CapacityError(
                    f"dense superoperator beyond {SUPEROP_QUBIT_LIMIT} qubits"
                )
            mat = model.to_superoperator()
            self._mat = mat.conj().T if adjoint else mat
        elif mode == "matvec":
            if n > MATVEC_QUBIT_LIMIT:
                raise CapacityError(
                    f"{n} qubits exceeds the matvec guard ({MATVEC_QUBIT_LIMIT})"
                )
            self._build_terms()
        else:
            raise ConstraintError(f"unknown mode {mode!r}")

    def _build_terms(self):
        model = self.model
        n = model.n_qubits
        self._h_terms = [
            (coeff, Masked.from_pauli(p)) for coeff, p in model.hamiltonian.items()
        ]
        kernels = [Masked.from_jump(j) for j in model.basis]
        self._pairs = []          # (gamma, K_i, K_j, nondiag product or None)
        diag = np.zeros(2 ** n, dtype=complex)
        for i in range(len(kernels)):
            for j in range(len(kernels)):
                g = model.gamma[i, j]
                if abs(g) < 1e-15:
                    continue
                ki, kj = kernels[i], kernels[j]
                prod = kj.dagger() @ ki            # A_j^dag A_i
                if prod.is_zero(1e-15):
                    self._pairs.append((g, ki, kj, None))
                elif prod.x == 0:
                    diag += g * prod.w
                    self._pairs.append((g, ki, kj, None))
                else:
                    self._pairs.append((g, ki, kj, prod))
        if np.abs(diag.imag).max(initial=0.0) > 1e-10 * max(
            1.0, np.abs(diag).max(initial=0.0)
        ):
            raise ConstraintError("non-Hermitian aggregated decay diagonal")
        self._anti_diag = diag.real
        self._fused = None
        if not self.adjoint:
            try:
                self._fused = _FusedConditionalFlip(
                    model, self._h_terms, self._pairs, self._anti_diag
                )
            except (CapacityError, ConstraintError):
                self._fused = None

    # -- application ----------------------------------------------------------

    def apply(self, op: np.ndarray) -> np.ndarray:
        dim = 2 ** self.model.n_qubits
        op = np.asarray(op, dtype=complex).reshape(dim, dim)
        if self.mode == "dense":
            return (self._mat @ op.reshape(-1)).reshape(dim, dim)
        if self.adjoint:
            return self._apply_adjoint(op)
        return self._apply_forward(op)

    def _apply_forward(self, rho):
        if self._fused is not None:
            return self._fused.apply(rho)
        out = np.zeros_like(rho, dtype=complex)
        for coeff, hk in self._h_terms:
            out += (-1j * coeff) * hk.left(rho)
            out += (1j * coeff) * hk.right(rho)
        for g, ki, kj, prod in self._pairs:
            out += g * _sandwich(rho, ki, kj)
            if prod is not None:
                out -= 0.5 * g * (prod.left(rho) + prod.right(rho))
        d = self._anti_diag
        out -= 0.5 * (d[:, None] + d[None, :]) * rho
        return out

    def _apply_adjoint(self, a):
        """L^dag(A) = i[H,A] + sum gamma_ij (A_j^dag A A_i - {A_j^dag A_i, A}/2)."""
        out = np.zeros_like(a, dtype=complex)
        for coeff, hk in self._h_terms:
            out += (1j * coeff) * hk.left(a)
            out += (-1j * coeff) * hk.right(a)
        for g, ki, kj, prod in self._pairs:
            out += g * _sandwich(a, kj.dagger(), ki.dagger())
            if prod is not None:
                out -= 0.5 * g * (prod.left(a) + prod.right(a))
        d = self._anti_diag
        out -= 0.5 * (d[:, None] + d[None, :]) * a
        return out

    def matrix(self) -> np.ndarray:
        if self.mode != "dense":
            raise CapacityError("superoperator matrix available in dense mode only")
        return self._mat


# -- configuration and results ------------------------------------------------------


@dataclass
class SimulationConfig:
    integrator: str = "auto"         # dense_exponential | adaptive_rk | auto
    t_final: float = 10.0
    dt: float = 0.1                  # output grid spacing
    rtol: float = 1e-8
    atol: float = 1e-10
    observables: list = field(default_factory=list)  # (name, PauliSum | ndarray)
    seed: int = 0
    n_traj: int = 1000
    store_states: bool = False

    def __post_init__(self):
        if self.t_final <= 0 or self.dt <= 0:
            raise ConstraintError("times must be positive")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConstraintError("tolerances must be positive")


@dataclass
class EvolutionResult:
    times: np.ndarray
    expectations: dict                  # name -> complex ndarray
    final_rho: np.ndarray | None = None
    states: list | None = None
    stderr: dict | None = None
    trace_drift: float = 0.0


def _as_matrix(op, n_qubits):
    if isinstance(op, PauliSum):
        return op.to_dense()
    if isinstance(op, PauliString):
        return op.to_dense()
    return np.asarray(op, dtype=complex)


def validate_density_matrix(rho, tol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ConstraintError("rho is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ConstraintError("rho is not normalized")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ConstraintError("rho is not positive semidefinite")
    return rho


# -- exact evolution -----------------------------------------------------------------


def _rk45_step(f, y, t, h):
    """One Dormand-Prince 5(4) step; returns (y5, error_estimate)."""
    k1 = f(y)
    k2 = f(y + h * (k1 / 5))
    k3 = f(y + h * (3 * k1 / 40 + 9 * k2 / 40))
    k4 = f(y + h * (44 * k1 / 45 - 56 * k2 / 15 + 32 * k3 / 9))
    k5 = f(y + h * (19372 * k1 / 6561 - 25360 * k2 / 2187
                    + 64448 * k3 / 6561 - 212 * k4 / 729))
    k6 = f(y + h * (9017 * k1 / 3168 - 355 * k2 / 33 + 46732 * k3 / 5247
                    + 49 * k4 / 176 - 5103 * k5 / 18656))
    y5 = y + h * (35 * k1 / 384 + 500 * k3 / 1113 + 125 * k4 / 192
                  - 2187 * k5 / 6784 + 11 * k6 / 84)
    k7 = f(y5)
    y4 = y + h * (5179 * k1 / 57600 + 7571 * k3 / 16695 + 393 * k4 / 640
                  - 92097 * k5 / 339200 + 187 * k6 / 2100 + k7 / 40)
    return y5, np.abs(y5 - y4).max()


def _integrate_adaptive(handle, rho, t_span, rtol, atol, renormalize=True,
                        callback=None):
    """Adaptive RK45 with per-step Hermitization and trace renormalization."""
    t0, t1 = t_span
    t = t0
    h = min(0.1, (t1 - t0) / 10 + 1e-12)
    f = handle.apply
    while t < t1 - 1e-12:
        h = min(h, t1 - t)
        y5, err = _rk45_step(f, rho, t, h)
        scale = atol + rtol * max(np.abs(rho).max(), np.abs(y5).max())
        if err <= scale or h < 1e-10:
            t += h
            rho = y5
            rho = 0.5 * (rho + rho.conj().T)
            if renormalize:
                tr = np.trace(rho).real
                if abs(tr - 1.0) > 1e-6:
                    raise IntegrationError(
                        f"trace drift {tr - 1.0:.3e} at t={t:.4g} (step {h:.3g})"
                    )
                rho = rho / tr
            if callback is not None:
                callback(t, rho)
        fac = 0.9 * (scale / (err + 1e-300)) ** 0.2
        h = h * min(4.0, max(0.2, fac))
    return rho


def evolve(rho0, model, config: SimulationConfig) -> EvolutionResult:
    """Integrate d rho/dt = L(rho) and record observables on a uniform grid.

    rho0 must be a valid density matrix (checked to 1e-10).  Dense mode uses
    the matrix exponential of the superoperator over each output interval;
    matvec mode uses the adaptive Runge-Kutta driver with per-step trace
    renormalization.
    """
    n = model.n_qubits
    rho = validate_density_matrix(rho0)
    mode = config.integrator
    if mode == "auto":
        mode = "dense_exponential" if n <= SUPEROP_QUBIT_LIMIT else "adaptive_rk"
    obs = [(name, _as_matrix(op, n)) for name, op in config.observables]
    n_steps = int(round(config.t_final / config.dt))
    times = np.arange(n_steps + 1) * config.dt
    records = {name: np.zeros(n_steps + 1, dtype=complex) for name, _ in obs}
    states = [] if config.store_states else None

    def record(k, rho_k):
        for name, mat in obs:
            records[name][k] = np.trace(mat @ rho_k)
        if states is not None:
            states.append(rho_k.copy())

    record(0, rho)
    max_drift = 0.0
    if mode == "dense_exponential":
        handle = SuperoperatorHandle(model, mode="dense")
        prop = expm(handle.matrix() * config.dt)
        vec = rho.reshape(-1)
        for k in range(1, n_steps + 1):
            vec = prop @ vec
            rho_k = vec.reshape(rho.shape)
            rho_k = 0.5 * (rho_k + rho_k.conj().T)
            drift = abs(np.trace(rho_k).real - 1.0)
            max_drift = max(max_drift, drift)
            if drift > 1e-6:
                raise IntegrationError(
                    f"trace drift {drift:.3e} at step {k}"
                )
            record(k, rho_k)
        rho = rho_k if n_steps else rho
    elif mode == "adaptive_rk":
        handle = SuperoperatorHandle(
            model, mode="matvec" if n > SUPEROP_QUBIT_LIMIT else "auto"
        )
        for k in range(1, n_steps + 1):
            rho = _integrate_adaptive(
                handle, rho, (times[k - 1], times[k]), config.rtol, config.atol
            )
            record(k, rho)
    else:
        raise ConstraintError(f"unknown integrator {config.integrator!r}")
    return EvolutionResult(
        times, records, final_rho=rho, states=states, trace_drift=max_drift
    )


# -- steady states --------------------------------------------------------------------


def _null_space(mat, rtol=1e-10):
    """Orthonormal null-space basis of a square matrix via SVD."""
    _, s, vh = np.linalg.svd(mat)
    cutoff = rtol * max(1.0, s.max(initial=0.0))
    rank = int(np.sum(s > cutoff))
    return vh[rank:].conj().T


@dataclass
class SteadyStateResult:
    state: np.ndarray
    basis: list                    # orthonormal fixed-point basis (vectorized)
    residual: float
    degenerate: bool
    history: list = field(default_factory=list)


def steady_state_solve(model, mode="auto", tol=1e-9, t_max=400.0) -> SteadyStateResult:
    """Find rho with L(rho) = 0, PSD and trace one.

    Dense mode (<= 6 qubits) takes the null space of the superoperator and
    reports every basis state when it is degenerate.  Matvec mode integrates
    from the maximally mixed state until ||d rho/dt|| <= 1e-10.
    """
    n = model.n_qubits
    if mode == "auto":
        mode = "dense" if n <= SUPEROP_QUBIT_LIMIT else "evolve"
    dim = 2 ** n
    if mode == "dense":
        mat = SuperoperatorHandle(model, mode="dense").matrix()
        right = _null_space(mat, rtol=1e-10)
        if right.shape[1] == 0:
            vals, vecs = np.linalg.eig(mat)
            right = vecs[:, [int(np.argmin(np.abs(vals)))]]
        basis = [right[:, i] for i in range(right.shape[1])]
        degenerate = len(basis) > 1
        # canonical state: spectral projection of the maximally mixed state
        # onto the fixed space (what the dynamics actually reaches from 1/d)
        left = _null_space(mat.conj().T, rtol=1e-10)
        if left.shape[1] != right.shape[1]:
            left = right
        mixed = (np.eye(dim, dtype=complex) / dim).reshape(-1)
        overlap = left.conj().T @ right
        coeffs = np.linalg.lstsq(overlap, left.conj().T @ mixed, rcond=None)[0]
        rho = (right @ coeffs).reshape(dim, dim)
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr) < 1e-12:
            raise IntegrationError("no trace-class fixed point found")
        rho = rho / tr
        residual = float(
            np.linalg.norm(mat @ rho.reshape(-1)) / np.linalg.norm(rho)
        )
        return SteadyStateResult(rho, basis, residual, degenerate)
    handle = SuperoperatorHandle(model, mode="matvec")
    rho = np.eye(dim, dtype=complex) / dim
    t, span, history = 0.0, 2.0, []
    rtol = 1e-6
    while t < t_max:
        rho = _integrate_adaptive(handle, rho, (t, t + span), rtol, rtol * 1e-2)
        t += span
        deriv = np.linalg.norm(handle.apply(rho))
        history.append((t, deriv))
        if deriv <= tol * max(1.0, np.linalg.norm(rho)):
            return SteadyStateResult(rho, [rho.reshape(-1)], float(deriv), False,
                                     history)
        # tighten the integrator as the noise floor is approached
        if deriv < 1e2 * tol:
            rtol = 1e-12
        elif deriv < 1e4 * tol:
            rtol = 1e-9
        span = min(2 * span, 20.0)
    raise IntegrationError(
        f"steady state not converged by t={t_max}: residual history {history[-3:]}"
    )


# -- correlation functions --------------------------------------------------------------


def correlation(model, op_a, op_b, times, sigma=None, mode="auto"):
    """<A(t) B(0)> = tr[ e^{L^dag t}(A) . B . sigma ] / tr sigma.

    Computed in the Heisenberg picture by adjoint evolution of A.  `sigma`
    defaults to the model potential's exp(-Phi).
    """
    n = model.n_qubits
    if sigma is None:
        sigma = model.potential.sigma()
    z = np.trace(sigma).real
    if not np.isfinite(z) or abs(z) < 1e-300:
        raise ConstraintError("sigma is not normalizable")
    a_mat = _as_matrix(op_a, n)
    b_sigma = _as_matrix(op_b, n) @ sigma
    times = np.asarray(times, dtype=float)
    out = np.zeros(len(times), dtype=complex)
    order = np.argsort(times)
    if mode == "auto":
        # adjoint integration beats repeated matrix exponentials beyond ~4 qubits
        mode = "dense" if n <= 4 else "matvec"
    if mode == "dense":
        mat = SuperoperatorHandle(model, mode="dense", adjoint=True).matrix()
        for k in order:
            a_t = (expm(mat * times[k]) @ a_mat.reshape(-1)).reshape(a_mat.shape)
            out[k] = np.trace(a_t @ b_sigma) / z
        return out
    handle = SuperoperatorHandle(model, mode="matvec", adjoint=True)
    t_prev = 0.0
    a_t = a_mat.astype(complex)
    for k in order:
        if times[k] > t_prev:
            a_t = _integrate_adaptive(
                handle, a_t, (t_prev, times[k]), 1e-8, 1e-10, renormalize=False
            )
            t_prev = times[k]
        out[k] = np.trace(a_t @ b_sigma) / z
    return out


# -- Kraus step ---------------------------------------------------------------------------


def kraus_step(model, dt: float):
    """First-order Kraus operators of e^{L dt} for a diagonal-gamma model.

    K_0 = 1 - (iH + sum_k r_k L_k^dag L_k / 2) dt and K_k = L_k sqrt(r_k dt);
    the completeness defect sum K^dag K - 1 is O(dt^2).
    """
    if dt <= 0:
        raise ConstraintError("dt must be positive")
    asm = model if isinstance(model, AssembledModel) else assemble(model)
    n = asm.potential.n_qubits
    dim = 2 ** n
    h = asm.hamiltonian.to_dense()
    decay = np.zeros((dim, dim), dtype=complex)
    ops = []
    for rate, op in asm.jumps:
        ld = op.to_dense()
        decay += 0.5 * rate * (ld.conj().T @ ld)
        ops.append(np.sqrt(rate * dt) * ld)
    k0 = np.eye(dim) - (1j * h + decay) * dt
    return [k0] + ops


def kraus_completeness_defect(kraus_ops) -> float:
    dim = kraus_ops[0].shape[0]
    total = sum(k.conj().T @ k for k in kraus_ops)
    return float(np.abs(total - np.eye(dim)).max())


# -- trajectory sampling --------------------------------------------------------------------


def trajectory_sample(protocol, rho0, t_final, n_traj, seed,
                      observables, n_times=21):
    """Monte Carlo unraveling of a measurement-and-feedback protocol.

    Each trajectory draws exponential waiting times at the protocol rate;
    at an event the stabilizers are measured (Born sampling), readout flips
    are applied with probability q per stabilizer, and the recorded row's
    feedback fires with its probability.  Between events the state is
    unchanged (the protocol generator has no drift part).  Returns ensemble
    means with standard errors.
    """
    pot = protocol.potential
    n = pot.n_qubits
    if n > 10:
        raise CapacityError("trajectory sampling is a small-register tool")
    dim = 2 ** n
    rho0 = validate_density_matrix(rho0)
    times = np.linspace(0.0, t_final, n_times)
    obs = [(name, _as_matrix(op, n)) for name, op in observables]
    words = protocol.outcome_words()
    projs = {}
    for w in words:
        proj = np.eye(dim, dtype=complex)
        for a, nv in zip(protocol.measured, w):
            proj = proj @ (np.eye(dim) + nv * pot.stabilizers[a].to_dense()) / 2
        projs[w] = proj
    feedback = {}
    for w in words:
        row = protocol.row_for(w)
        if row is not None and row.feedback is not None:
            feedback[w] = (_as_matrix(row.feedback, n), row.probability)
        else:
            feedback[w] = (None, 0.0)
    rate = protocol.measurement_rate
    q = protocol.readout_q

    sums = {name: np.zeros(n_times, dtype=complex) for name, _ in obs}
    sq_sums = {name: np.zeros(n_times, dtype=complex) for name, _ in obs}
    for k in range(n_traj):
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        rho = rho0.copy()
        t = 0.0
        snap = np.zeros((len(obs), n_times), dtype=complex)
        next_idx = 0
        while True:
            wait = rng.exponential(1.0 / rate) if rate > 0 else np.inf
            t_event = t + wait
            while next_idx < n_times and times[next_idx] <= t_event + 1e-15:
                for io, (_, mat) in enumerate(obs):
                    snap[io, next_idx] = np.trace(mat @ rho)
                next_idx += 1
            if next_idx >= n_times or not np.isfinite(t_event):
                break
            t = t_event
            # Born-sample the outcome word
            probs = np.array([
                max(np.trace(projs[w] @ rho).real, 0.0) for w in words
            ])
            probs = probs / probs.sum()
            w = words[rng.choice(len(words), p=probs)]
            rho = projs[w] @ rho @ projs[w]
            rho = rho / np.trace(rho).real
            recorded = tuple(
                -nv if rng.random() < q else nv for nv in w
            )
            fb, p_fb = feedback.get(recorded, (None, 0.0))
            if fb is not None and rng.random() < p_fb:
                rho = fb @ rho @ fb.conj().T
                rho = rho / np.trace(rho).real
        for io, (name, _) in enumerate(obs):
            sums[name] += snap[io]
            sq_sums[name] += snap[io] * np.conjugate(snap[io])
    means = {name: sums[name] / n_traj for name, _ in obs}
    stderr = {}
    for name, _ in obs:
        var = np.maximum(
            sq_sums[name].real / n_traj - np.abs(means[name]) ** 2, 0.0
        )
        stderr[name] = np.sqrt(var / max(n_traj - 1, 1))
    return EvolutionResult(times, means, stderr=stderr)
