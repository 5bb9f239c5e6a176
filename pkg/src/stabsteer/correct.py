"""Synthesis of corrective dynamics for errors that break stationarity.

Given Phi and an error (a Pauli term in the Hamiltonian, an incoherent Pauli
channel, or an incoherent channel built from a linear combination of Pauli
strings), these routines construct the jump operators and Hamiltonian
modifications that restore L(sigma) = 0, and export them as executable
measurement-and-feedback protocols, including recalibration against noisy
stabilizer readout.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ConstraintError, DimensionError
from .lindblad import LindbladModel, merge_models
from .pauli import PauliString, PauliSum, identity, parse_pauli
from .potential import (
    DressedJump,
    StabilizerPotential,
    all_dressings,
    dressed_jump,
    projected_jump,
)


@dataclass(frozen=True)
class ErrorSpec:
    """One erroneous term.

    kind 'hamiltonian_pauli': H gains -strength * payload (a PauliString).
    kind 'incoherent_pauli': L gains strength * (P rho P - rho).
    kind 'incoherent_general': payload is [(a_q, P_q), ...] and L gains
    strength * D[sum_q a_q P_q].
    """

    kind: str
    payload: object
    strength: float

    def __post_init__(self):
        if self.kind not in (
            "hamiltonian_pauli", "incoherent_pauli", "incoherent_general"
        ):
            raise ConstraintError(f"unknown error kind {self.kind!r}")
        if self.strength <= 0:
            raise ConstraintError("error strength must be positive")
        if self.kind == "incoherent_general":
            words = [(p.x, p.z) for _, p in self.payload]
            if len(set(words)) != len(words):
                raise ConstraintError("general error terms must be distinct")


@dataclass
class ProtocolRow:
    """One outcome-conditioned feedback entry."""

    word: tuple            # +-1 per measured stabilizer, in measured order
    probability: float
    feedback: PauliSum | None = None

    @property
    def weight(self) -> int:
        return sum(1 for n in self.word if n == -1)


@dataclass
class FeedbackProtocol:
    """Poisson-timed stabilizer measurements with probabilistic feedback.

    At rate `measurement_rate`, measure the stabilizers in `measured`; on
    outcome word n apply the row's feedback unitary with the row's
    probability.  Rows omit outcomes that never receive feedback.
    `readout_q` is the independent per-stabilizer flip probability of the
    recorded outcome.
    """

    potential: StabilizerPotential
    measured: tuple            # stabilizer indices, sorted
    measurement_rate: float
    rows: list = field(default_factory=list)
    readout_q: float = 0.0
    base_pauli: PauliString | None = None

    def __post_init__(self):
        if not 0.0 <= self.readout_q < 1.0:
            raise ConstraintError("readout error rate must lie in [0, 1)")
        for row in self.rows:
            if not -1e-12 <= row.probability <= 1 + 1e-12:
                raise ConstraintError(
                    f"feedback probability {row.probability} outside [0, 1]"
                )

    def outcome_words(self):
        return list(product((1, -1), repeat=len(self.measured)))

    def row_for(self, word):
        for row in self.rows:
            if tuple(row.word) == tuple(word):
                return row
        return None

    def sigma_weight(self, word) -> float:
        """Relative steady-state weight of the syndrome subspace `word`."""
        return float(
            np.exp(sum(n * self.potential.mus[a]
                       for a, n in zip(self.measured, word)))
        )

    # -- export ---------------------------------------------------------------

    def to_records(self):
        recs = []
        for row in sorted(self.rows, key=lambda r: r.word, reverse=True):
            recs.append({
                "outcome_predicate": " ".join(
                    f"S{a}={n:+d}" for a, n in zip(self.measured, row.word)
                ),
                "weight": row.weight,
                "probability": row.probability,
                "feedback_pauli_sum": str(row.feedback) if row.feedback else "",
            })
        return recs

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh,
                fieldnames=[
                    "outcome_predicate", "weight", "probability",
                    "feedback_pauli_sum",
                ],
            )
            writer.writeheader()
            for rec in self.to_records():
                writer.writerow(rec)

    def to_json_dict(self):
        return {
            "measured": list(self.measured),
            "measurement_rate": self.measurement_rate,
            "readout_q": self.readout_q,
            "base_pauli": str(self.base_pauli) if self.base_pauli else None,
            "rows": [
                {
                    "word": list(r.word),
                    "probability": r.probability,
                    "feedback": [
                        [c.real, c.imag, str(p)] for c, p in r.feedback.items()
                    ] if r.feedback else None,
                }
                for r in self.rows
            ],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)

    @classmethod
    def from_json_dict(cls, data, potential):
        rows = []
        for r in data["rows"]:
            fb = None
            if r["feedback"] is not None:
                fb = PauliSum(potential.n_qubits)
                for re_c, im_c, text in r["feedback"]:
                    fb.add(re_c + 1j * im_c, parse_pauli(text, potential.n_qubits))
            rows.append(ProtocolRow(tuple(r["word"]), r["probability"], fb))
        base = (
            parse_pauli(data["base_pauli"], potential.n_qubits)
            if data.get("base_pauli") else None
        )
        return cls(
            potential, tuple(data["measured"]), data["measurement_rate"],
            rows, data.get("readout_q", 0.0), base,
        )


def _empty_delta(potential) -> LindbladModel:
    return LindbladModel(potential, [], np.zeros((0, 0)), PauliSum(potential.n_qubits))


def _word_dict(measured, word):
    return {a: n for a, n in zip(measured, word)}


# -- Hamiltonian (unitary) errors ------------------------------------------------


def correct_hamiltonian_error(potential, p: PauliString, g: float, alpha=1.0):
    """Correction for the Hamiltonian perturbation H -> H - g P.

    Adds the rank-one jumps (alpha P - i s_n)/sqrt(2 alpha) * Pi_P(n) at the
    rates Lambda_n = g |1/d_n - d_n| / d_n with d_n = exp(sum_a n_a mu_a),
    which cancel the commutator -i[-gP, sigma] exactly.  Returns the
    corrective generator and the equivalent measure-and-feedback protocol
    (feedback U_n = (alpha P - i s_n)/sqrt(alpha^2 + 1) applied with
    probability proportional to Lambda_n).  alpha = 1 reproduces the
    canonical table; other values trade feedback strength against rate.
    """
    if g <= 0:
        raise ConstraintError("g must be positive")
    if alpha <= 0:
        raise ConstraintError("alpha must be positive")
    measured = potential.anticommuting_set(p)
    if not measured:
        return _empty_delta(potential), FeedbackProtocol(
            potential, (), 0.0, [], base_pauli=p.unsigned()
        )
    base = p.unsigned()
    if p.letter_phase() not in (1, -1):
        raise ConstraintError("Hamiltonian error must be a Hermitian Pauli")
    sign = float(np.real(p.letter_phase()))
    jumps: list[DressedJump] = []
    index = {}

    def jump_id(q, word_dict):
        j = projected_jump(q, word_dict, potential)
        key = (j.base.x, j.base.z, j.outcomes)
        if key not in index:
            index[key] = len(jumps)
            jumps.append(j)
        return index[key]

    words = list(product((1, -1), repeat=len(measured)))
    entries = []
    rows = []
    lam_by_word = {}
    for word in words:
        wd = _word_dict(measured, word)
        d = float(np.exp(sum(n * potential.mus[a] for a, n in wd.items())))
        lam = g * abs(1.0 / d - d) / d
        lam_by_word[word] = lam
        if lam <= 1e-15:
            continue
        s = sign * float(np.sign(1.0 / d - d))
        i1 = jump_id(base, wd)
        i2 = jump_id(identity(potential.n_qubits), wd)
        entries.append((i1, i1, alpha * lam / 2))
        entries.append((i2, i2, lam / (2 * alpha)))
        entries.append((i1, i2, 1j * s * lam / 2))
        entries.append((i2, i1, -1j * s * lam / 2))
        norm = np.sqrt(alpha ** 2 + 1.0)
        feedback = PauliSum.from_pairs(
            [(alpha / norm, base),
             (-1j * s / norm, identity(potential.n_qubits))],
            potential.n_qubits,
        )
        # D[(alpha P - i s)/sqrt(2 alpha) Pi] = (alpha^2+1)/(2 alpha) D[U Pi]
        rows.append((word, lam * (alpha ** 2 + 1.0) / (2 * alpha), feedback))
    gamma = np.zeros((len(jumps), len(jumps)), dtype=complex)
    for i, j, v in entries:
        gamma[i, j] += v
    delta = LindbladModel(potential, jumps, gamma, PauliSum(potential.n_qubits))
    rate = max((r for _, r, _ in rows), default=0.0)
    protocol = FeedbackProtocol(
        potential, measured, rate,
        [ProtocolRow(w, r / rate, fb) for w, r, fb in rows] if rate else [],
        base_pauli=base,
    )
    return delta, protocol


# -- incoherent Pauli errors -------------------------------------------------------


def correct_pauli_error(potential, p: PauliString, g: float, variant="one_sided"):
    """Correction for the incoherent error g (P rho P - rho).

    variant 'symmetric': add D[P Pi(n)] at rate g c_n^2 for every outcome.
    variant 'one_sided': rates g (c_n^2 - 1) only where c_n > 1 (the
    minimal choice used for the repetition-code protocols).
    """
    if g <= 0:
        raise ConstraintError("g must be positive")
    if variant not in ("symmetric", "one_sided"):
        raise ConstraintError(f"unknown variant {variant!r}")
    measured = potential.anticommuting_set(p)
    base = p.unsigned()
    if not measured:
        return _empty_delta(potential), FeedbackProtocol(
            potential, (), 0.0, [], base_pauli=base
        )
    jumps = []
    rates = []
    rows = []
    for word in product((1, -1), repeat=len(measured)):
        wd = _word_dict(measured, word)
        jump = dressed_jump(base, wd, potential)
        c2 = jump.c ** 2
        rate = g * c2 if variant == "symmetric" else g * max(c2 - 1.0, 0.0)
        jumps.append(jump)
        rates.append(rate)
        if rate > 1e-15:
            rows.append((word, rate))
    delta = LindbladModel(
        potential, jumps, np.diag(np.array(rates, dtype=complex)),
        PauliSum(potential.n_qubits),
    )
    rmax = max(r for _, r in rows) if rows else 0.0
    feedback = PauliSum.from_pairs([(1.0, base)], potential.n_qubits)
    protocol = FeedbackProtocol(
        potential, measured, rmax,
        [ProtocolRow(w, r / rmax, feedback) for w, r in rows],
        base_pauli=base,
    )
    return delta, protocol


# -- general incoherent errors -------------------------------------------------------


@dataclass
class GeneralizedMeasurementPlan:
    """Per-degenerate-class corrective jumps L_c = sum_q conj(a_q) A_{q,m}
    applied at rate g c^2, with their polar pieces L = U E when available."""

    potential: StabilizerPotential
    measured: tuple
    entries: list = field(default_factory=list)
    # each entry: dict(c=..., rate=..., jump=PauliSum, projective=bool,
    #                  unitary=None|ndarray, positive=None|ndarray)


def correct_general_error(potential, terms, g: float):
    """Correction for L -> L + g D[E] with E = sum_q a_q P_q.

    Degenerate eigenvalue classes (c_{q,m} = c_{r,n}, decided exactly when
    the chemical potentials are commensurate) receive the factorized jump
    corrections delta gamma = g conj(a_q) a_r c^2; nondegenerate pairs are
    absorbed into the Hamiltonian.  Returns the corrective model and the
    per-class generalized-measurement plan.
    """
    if g <= 0:
        raise ConstraintError("g must be positive")
    terms = [(complex(a), p) for a, p in terms]
    measured = sorted(
        set().union(*(set(potential.anticommuting_set(p)) for _, p in terms))
    )
    measured = tuple(measured)
    nq = potential.n_qubits

    # amplitude per jump: fold Pauli phases into the coefficients
    ops = []        # (a_eff, DressedJump)
    for a, p in terms:
        a_eff = a * complex(p.letter_phase())
        base = p.unsigned()
        for word in product((1, -1), repeat=len(measured)):
            jump = projected_jump(base, _word_dict(measured, word), potential)
            ops.append((a_eff, jump))

    n_ops = len(ops)
    amps = np.array([a for a, _ in ops])
    jumps = [j for _, j in ops]
    keys = [potential.exponent_key(dict(j.core_outcomes())) for j in jumps]
    cs = np.array([j.c for j in jumps])

    gamma = np.zeros((n_ops, n_ops), dtype=complex)
    h_corr = PauliSum(nq)
    sums = [j.to_sum() for j in jumps]
    for i in range(n_ops):
        for j in range(n_ops):
            if keys[i] == keys[j]:
                gamma[i, j] += g * np.conjugate(amps[i]) * amps[j] * cs[i] * cs[j]
            else:
                ci2, cj2 = cs[i] ** 2, cs[j] ** 2
                dh = 1j * g * (
                    0.5 * amps[i] * np.conjugate(amps[j]) * (cj2 + ci2)
                    - amps[j] * np.conjugate(amps[i]) * ci2 * cj2
                ) / (cj2 - ci2)
                h_corr = h_corr + dh * (sums[j].dagger() @ sums[i])
    delta = LindbladModel(potential, jumps, gamma, h_corr.prune())

    # class-resolved jump operators for the measurement plan
    plan = GeneralizedMeasurementPlan(potential, measured)
    for key in sorted(set(keys), key=str):
        members = [i for i in range(n_ops) if keys[i] == key]
        op = PauliSum(nq)
        for i in members:
            op = op + np.conjugate(amps[i]) * sums[i]
        op = op.prune()
        if not len(op):
            continue
        c_val = cs[members[0]]
        entry = {"c": float(c_val), "rate": float(g * c_val ** 2), "jump": op}
        if nq <= 8:
            from .evolve import svd_generalized_measurement

            unitary, positive, projective = svd_generalized_measurement(
                op.to_dense()
            )
            entry.update(
                unitary=unitary, positive=positive, projective=projective
            )
        plan.entries.append(entry)
    return delta, plan


# -- protocol replay -------------------------------------------------------------------


def _readout_kernel(k, q):
    """p(recorded | actual) over words of k independently flipped bits."""
    words = list(product((1, -1), repeat=k))
    kern = {}
    for w in words:
        for v in words:
            d = sum(1 for a, b in zip(w, v) if a != b)
            kern[(w, v)] = q ** d * (1 - q) ** (k - d)
    return words, kern


def protocol_to_lindbladian(protocol: FeedbackProtocol) -> LindbladModel:
    """Replay a protocol as a Lindbladian.

    Feedback rows become rate*Lambda_n D[U_n Pi(n)] and the no-feedback
    branches become rate*(1 - Lambda_n) D[Pi(n)]; with readout errors the
    projectors are convolved with p(n'|n) while the feedback stays
    conditioned on the recorded word.
    """
    pot = protocol.potential
    nq = pot.n_qubits
    if not protocol.measured:
        return _empty_delta(pot)
    rate = protocol.measurement_rate
    q = protocol.readout_q
    words, kern = _readout_kernel(len(protocol.measured), q)

    jumps = []
    index = {}

    def jump_id(word_dict, pauli=None):
        if pauli is None or pauli.is_identity_word():
            j = projected_jump(identity(nq), word_dict, pot)
        else:
            j = projected_jump(pauli, word_dict, pot)
        key = (j.base.x, j.base.z, j.outcomes)
        if key not in index:
            index[key] = len(jumps)
            jumps.append(j)
        return index[key], j.prefactor

    entries = []
    for recorded in words:
        row = protocol.row_for(recorded)
        prob = row.probability if row is not None else 0.0
        for actual in words:
            p_ra = kern[(recorded, actual)]
            if p_ra == 0.0:
                continue
            wd = _word_dict(protocol.measured, actual)
            if row is not None and row.feedback is not None and prob > 0:
                # D[U Pi(actual)] expanded over the dressed pair basis
                parts = []
                for coeff, word_op in row.feedback.items():
                    idx, pref = jump_id(wd, word_op)
                    parts.append((idx, coeff * pref))
                w = rate * prob * p_ra
                for ia, ca in parts:
                    for ib, cb in parts:
                        entries.append((ia, ib, w * ca * np.conjugate(cb)))
            if prob < 1.0:
                idx, _ = jump_id(wd, None)
                entries.append((idx, idx, rate * (1 - prob) * p_ra))
    # close the basis under adjoints (one-sided rows add only one partner)
    for j in list(jumps):
        adj = j.adjoint()
        key = (adj.base.x, adj.base.z, adj.outcomes)
        if key not in index:
            index[key] = len(jumps)
            jumps.append(adj)
    gamma = np.zeros((len(jumps), len(jumps)), dtype=complex)
    for i, j, v in entries:
        gamma[i, j] += v
    return LindbladModel(pot, jumps, gamma, PauliSum(nq))


def conditional_flip_protocol(potential, p: PauliString, gamma0: float):
    """Stationary measure-and-flip protocol for a single Pauli string.

    Implements the detailed-balance rates gamma0 * c_n D[P Pi(n)] as a
    protocol: measure at rate gamma0 * c_max, flip with probability
    c_n / c_max (the Metropolis-style acceptance).
    """
    measured = potential.anticommuting_set(p)
    base = p.unsigned()
    words = list(product((1, -1), repeat=len(measured)))
    cvals = {
        w: dressed_jump(base, _word_dict(measured, w), potential).c
        for w in words
    }
    cmax = max(cvals.values())
    feedback = PauliSum.from_pairs([(1.0, base)], potential.n_qubits)
    rows = [ProtocolRow(w, cvals[w] / cmax, feedback) for w in words]
    return FeedbackProtocol(
        potential, measured, gamma0 * cmax, rows, base_pauli=base
    )


# -- readout-error recalibration ----------------------------------------------------


@dataclass
class RecalibrationResult:
    feasible: bool
    rates: dict                     # class key -> solved absolute rate
    protocol: FeedbackProtocol | None
    violating: list                 # class keys with negative solved rates
    solved_vector: np.ndarray       # signed rates, one per row class


def _feedback_components(row: ProtocolRow, base: PauliString):
    """Split the feedback unitary as alpha * P + beta * 1."""
    alpha = beta = 0.0
    for coeff, word_op in row.feedback.items():
        if word_op.is_identity_word():
            beta = coeff
        elif (word_op.x, word_op.z) == (base.x, base.z):
            alpha = coeff * word_op.phase / base.phase
        else:
            raise ConstraintError(
                "recalibration supports feedback of the form a*P + b*1 only"
            )
    return complex(alpha), complex(beta)


def recalibrate_for_readout_errors(protocol: FeedbackProtocol, q: float):
    """Re-solve the feedback rates so the q-convolved protocol still
    protects sigma.

    The stationarity action of the implemented rows (feedback conditioned
    on the recorded word, projectors convolved with the readout kernel) is
    matched to the designed error-free action, class by outcome class.  The
    minimal-deviation solution is taken; if it turns negative, a
    nonnegative solution of the same linear system is sought; if none
    exists the result reports the signed rate vector and the violating
    classes.
    """
    if not 0.0 <= q < 1.0:
        raise ConstraintError("q must lie in [0, 1)")
    pot = protocol.potential
    base = protocol.base_pauli
    if base is None:
        raise ConstraintError("protocol lacks a base Pauli for recalibration")
    k = len(protocol.measured)
    words, kern = _readout_kernel(k, q)
    sig = {w: protocol.sigma_weight(w) for w in words}
    flip_set = set(pot.anticommuting_set(base)) & set(protocol.measured)

    def phi(w):
        return tuple(
            -n if a in flip_set else n
            for a, n in zip(protocol.measured, w)
        )

    # group rows into classes sharing (probability, feedback)
    classes = {}
    for row in protocol.rows:
        alpha, beta = _feedback_components(row, base)
        key = (round(row.probability, 12), round(alpha.real, 12),
               round(alpha.imag, 12), round(beta.real, 12), round(beta.imag, 12))
        classes.setdefault(key, {"words": [], "alpha": alpha, "beta": beta,
                                 "target": row.probability * protocol.measurement_rate})
        classes[key]["words"].append(tuple(row.word))
    class_list = list(classes.values())
    ncls = len(class_list)
    row_of_word = {}
    for ic, cl in enumerate(class_list):
        for w in cl["words"]:
            row_of_word[w] = ic

    # sigma-action functionals: families Pi(v) and P.Pi(v)
    n_eq = 2 * len(words)
    A = np.zeros((n_eq, ncls), dtype=complex)
    b = np.zeros(n_eq, dtype=complex)
    for iv, v in enumerate(words):
        fv = phi(v)
        for ic, cl in enumerate(class_list):
            al, be = cl["alpha"], cl["beta"]
            for w in cl["words"]:
                A[iv, ic] += abs(al) ** 2 * (
                    kern[(w, fv)] * sig[fv] - kern[(w, v)] * sig[v]
                )
                A[len(words) + iv, ic] += (
                    al * np.conjugate(be) * kern[(w, v)] * sig[v]
                    + np.conjugate(al) * be * kern[(w, fv)] * sig[fv]
                )
        ic_v = row_of_word.get(v)
        ic_fv = row_of_word.get(fv)
        if ic_fv is not None:
            cl = class_list[ic_fv]
            b[iv] += abs(cl["alpha"]) ** 2 * cl["target"] * sig[fv]
            b[len(words) + iv] += (
                np.conjugate(cl["alpha"]) * cl["beta"] * cl["target"] * sig[fv]
            )
        if ic_v is not None:
            cl = class_list[ic_v]
            b[iv] -= abs(cl["alpha"]) ** 2 * cl["target"] * sig[v]
            b[len(words) + iv] += (
                cl["alpha"] * np.conjugate(cl["beta"]) * cl["target"] * sig[v]
            )

    a_real = np.vstack([A.real, A.imag])
    b_real = np.concatenate([b.real, b.imag])
    t0 = np.array([cl["target"] for cl in class_list])
    dev, *_ = np.linalg.lstsq(a_real, b_real - a_real @ t0, rcond=None)
    lam = t0 + dev
    residual = np.abs(a_real @ lam - b_real).max()
    if residual > 1e-8 * max(1.0, np.abs(b_real).max()):
        lam = np.full(ncls, np.nan)

    tol = 1e-10 * max(1.0, np.abs(lam).max() if np.all(np.isfinite(lam)) else 1.0)
    if np.all(np.isfinite(lam)) and lam.min() >= -tol:
        solved = np.clip(lam, 0.0, None)
    else:
        solved = _nonnegative_solve(a_real, b_real, t0)
        if solved is None:
            keys = [cl["words"][0] for cl in class_list]
            bad = [keys[i] for i in range(ncls)
                   if not np.isfinite(lam[i]) or lam[i] < -tol]
            return RecalibrationResult(False, dict(zip(keys, lam)), None, bad, lam)

    rate = solved.max()
    new_rows = []
    for ic, cl in enumerate(class_list):
        prob = solved[ic] / rate if rate > 0 else 0.0
        fb = PauliSum.from_pairs(
            [(cl["alpha"], base), (cl["beta"], identity(pot.n_qubits))],
            pot.n_qubits,
        ).prune()
        for w in cl["words"]:
            if prob > 1e-15:
                new_rows.append(ProtocolRow(w, min(prob, 1.0), fb))
    new_protocol = FeedbackProtocol(
        pot, protocol.measured, rate, new_rows, readout_q=q, base_pauli=base
    )
    keys = [cl["words"][0] for cl in class_list]
    return RecalibrationResult(
        True, dict(zip(keys, solved)), new_protocol, [], solved
    )


def _nonnegative_solve(a_mat, b_vec, center):
    """Nonnegative solution of a_mat x = b_vec minimizing ||x - center||_1."""
    from scipy.optimize import linprog

    n = a_mat.shape[1]
    # variables: x (n), u (n) with u >= |x - center|
    c = np.concatenate([np.zeros(n), np.ones(n)])
    a_eq = np.hstack([a_mat, np.zeros((a_mat.shape[0], n))])
    a_ub = np.vstack([
        np.hstack([np.eye(n), -np.eye(n)]),
        np.hstack([-np.eye(n), -np.eye(n)]),
    ])
    b_ub = np.concatenate([center, -center])
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_vec,
        bounds=[(0, None)] * n + [(0, None)] * n, method="highs",
    )
    if not res.success:
        return None
    x = res.x[:n]
    if np.abs(a_mat @ x - b_vec).max() > 1e-7 * max(1.0, np.abs(b_vec).max()):
        return None
    return x


def recalibration_threshold(protocol: FeedbackProtocol, lo=0.0, hi=0.499,
                            iters=40) -> float:
    """Bisect for the largest q at which recalibration stays feasible."""
    if not recalibrate_for_readout_errors(protocol, lo).feasible:
        return lo
    if recalibrate_for_readout_errors(protocol, hi).feasible:
        return hi
    for _ in range(iters):
        mid = (lo + hi) / 2
        if recalibrate_for_readout_errors(protocol, mid).feasible:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# -- dispatch ------------------------------------------------------------------------


def correct_error(potential, spec: ErrorSpec, variant="one_sided"):
    """Route an ErrorSpec to its correction routine."""
    if spec.kind == "hamiltonian_pauli":
        return correct_hamiltonian_error(potential, spec.payload, spec.strength)
    if spec.kind == "incoherent_pauli":
        return correct_pauli_error(
            potential, spec.payload, spec.strength, variant=variant
        )
    return correct_general_error(potential, spec.payload, spec.strength)


def error_generator(potential, spec: ErrorSpec) -> LindbladModel:
    """The erroneous generator itself (for building combined models)."""
    nq = potential.n_qubits
    if spec.kind == "hamiltonian_pauli":
        h = PauliSum.from_pairs([(-spec.strength, spec.payload)], nq)
        return _empty_delta(potential).with_hamiltonian(h)
    if spec.kind == "incoherent_pauli":
        jumps = all_dressings(spec.payload.unsigned(), potential)
        n = len(jumps)
        gamma = np.full((n, n), spec.strength, dtype=complex)
        return LindbladModel(potential, jumps, gamma, PauliSum(nq))
    measured = sorted(
        set().union(
            *(set(potential.anticommuting_set(p)) for _, p in spec.payload)
        )
    )
    jumps = []
    amps = []
    for a, p in spec.payload:
        a_eff = complex(a) * complex(p.letter_phase())
        for word in product((1, -1), repeat=len(measured)):
            jumps.append(
                projected_jump(p.unsigned(), _word_dict(measured, word), potential)
            )
            amps.append(a_eff)
    amps = np.array(amps)
    gamma = spec.strength * np.outer(amps, amps.conj())
    return LindbladModel(potential, jumps, gamma, PauliSum(nq))
