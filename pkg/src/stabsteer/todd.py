"""Time-reversal-odd dynamics beyond the m-matrix ansatz.

One-dimensional classical T-odd rate tables are enumerated through the
g-function construction (f_alpha = g(head) - g(tail), with 2^{q-1} - 1
independent nonconstant g per motif length q), realized as nonnegative
transition rates between length-q motifs of stabilizer eigenvalues, and
assembled into conditional-flip Lindbladians.  The degenerate quantum
sectors are handled by solving the per-block linear stationarity
constraints directly.  The biased-walk and flocking presets used in the
numerical experiments are transcribed here as well.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ConstraintError
from .lindblad import LindbladModel, close_jump_basis, merge_models
from .pauli import PauliString, PauliSum, identity, parse_pauli
from .potential import (
    StabilizerPotential,
    chain_potential,
    field_potential,
    projected_jump,
)


def motif_words(q):
    """All length-q words over {+1, -1}, lexicographic with +1 first."""
    return list(product((1, -1), repeat=q))


def motif_str(word):
    return "".join("o" if n == 1 else "*" for n in word)


# -- g-function basis -----------------------------------------------------------


def enumerate_g_basis(q: int):
    """The 2^{q-1} - 1 independent nonconstant functions on (q-1)-words.

    Returned as dicts word -> value using the indicator-product basis
    g_T(w) = prod_{i in T} (1 - w_i)/2 over nonempty subsets T.
    """
    if q < 2:
        raise ConstraintError("motifs need q >= 2 for a nontrivial g basis")
    words = motif_words(q - 1)
    basis = []
    for mask in range(1, 2 ** (q - 1)):
        table = {}
        for w in words:
            val = 1.0
            for i in range(q - 1):
                if (mask >> i) & 1:
                    val *= (1 - w[i]) / 2
            table[w] = val
        basis.append(table)
    return basis


def f_from_g(g_table, q: int):
    """f_alpha = g(alpha_1 .. alpha_{q-1}) - g(alpha_2 .. alpha_q)."""
    return {
        w: g_table[w[:-1]] - g_table[w[1:]] for w in motif_words(q)
    }


# -- classical rate tables --------------------------------------------------------


@dataclass
class MotifRateTable:
    """Nonnegative translation-invariant rates between length-q motifs.

    rates[(source, target)] is the rate of source -> target transitions at
    any position; `mus` holds the chemical potential per motif slot (used
    for the sigma weights).  For site-resolved potentials one table is
    produced per position instead.
    """

    q: int
    mus: tuple
    rates: dict = field(default_factory=dict)
    position: int | None = None          # None = translation invariant

    def weight(self, word) -> float:
        return float(np.exp(sum(m * n for m, n in zip(self.mus, word))))

    def f_values(self):
        """f_beta = sum_alpha [ (sigma_alpha/sigma_beta) gamma(alpha->beta)
        - gamma(beta->alpha) ]."""
        out = {}
        for beta in motif_words(self.q):
            total = 0.0
            for alpha in motif_words(self.q):
                if alpha == beta:
                    continue
                total += (
                    self.rates.get((alpha, beta), 0.0)
                    * self.weight(alpha) / self.weight(beta)
                )
                total -= self.rates.get((beta, alpha), 0.0)
            out[beta] = total
        return out

    def check_stationarity(self, L: int, tol=1e-9) -> float:
        """Brute-force max |sum_x f_{s[x:x+q]}| over all 2^L periodic
        configurations; zero iff the table keeps every sigma weight fixed."""
        f = self.f_values()
        worst = 0.0
        for bits in range(2 ** L):
            s = [1 - 2 * ((bits >> i) & 1) for i in range(L)]
            total = sum(
                f[tuple(s[(x + i) % L] for i in range(self.q))]
                for x in range(L)
            )
            worst = max(worst, abs(total))
        return worst

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["motif_from", "motif_to", "position", "rate"])
            for (src, dst), rate in sorted(self.rates.items()):
                writer.writerow([
                    motif_str(src), motif_str(dst),
                    "" if self.position is None else self.position,
                    rate,
                ])


def _metropolis_table(q, mus):
    """Detailed-balance Gibbs rates min(1, sigma(target)/sigma(source))."""
    table = MotifRateTable(q, tuple(mus))
    for src in motif_words(q):
        for dst in motif_words(q):
            if src == dst:
                continue
            ratio = table.weight(dst) / table.weight(src)
            table.rates[(src, dst)] = min(1.0, ratio)
    return table


def classical_todd_rates(g_table, q: int, mus, even_flips_only=False,
                         max_padding=1e6) -> MotifRateTable:
    """Nonnegative rate table realizing the T-odd flow of a g-function.

    A minimum-norm particular solution of f_beta = sum_alpha [ r_{alpha beta}
    gamma(alpha->beta) - gamma(beta->alpha) ] is lifted to nonnegative rates
    by adding the minimal uniform multiple of the Metropolis detailed-balance
    table (which carries f = 0).  `mus` is the chemical potential per motif
    slot (uniform or site resolved); with `even_flips_only` transitions that
    flip an odd number of slots are excluded (needed when motifs live on the
    bonds of a closed chain).
    """
    mus = tuple(float(m) for m in (mus if np.iterable(mus) else [mus] * q))
    if len(mus) != q:
        raise ConstraintError("need one mu per motif slot")
    target = f_from_g(g_table, q)
    words = motif_words(q)
    table = MotifRateTable(q, mus)
    pairs = []
    for src in words:
        for dst in words:
            if src == dst:
                continue
            flips = sum(1 for a, b in zip(src, dst) if a != b)
            if even_flips_only and flips % 2:
                continue
            pairs.append((src, dst))
    w = {word: table.weight(word) for word in words}
    a_mat = np.zeros((len(words), len(pairs)))
    for col, (src, dst) in enumerate(pairs):
        a_mat[words.index(dst), col] += w[src] / w[dst]
        a_mat[words.index(src), col] -= 1.0
    b_vec = np.array([target[word] for word in words])
    sol, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    if np.abs(a_mat @ sol - b_vec).max() > 1e-9 * max(1.0, np.abs(b_vec).max()):
        raise ConstraintError(
            "g-flow not realizable over the admissible transition set"
        )
    rates = {pair: sol[col] for col, pair in enumerate(pairs)}
    # lift negatives with the minimal uniform multiple of the Gibbs rates
    gibbs = _metropolis_table(q, mus).rates
    t_lift = 0.0
    for pair, val in rates.items():
        if val < 0:
            t_lift = max(t_lift, -val / gibbs[pair])
    if t_lift > max_padding:
        raise ConstraintError(
            f"nonnegativity padding {t_lift:.3g} exceeds the cap"
        )
    for pair in pairs:
        lifted = rates[pair] + t_lift * gibbs[pair]
        if abs(lifted) > 1e-14:
            table.rates[pair] = float(lifted)
    return table


# -- assembly into Lindbladians ------------------------------------------------------


def _field_motif_jump(potential, x, src, dst):
    """|dst><src| on sites x..x+q-1 of a single-site-Z potential."""
    L = potential.n_qubits
    q = len(src)
    flip = 0
    for i in range(q):
        if src[i] != dst[i]:
            flip |= 1 << ((x + i) % L)
    base = PauliString(L, flip, 0)
    outcomes = {(x + i) % L: src[i] for i in range(q)}
    return projected_jump(base, outcomes, potential)


def _bond_motif_jump(potential, x, src, dst):
    """|dst><src| on bonds x..x+q-1 of a ZZ-chain potential.

    The flipped bonds are realized by Pauli X on the prefix-parity sites,
    which requires an even number of flips inside the window.
    """
    L = potential.n_qubits
    q = len(src)
    flips = [src[i] != dst[i] for i in range(q)]
    if sum(flips) % 2:
        raise ConstraintError(
            "odd bond-flip motifs are nonlocal on a closed chain"
        )
    mask = 0
    parity = 0
    for i in range(q):
        if flips[i]:
            parity ^= 1
        if parity:
            mask |= 1 << ((x + i + 1) % L)
    base = PauliString(L, mask, 0)
    outcomes = {(x + i) % L: src[i] for i in range(q)}
    return projected_jump(base, outcomes, potential)


def assemble_classical_model(table: MotifRateTable, potential,
                             kind="field", sites=None) -> LindbladModel:
    """Turn a rate table into the Lindbladian sum_x,pairs rate D[|dst><src|_x]."""
    L = potential.n_qubits
    make = _field_motif_jump if kind == "field" else _bond_motif_jump
    jumps, rates = [], []
    for x in (range(L) if sites is None else sites):
        for (src, dst), rate in sorted(table.rates.items()):
            jumps.append(make(potential, x, src, dst))
            rates.append(rate)
    jumps, gamma = close_jump_basis(jumps, np.diag(np.array(rates, dtype=complex)))
    return LindbladModel(potential, jumps, gamma, PauliSum(L))


# -- degenerate quantum blocks ---------------------------------------------------------


@dataclass
class QuantumBlockSolution:
    """Null space of the stationarity constraints for one degenerate family.

    Unknowns are the couplings gamma between the off-diagonal motif jump
    |u alpha v><u beta v| at offset j and the diagonal motif jumps |w><w|,
    in both directions, for j = 0..n.  `unknowns` lists
    (j, pads, w, direction); `basis` spans the admissible coefficient
    vectors; equation rank and count record the advertised redundancy.
    """

    q: int
    n: int
    alpha: tuple
    beta: tuple
    unknowns: list
    basis: np.ndarray           # (n_unknowns, dim) orthonormal columns
    rank: int
    n_equations: int

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    def to_json_dict(self):
        return {
            "q": self.q, "n": self.n,
            "alpha": motif_str(self.alpha), "beta": motif_str(self.beta),
            "rank": self.rank, "n_equations": self.n_equations,
            "dimension": self.dimension,
            "unknowns": [
                {"offset": j, "pads": [motif_str(u), motif_str(v)],
                 "diag_motif": motif_str(w), "direction": d}
                for j, (u, v), w, d in self.unknowns
            ],
        }


def quantum_block_solve(q: int, n: int, mus, alpha, beta) -> QuantumBlockSolution:
    """Solve the stationarity constraints for the off-diagonal family
    |u alpha v><u beta v| (pads u, v of total length n) coupled to diagonal
    motifs, as a homogeneous linear system; the paper's four-constraint
    redundancy at (q, n) = (2, 1) appears as rank < #equations.

    alpha and beta are the differing motif cores of length q - n.
    """
    if not (0 <= n <= q - 1):
        raise ConstraintError("need 0 <= n <= q - 1")
    alpha, beta = tuple(alpha), tuple(beta)
    if len(alpha) != q - n or len(beta) != q - n:
        raise ConstraintError("cores must have length q - n")
    mus = tuple(float(m) for m in (mus if np.iterable(mus) else [mus] * (q + n)))
    if len(mus) != q + n:
        raise ConstraintError("need one mu per slot of the padded window")

    def weight(word, start):
        return float(np.exp(sum(
            mus[start + i] * v for i, v in enumerate(word)
        )))

    words_q = motif_words(q)
    unknowns = []
    index = {}
    for j in range(n + 1):
        # jump window [n - j, n - j + q); pads: u = last j of r, v = first
        # n - j of r'.  r occupies slots [0, n), the core [n, q), r' [q, q+n).
        for u in motif_words(j):
            for v in motif_words(n - j):
                a_word = u + alpha + v
                b_word = u + beta + v
                for w in words_q:
                    for direction in ("in", "out"):
                        key = (j, (u, v), w, direction)
                        index[key] = len(unknowns)
                        unknowns.append(key)

    eqs = []
    for r in motif_words(n):
        for rp in motif_words(n):
            row = np.zeros(len(unknowns))
            for j in range(n + 1):
                u = r[n - j:]
                v = rp[: n - j]
                a_word = u + alpha + v
                b_word = u + beta + v
                start = n - j
                wa, wb = weight(a_word, start), weight(b_word, start)
                for w in words_q:
                    ww = weight(w, start)
                    # inflow |w><w| -> |a><b| weighted by sigma_w/sqrt(wa wb)
                    row[index[(j, (u, v), w, "in")]] += ww / np.sqrt(wa * wb)
                    # outflow |b><a| -> |w><w|, weight (c_ba + c_ab)/2
                    row[index[(j, (u, v), w, "out")]] -= 0.5 * (
                        np.sqrt(wb / wa) + np.sqrt(wa / wb)
                    )
            eqs.append(row)
    a_mat = np.array(eqs)
    u_svd, s, vh = np.linalg.svd(a_mat)
    tol = 1e-12 * max(1.0, s.max(initial=0.0))
    rank = int(np.sum(s > tol))
    basis = vh[rank:].T
    return QuantumBlockSolution(
        q, n, alpha, beta, unknowns, basis, rank, a_mat.shape[0]
    )


def assemble_quantum_block(solution: QuantumBlockSolution, coeffs,
                           potential, x: int, kind="field") -> LindbladModel:
    """Assemble one admissible coefficient vector into a Lindbladian.

    Off-diagonal couplings are padded with their detailed-balance partners
    on the diagonal so the rate matrix is PSD while stationarity is kept.
    """
    L = potential.n_qubits
    make = _field_motif_jump if kind == "field" else _bond_motif_jump
    q, n = solution.q, solution.n
    jumps = []
    jindex = {}

    def jump_id(pos, src, dst):
        j = make(potential, pos % L, src, dst)
        key = (j.base.x, j.base.z, j.outcomes)
        if key not in jindex:
            jindex[key] = len(jumps)
            jumps.append(j)
        return jindex[key]

    entries = []
    vec = np.asarray(coeffs, dtype=float)
    for (j_off, (u, v), w, direction), val in zip(solution.unknowns, vec):
        if abs(val) < 1e-14:
            continue
        pos = x + (n - j_off)
        a_word = u + solution.alpha + v
        b_word = u + solution.beta + v
        if direction == "in":
            # gamma_{IJ} with A_I = |a><w|, A_J = |b><w|
            i_id = jump_id(pos, w, a_word)
            j_id = jump_id(pos, w, b_word)
        else:
            # gamma_{IJ} with A_I = |w><b|, A_J = |w><a|
            i_id = jump_id(pos, b_word, w)
            j_id = jump_id(pos, a_word, w)
        entries.append((i_id, j_id, val))
        entries.append((j_id, i_id, val))      # Hermitian partner
    m = len(jumps)
    gamma = np.zeros((m, m), dtype=complex)
    for i, j, v in entries:
        gamma[i, j] += v / 2.0
    jumps, gamma = close_jump_basis(jumps, gamma)
    jindex = {(j.base.x, j.base.z, j.outcomes): i for i, j in enumerate(jumps)}
    # PSD padding: detailed-balance diagonal pairs, stationarity neutral
    lam_min = np.linalg.eigvalsh((gamma + gamma.conj().T) / 2)[0] if m else 0.0
    if lam_min < 0:
        pad = -lam_min * 1.0000001
        for idx, jmp in enumerate(jumps):
            gamma[idx, idx] += pad
            adj = jmp.adjoint()
            key = (adj.base.x, adj.base.z, adj.outcomes)
            if key not in jindex:
                jindex[key] = len(jumps)
                jumps.append(adj)
                grown = np.zeros((len(jumps), len(jumps)), dtype=complex)
                grown[:gamma.shape[0], :gamma.shape[1]] = gamma
                gamma = grown
            pidx = jindex[key]
            if pidx != idx:
                gamma[pidx, pidx] += pad * jmp.c ** -2
    return LindbladModel(potential, jumps, gamma, PauliSum(L))


# -- preset models of the biased-walk experiments -----------------------------------------


def preset_models(name: str, L: int, mu: float, gamma0: float = 1.0,
                  alpha: float = 0.0, sites=None) -> LindbladModel:
    """Transcriptions of the domain-wall walk generators.

    'classical_biased_walk': measure the two bonds at a site, hop o* -> *o.
    'quantum_biased_walk': the six-jump coherent drift with its T-odd
        off-diagonal couplings.
    'classical_flocking': two-bond classical hops over three-bond motifs.
    'zeno': quantum_biased_walk plus alpha * extra phase damping.
    """
    if L < 4:
        raise ConstraintError("presets need L >= 4 with periodic boundaries")
    pot = chain_potential(L, mu)
    site_list = list(range(L)) if sites is None else list(sites)

    def pj(pauli_text, outcomes):
        return projected_jump(parse_pauli(pauli_text, L), outcomes, pot)

    if name == "classical_biased_walk":
        jumps, rates = [], []
        for x in site_list:
            b0, b1 = (x - 1) % L, x
            jumps.append(pj(f"X{x}", {b0: +1, b1: -1}))       # |*o><o*|
            jumps.append(pj("I", {b0: -1, b1: +1}))           # |*o><*o|
            jumps.append(pj("I", {b0: +1, b1: +1}))
            jumps.append(pj("I", {b0: -1, b1: -1}))
            rates += [gamma0] * 4
        jumps, gamma = close_jump_basis(
            jumps, np.diag(np.array(rates, dtype=complex))
        )
        return LindbladModel(pot, jumps, gamma, PauliSum(L))

    if name in ("quantum_biased_walk", "zeno"):
        add = alpha if name == "zeno" else 0.0
        model = None
        for x in site_list:
            b = [(x + i) % L for i in range(3)]
            oob = {b[0]: +1, b[1]: +1, b[2]: -1}      # o o *
            boo = {b[0]: -1, b[1]: +1, b[2]: +1}      # * o o
            obo = {b[0]: +1, b[1]: -1, b[2]: +1}      # o * o
            j1 = pj("I", oob)                               # |oo*><oo*|
            j2 = pj(f"X{(x + 2) % L}", obo)                 # |oo*><o*o|
            j3 = pj(f"X{(x + 2) % L}", oob)                 # |o*o><oo*|
            j4 = pj("I", boo)                               # |*oo><*oo|
            j5 = pj(f"X{(x + 1) % L}", obo)                 # |*oo><o*o|
            j6 = pj(f"X{(x + 1) % L}", boo)                 # |o*o><*oo|
            jumps = [j1, j2, j3, j4, j5, j6]
            g = np.zeros((6, 6), dtype=complex)
            for a_i, b_i in ((0, 1), (0, 2), (3, 4), (3, 5)):
                g[a_i, a_i] += 1; g[b_i, b_i] += 1
                g[a_i, b_i] += 1; g[b_i, a_i] += 1
            g[0, 0] += 1 + add
            g[3, 3] += 1 + add
            g[2, 4] += 0.5
            g[4, 2] += 0.5
            jlist, gmat = close_jump_basis(jumps, gamma0 * g)
            site_model = LindbladModel(pot, jlist, gmat, PauliSum(L))
            model = site_model if model is None else merge_models(model, site_model)
        return model

    if name == "classical_flocking":
        jumps, rates = [], []
        for x in site_list:
            b = [(x + i) % L for i in range(3)]
            flip = f"X{(x + 1) % L} X{(x + 2) % L}"
            jumps.append(pj(flip, {b[0]: +1, b[1]: +1, b[2]: -1}))  # |*oo><oo*|
            jumps.append(pj(flip, {b[0]: +1, b[1]: -1, b[2]: -1}))  # |**o><o**|
            rates += [gamma0] * 2
        jumps, gamma = close_jump_basis(
            jumps, np.diag(np.array(rates, dtype=complex))
        )
        return LindbladModel(pot, jumps, gamma, PauliSum(L))

    raise ConstraintError(f"unknown preset {name!r}")


def zeno_dephasing(L: int, mu: float, alpha: float, sites=None) -> LindbladModel:
    """The extra phase damping alpha * (D[|*oo><*oo|] + D[|oo*><oo*|]);
    composable with any preset via merge_models."""
    pot = chain_potential(L, mu)
    jumps, rates = [], []
    for x in (range(L) if sites is None else sites):
        b = [(x + i) % L for i in range(3)]
        jumps.append(projected_jump(
            identity(L), {b[0]: -1, b[1]: +1, b[2]: +1}, pot))
        jumps.append(projected_jump(
            identity(L), {b[0]: +1, b[1]: +1, b[2]: -1}, pot))
        rates += [alpha, alpha]
    return LindbladModel(
        pot, jumps, np.diag(np.array(rates, dtype=complex)), PauliSum(L)
    )


def domain_wall_operator(potential, x: int) -> PauliSum:
    """O_x = |*o_x><o*_x| + h.c., the domain-wall superposition hop."""
    L = potential.n_qubits
    hop = projected_jump(
        parse_pauli(f"X{x}", L), {(x - 1) % L: +1, x % L: -1}, potential
    )
    out = hop.to_sum() + hop.adjoint().to_sum()
    return out.prune()


def drift_correlator(model, x: int, times):
    """<S_{x-1}(t) S_x(0)> - <S_{x+1}(t) S_x(0)> with S_x = Z_x Z_{x+1}."""
    from .evolve import correlation

    L = model.n_qubits
    s = {
        k: PauliSum.from_pairs(
            [(1.0, parse_pauli(f"Z{k % L} Z{(k + 1) % L}", L))], L
        )
        for k in (x - 1, x, x + 1)
    }
    left = correlation(model, s[x - 1], s[x], times)
    right = correlation(model, s[x + 1], s[x], times)
    return left - right


def superposition_correlator(model, x: int, times):
    """<O_{x-2}(t) O_x(0)> - <O_{x+2}(t) O_x(0)> for the hop operator O."""
    from .evolve import correlation

    pot = model.potential
    o_m = domain_wall_operator(pot, (x - 2) % pot.n_qubits)
    o_0 = domain_wall_operator(pot, x)
    o_p = domain_wall_operator(pot, (x + 2) % pot.n_qubits)
    return correlation(model, o_m, o_0, times) - correlation(model, o_p, o_0, times)
