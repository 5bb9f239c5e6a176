"""Feedback through a noisy readout: recalibrated rates and thresholds.

If each stabilizer readout flips with probability q, the designed feedback
rates no longer cancel the error.  Re-solving the rates against the
q-convolved protocol keeps sigma stationary up to a threshold q*, beyond
which some rate would have to be negative.  For a single ZZ stabilizer the
threshold is the closed form q/(1-q) = e^{-2 mu}; for the repetition code
it sits near 1/3, and folding in extra detailed-balance rows pushes it up.
"""

import numpy as np

from stabsteer import (
    ErrorSpec,
    FeedbackProtocol,
    ProtocolRow,
    chain_potential,
    correct_hamiltonian_error,
    correct_pauli_error,
    error_generator,
    merge_models,
    parse_pauli,
    protocol_to_lindbladian,
    recalibrate_for_readout_errors,
    recalibration_threshold,
    stationarity_residual,
    torus_potential,
)
from stabsteer.pauli import PauliSum

mu = 0.25 * np.log(2)

# single stabilizer: the closed-form threshold
pot2 = chain_potential(2, mu, pbc=False)
_, proto2 = correct_pauli_error(pot2, parse_pauli("X0", 2), 1.0)
thr = recalibration_threshold(proto2, iters=48)
closed = np.exp(-2 * mu) / (1 + np.exp(-2 * mu))
print(f"two-qubit threshold: {thr:.10f}  closed form: {closed:.10f}")

# the 2D Ising Hamiltonian-error protocol (four stabilizers per site)
pot9 = torus_potential(3, 3, mu)
_, proto9 = correct_hamiltonian_error(pot9, parse_pauli("X4", 9), 1.0)
thr9 = recalibration_threshold(proto9)
print(f"repetition-code (Hamiltonian error) threshold: {thr9:.4f}")

# folding in the T-even base rows gamma_4 = 2, gamma_2 = e^{-2 mu}
g0, g4, g2 = 1.0, 2.0, np.exp(-2 * mu)
_, proto_inc = correct_pauli_error(pot9, parse_pauli("X4", 9), g0)
base = {0: g4 * np.exp(-4 * mu), 1: g2 * np.exp(-2 * mu),
        3: g2 * np.exp(2 * mu), 4: g4 * np.exp(4 * mu)}
corr = {3: g0 * (np.exp(4 * mu) - 1), 4: g0 * (np.exp(8 * mu) - 1)}
targets = {k: base[k] + corr.get(k, 0.0) for k in base}
rate = max(targets.values())
feedback = PauliSum.from_pairs([(1.0, parse_pauli("X4", 9))], 9)
rows = []
for word in proto_inc.outcome_words():
    k = sum(1 for n in word if n == -1)
    if k in targets:
        rows.append(ProtocolRow(word, targets[k] / rate, feedback))
proto_base = FeedbackProtocol(pot9, proto_inc.measured, rate, rows,
                              base_pauli=parse_pauli("X4", 9))
thr_base = recalibration_threshold(proto_base)
print(f"incoherent protocol with base rows: threshold {thr_base:.4f} "
      "(the extra T-even freedom raises it)")

# end-to-end check at small size: the recalibrated protocol really works
pot4 = chain_potential(4, mu)
p = parse_pauli("X1", 4)
err = error_generator(pot4, ErrorSpec("hamiltonian_pauli", p, 0.7))
_, proto4 = correct_hamiltonian_error(pot4, p, 0.7)
q = 0.15
recal = recalibrate_for_readout_errors(proto4, q)
noisy = protocol_to_lindbladian(recal.protocol)
print(f"\nq = {q}: recalibrated replay residual "
      f"{stationarity_residual(merge_models(err, noisy)):.2e}")
proto4.readout_q = q
naive = protocol_to_lindbladian(proto4)
print(f"         naive replay residual        "
      f"{stationarity_residual(merge_models(err, naive)):.2e}")
