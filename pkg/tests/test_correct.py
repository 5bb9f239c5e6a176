import numpy as np
import pytest

from stabsteer.errors import ConstraintError
from stabsteer.lindblad import merge_models, stationarity_residual
from stabsteer.pauli import PauliSum, parse_pauli
from stabsteer.potential import chain_potential, field_potential, torus_potential
from stabsteer.correct import (
    ErrorSpec,
    FeedbackProtocol,
    ProtocolRow,
    conditional_flip_protocol,
    correct_general_error,
    correct_hamiltonian_error,
    correct_pauli_error,
    error_generator,
    protocol_to_lindbladian,
    recalibrate_for_readout_errors,
    recalibration_threshold,
)

MU = 0.25 * np.log(2)


def proportional_up_to_phase(a, b, tol=1e-12):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    inner = np.abs((a.conj() * b).sum())
    return abs(inner - na * nb) <= tol * max(na * nb, 1.0)


# -- Hamiltonian errors -----------------------------------------------------------

def test_hamiltonian_correction_restores_stationarity():
    pot = chain_potential(4, MU)
    p = parse_pauli("X1", 4)
    g = 0.7
    err = error_generator(pot, ErrorSpec("hamiltonian_pauli", p, g))
    assert stationarity_residual(err) >= 1e-2 * g
    delta, _ = correct_hamiltonian_error(pot, p, g)
    assert stationarity_residual(merge_models(err, delta)) <= 1e-12


def test_hamiltonian_correction_single_qubit():
    mu, h = 0.9, 0.4
    pot = field_potential(1, mu)
    p = parse_pauli("X0", 1)
    err = error_generator(pot, ErrorSpec("hamiltonian_pauli", p, h))
    assert stationarity_residual(err) >= h * np.tanh(mu) * 0.1
    delta, _ = correct_hamiltonian_error(pot, p, h)
    assert stationarity_residual(merge_models(err, delta)) <= 1e-12


def test_hamiltonian_protocol_matches_table_closed_forms_2d():
    # bulk site of the 2D Ising torus: probabilities e^{-8mu}, (1-e^{-4mu})/
    # (e^{8mu}-1), 0, (e^{4mu}-1)/(e^{8mu}-1), 1 and rate h0 (e^{8mu}-1)
    pot = torus_potential(3, 3, MU)
    h0 = 1.3
    _, proto = correct_hamiltonian_error(pot, parse_pauli("X4", 9), h0)
    assert np.isclose(proto.measurement_rate, h0 * (np.exp(8 * MU) - 1))
    by_weight = {}
    for row in proto.rows:
        by_weight.setdefault(row.weight, []).append(row)
    want = {
        0: np.exp(-8 * MU),
        1: (1 - np.exp(-4 * MU)) / (np.exp(8 * MU) - 1),
        3: (np.exp(4 * MU) - 1) / (np.exp(8 * MU) - 1),
        4: 1.0,
    }
    assert set(by_weight) == set(want)      # |n| = 2 rows are absent
    for k, rows in by_weight.items():
        for row in rows:
            assert abs(row.probability - want[k]) <= 1e-12
    # feedback operators are (iX +- 1)/sqrt(2) up to a global phase
    x4 = parse_pauli("X4", 9).to_dense()
    eye = np.eye(2 ** 9)
    for row in by_weight[0]:
        got = row.feedback.to_dense()
        assert proportional_up_to_phase(got, (1j * x4 - eye) / np.sqrt(2), 1e-10)
    for row in by_weight[4]:
        got = row.feedback.to_dense()
        assert proportional_up_to_phase(got, (1j * x4 + eye) / np.sqrt(2), 1e-10)


def test_hamiltonian_correction_zero_mu_gives_no_feedback():
    pot = chain_potential(3, 0.0)
    delta, proto = correct_hamiltonian_error(pot, parse_pauli("X0", 3), 0.5)
    assert len(proto.rows) == 0
    assert len(delta.basis) == 0 or np.abs(delta.gamma).max() <= 1e-15


def test_hamiltonian_correction_commuting_error_is_empty():
    pot = chain_potential(3, 0.4)
    delta, proto = correct_hamiltonian_error(pot, parse_pauli("Z0 Z1", 3), 0.5)
    assert len(delta.basis) == 0
    assert proto.measured == ()


def test_alpha_knob_preserves_exactness():
    pot = chain_potential(4, MU)
    p = parse_pauli("X2", 4)
    err = error_generator(pot, ErrorSpec("hamiltonian_pauli", p, 0.5))
    for alpha in (0.5, 1.0, 2.5):
        delta, proto = correct_hamiltonian_error(pot, p, 0.5, alpha=alpha)
        assert stationarity_residual(merge_models(err, delta)) <= 1e-12
        replay = protocol_to_lindbladian(proto)
        assert stationarity_residual(merge_models(err, replay)) <= 1e-12


# -- incoherent Pauli errors ---------------------------------------------------------

@pytest.mark.parametrize("variant", ["one_sided", "symmetric"])
def test_pauli_correction_restores_stationarity(variant):
    pot = chain_potential(4, MU)
    p = parse_pauli("X1", 4)
    g = 0.3
    err = error_generator(pot, ErrorSpec("incoherent_pauli", p, g))
    assert stationarity_residual(err) >= 1e-3 * g
    delta, proto = correct_pauli_error(pot, p, g, variant=variant)
    assert stationarity_residual(merge_models(err, delta)) <= 1e-12
    assert max(r.probability for r in proto.rows) == 1.0


def test_pauli_correction_protocol_rates():
    pot = torus_potential(3, 3, MU)
    g = 0.8
    _, proto = correct_pauli_error(pot, parse_pauli("X4", 9), g, variant="one_sided")
    assert np.isclose(proto.measurement_rate, g * (np.exp(8 * MU) - 1))
    probs = {r.weight: r.probability for r in proto.rows}
    assert set(probs) == {3, 4}
    assert np.isclose(probs[3], (np.exp(4 * MU) - 1) / (np.exp(8 * MU) - 1))
    assert np.isclose(probs[4], 1.0)
    _, proto_s = correct_pauli_error(pot, parse_pauli("X4", 9), g, variant="symmetric")
    assert np.isclose(proto_s.measurement_rate, g * np.exp(8 * MU))
    probs_s = {r.weight: r.probability for r in proto_s.rows}
    assert np.isclose(probs_s[0], np.exp(-16 * MU))
    assert np.isclose(probs_s[2], np.exp(-8 * MU))


def test_pauli_correction_commuting_is_empty():
    pot = chain_potential(4, 0.5)
    delta, _ = correct_pauli_error(pot, parse_pauli("Z1 Z2", 4), 0.3)
    assert len(delta.basis) == 0


# -- general incoherent errors ----------------------------------------------------------

def rydberg_terms(n=2):
    return [
        (0.5, parse_pauli("I", n)),
        (0.5, parse_pauli("X0", n)),
        (0.5, parse_pauli("X1", n)),
        (-0.5, parse_pauli("X0 X1", n)),
    ]


def test_rydberg_correction_restores_stationarity():
    pot = field_potential(2, np.log(1.5))
    g = 2.5
    err = error_generator(pot, ErrorSpec("incoherent_general", rydberg_terms(), g))
    assert stationarity_residual(err) >= 1e-2
    delta, plan = correct_general_error(pot, rydberg_terms(), g)
    assert stationarity_residual(merge_models(err, delta)) <= 1e-12
    assert delta.min_gamma_eig() >= -1e-12


def test_rydberg_class_jumps_match_paper_forms():
    mu = np.log(1.5)
    pot = field_potential(2, mu)
    _, plan = correct_general_error(pot, rydberg_terms(), 2.5)
    cs = sorted(e["c"] for e in plan.entries)
    want = sorted([1.0, np.exp(-mu), np.exp(mu), np.exp(-2 * mu), np.exp(2 * mu)])
    np.testing.assert_allclose(cs, want, atol=1e-12)
    # c = 1 block: [1 - X0 X1 sum_{n0+n1=0} Pi(n)]/2
    by_c = {round(e["c"], 10): e for e in plan.entries}
    z0 = parse_pauli("Z0", 2).to_dense()
    z1 = parse_pauli("Z1", 2).to_dense()
    eye = np.eye(4)
    pi_pm = (eye + z0) / 2 @ (eye - z1) / 2
    pi_mp = (eye - z0) / 2 @ (eye + z1) / 2
    xx = parse_pauli("X0 X1", 2).to_dense()
    want_c1 = (eye - xx @ (pi_pm + pi_mp)) / 2
    np.testing.assert_allclose(
        by_c[1.0]["jump"].to_dense(), want_c1, atol=1e-12
    )
    # c = e^{-mu} block: [X0 Pi(n0=+1) + X1 Pi(n1=+1)]/2
    x0 = parse_pauli("X0", 2).to_dense()
    x1 = parse_pauli("X1", 2).to_dense()
    want_cm = (x0 @ (eye + z0) / 2 + x1 @ (eye + z1) / 2) / 2
    np.testing.assert_allclose(
        by_c[round(np.exp(-mu), 10)]["jump"].to_dense(), want_cm, atol=1e-12
    )


def test_general_single_term_reduces_to_pauli_correction():
    # with incommensurate potentials every outcome class is a singleton and
    # the class-jump correction collapses to the diagonal Pauli correction
    from stabsteer.pauli import PauliString
    from stabsteer.potential import StabilizerPotential

    terms = [
        (parse_pauli("Z0 Z1", 4), 0.31),
        (parse_pauli("Z1 Z2", 4), 0.57),
        (parse_pauli("Z2 Z3", 4), 0.93),
        (parse_pauli("Z3 Z0", 4), 1.41),
    ]
    pot = StabilizerPotential(4, terms)
    p = parse_pauli("X2", 4)
    g = 0.45
    delta_g, _ = correct_general_error(pot, [(1.0, p)], g)
    delta_p, _ = correct_pauli_error(pot, p, g, variant="symmetric")
    np.testing.assert_allclose(
        delta_g.to_superoperator(), delta_p.to_superoperator(), atol=1e-11
    )


def test_general_single_term_uniform_chain_equivalent_action():
    # on the uniform chain equal-c words within the Pauli pick up class
    # couplings; both corrections still cancel the same error exactly
    pot = chain_potential(4, MU)
    p = parse_pauli("X2", 4)
    g = 0.45
    err = error_generator(pot, ErrorSpec("incoherent_pauli", p, g))
    delta_g, _ = correct_general_error(pot, [(1.0, p)], g)
    delta_p, _ = correct_pauli_error(pot, p, g, variant="symmetric")
    assert stationarity_residual(merge_models(err, delta_g)) <= 1e-12
    assert stationarity_residual(merge_models(err, delta_p)) <= 1e-12


def test_correction_linearity_across_disjoint_errors():
    pot = chain_potential(5, MU)
    g1, g2 = 0.3, 0.5
    p1, p2 = parse_pauli("X0", 5), parse_pauli("X2", 5)
    err = merge_models(
        error_generator(pot, ErrorSpec("incoherent_pauli", p1, g1)),
        error_generator(pot, ErrorSpec("incoherent_pauli", p2, g2)),
    )
    d1, _ = correct_pauli_error(pot, p1, g1)
    d2, _ = correct_pauli_error(pot, p2, g2)
    assert stationarity_residual(merge_models(err, merge_models(d1, d2))) <= 1e-12


# -- protocol replay ----------------------------------------------------------------------

def test_replay_reproduces_delta_plus_neutral_dephasing():
    pot = chain_potential(4, MU)
    p = parse_pauli("X1", 4)
    delta, proto = correct_pauli_error(pot, p, 0.3, variant="one_sided")
    replay = protocol_to_lindbladian(proto)
    sup_diff = replay.to_superoperator() - delta.to_superoperator()
    sigma = pot.sigma()
    assert np.abs(sup_diff @ sigma.reshape(-1)).max() <= 1e-12
    # difference is trace preserving as well
    rng = np.random.default_rng(0)
    rho = rng.normal(size=(16, 16))
    rho = rho @ rho.T
    diff_applied = (sup_diff @ rho.reshape(-1)).reshape(16, 16)
    assert abs(np.trace(diff_applied)) <= 1e-12


def test_metropolis_feedback_probabilities():
    mu, gam = 0.8, 1.0
    pot = field_potential(1, mu)
    proto = conditional_flip_protocol(pot, parse_pauli("X0", 1), gam)
    assert np.isclose(proto.measurement_rate, gam * np.exp(mu))
    probs = {r.word[0]: r.probability for r in proto.rows}
    # p_f(n) = e^{-(1 + n sgn mu)|mu|}: the Metropolis acceptance
    assert np.isclose(probs[+1], np.exp(-2 * mu))
    assert np.isclose(probs[-1], 1.0)
    lind = protocol_to_lindbladian(proto)
    assert stationarity_residual(lind) <= 1e-12


def test_all_zero_feedback_is_stationarity_neutral():
    pot = chain_potential(3, 0.6)
    proto = conditional_flip_protocol(pot, parse_pauli("X0", 3), 1.0)
    for row in proto.rows:
        row.probability = 0.0
    lind = protocol_to_lindbladian(proto)
    assert stationarity_residual(lind) <= 1e-13


# -- readout-error recalibration --------------------------------------------------------

def test_recalibration_q0_is_identity():
    pot = chain_potential(4, MU)
    _, proto = correct_hamiltonian_error(pot, parse_pauli("X1", 4), 0.7)
    res = recalibrate_for_readout_errors(proto, 0.0)
    assert res.feasible
    for row in proto.rows:
        got = res.protocol.row_for(row.word)
        assert abs(
            got.probability * res.protocol.measurement_rate
            - row.probability * proto.measurement_rate
        ) <= 1e-9


def test_recalibrated_protocol_cancels_error_densely():
    pot = chain_potential(4, MU)
    p = parse_pauli("X1", 4)
    g, q = 0.7, 0.15
    err = error_generator(pot, ErrorSpec("hamiltonian_pauli", p, g))
    _, proto = correct_hamiltonian_error(pot, p, g)
    res = recalibrate_for_readout_errors(proto, q)
    assert res.feasible
    noisy = protocol_to_lindbladian(res.protocol)
    assert stationarity_residual(merge_models(err, noisy)) <= 1e-12
    # without recalibration the noisy protocol fails
    proto.readout_q = q
    naive = protocol_to_lindbladian(proto)
    assert stationarity_residual(merge_models(err, naive)) >= 1e-3


def test_two_qubit_threshold_closed_form():
    mu = MU
    pot = chain_potential(2, mu, pbc=False)
    _, proto = correct_pauli_error(pot, parse_pauli("X0", 2), 1.0, variant="one_sided")
    thr = recalibration_threshold(proto, iters=48)
    want = np.exp(-2 * mu) / (1 + np.exp(-2 * mu))   # q/(1-q) = e^{-2 mu}
    assert abs(thr - want) <= 1e-10


def test_infeasible_recalibration_reports_signed_rates():
    pot = chain_potential(2, MU, pbc=False)
    _, proto = correct_pauli_error(pot, parse_pauli("X0", 2), 1.0)
    res = recalibrate_for_readout_errors(proto, 0.45)   # beyond threshold
    assert not res.feasible
    assert res.protocol is None
    assert len(res.violating) >= 1
    assert np.min(res.solved_vector) < 0


def test_error_spec_validation():
    with pytest.raises(ConstraintError):
        ErrorSpec("bogus", None, 1.0)
    with pytest.raises(ConstraintError):
        ErrorSpec("incoherent_pauli", parse_pauli("X0", 1), -1.0)
    with pytest.raises(ConstraintError):
        ErrorSpec(
            "incoherent_general",
            [(1.0, parse_pauli("X0", 1)), (2.0, parse_pauli("X0", 1))],
            1.0,
        )


def test_protocol_csv_json_roundtrip(tmp_path):
    pot = chain_potential(4, MU)
    _, proto = correct_hamiltonian_error(pot, parse_pauli("X1", 4), 0.7)
    proto.write_csv(tmp_path / "proto.csv")
    proto.write_json(tmp_path / "proto.json")
    import json

    data = json.loads((tmp_path / "proto.json").read_text())
    back = FeedbackProtocol.from_json_dict(data, pot)
    assert back.measured == proto.measured
    assert np.isclose(back.measurement_rate, proto.measurement_rate)
    for row in proto.rows:
        got = back.row_for(row.word)
        assert np.isclose(got.probability, row.probability)
        np.testing.assert_allclose(
            got.feedback.to_dense(), row.feedback.to_dense(), atol=1e-12
        )
    text = (tmp_path / "proto.csv").read_text()
    assert "outcome_predicate" in text and "probability" in text
