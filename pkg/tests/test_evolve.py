import numpy as np
import pytest

from stabsteer.errors import ConstraintError, IntegrationError
from stabsteer.lindblad import (
    LindbladModel,
    assemble,
    from_m_matrix,
    random_admissible_m,
    single_site_flip_basis,
)
from stabsteer.pauli import PauliString, PauliSum, identity, parse_pauli
from stabsteer.potential import (
    StabilizerPotential,
    all_dressings,
    chain_potential,
    dressed_jump,
    field_potential,
)
from stabsteer.correct import (
    conditional_flip_protocol,
    protocol_to_lindbladian,
)
from stabsteer.evolve import (
    EvolutionResult,
    Masked,
    SimulationConfig,
    SuperoperatorHandle,
    correlation,
    evolve,
    kraus_completeness_defect,
    kraus_step,
    steady_state_solve,
    svd_generalized_measurement,
    trajectory_sample,
    validate_density_matrix,
)


def random_chain_model(L=4, mu=0.4, seed=0, scale=0.4):
    rng = np.random.default_rng(seed)
    pot = chain_potential(L, mu)
    basis = single_site_flip_basis(pot)
    return from_m_matrix(basis, random_admissible_m(basis, rng, scale))


def single_qubit_damping(mu=0.8, gam=1.0):
    pot = field_potential(1, mu)
    basis = single_site_flip_basis(pot, include_stabilizers=False)
    return from_m_matrix(basis, np.diag([gam / 2, gam / 2]), pot)


# -- masked kernels ------------------------------------------------------------

def test_masked_matches_dense_algebra():
    rng = np.random.default_rng(1)
    n = 3
    for _ in range(20):
        p = PauliString(n, int(rng.integers(8)), int(rng.integers(8)),
                        int(rng.integers(4)))
        q = PauliString(n, int(rng.integers(8)), int(rng.integers(8)),
                        int(rng.integers(4)))
        kp, kq = Masked.from_pauli(p), Masked.from_pauli(q)
        np.testing.assert_allclose(kp.to_dense(), p.to_dense(), atol=1e-14)
        np.testing.assert_allclose(
            (kp @ kq).to_dense(), p.to_dense() @ q.to_dense(), atol=1e-13
        )
        np.testing.assert_allclose(
            kp.dagger().to_dense(), p.to_dense().conj().T, atol=1e-14
        )
        rho = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        np.testing.assert_allclose(kp.left(rho), p.to_dense() @ rho, atol=1e-13)
        np.testing.assert_allclose(kp.right(rho), rho @ p.to_dense(), atol=1e-13)


def test_masked_jump_matches_dense():
    pot = chain_potential(4, 0.5)
    for jump in all_dressings(parse_pauli("X1", 4), pot):
        k = Masked.from_jump(jump)
        np.testing.assert_allclose(k.to_dense(), jump.dense(), atol=1e-13)


# -- superoperator handle --------------------------------------------------------

def test_dense_and_matvec_agree():
    rng = np.random.default_rng(2)
    model = random_chain_model(L=5, seed=3)
    dense = SuperoperatorHandle(model, mode="dense")
    mv = SuperoperatorHandle(model, mode="matvec")
    dim = 2 ** 5
    for _ in range(4):
        rho = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        np.testing.assert_allclose(dense.apply(rho), mv.apply(rho), atol=1e-12)


def test_adjoint_handle_consistency():
    # tr[A^dag L(B)] = tr[(L^dag(A))^dag B]
    rng = np.random.default_rng(3)
    model = random_chain_model(L=3, seed=4)
    fwd = SuperoperatorHandle(model, mode="matvec")
    adj = SuperoperatorHandle(model, mode="matvec", adjoint=True)
    dim = 8
    for _ in range(4):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        lhs = np.trace(a.conj().T @ fwd.apply(b))
        rhs = np.trace(adj.apply(a).conj().T @ b)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_spectral_sanity():
    # eigenvalues of the generator have nonpositive real part (contraction)
    for seed in range(3):
        model = random_chain_model(L=3, seed=seed)
        vals = np.linalg.eigvals(SuperoperatorHandle(model, mode="dense").matrix())
        assert vals.real.max() <= 1e-10 * max(1.0, np.abs(vals).max())


# -- evolve ------------------------------------------------------------------------

def test_zero_model_is_constant():
    pot = chain_potential(3, 0.3)
    basis = single_site_flip_basis(pot)
    model = from_m_matrix(basis, np.zeros((len(basis), len(basis))))
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[0, 0] = 1.0
    cfg = SimulationConfig(t_final=1.0, dt=0.25,
                           observables=[("Z0", parse_pauli("Z0", 3))])
    res = evolve(rho0, model, cfg)
    np.testing.assert_allclose(res.expectations["Z0"].real, 1.0, atol=1e-12)
    np.testing.assert_allclose(res.final_rho, rho0, atol=1e-12)


def test_single_qubit_relaxation_rates():
    mu, gam = 0.8, 1.3
    model = single_qubit_damping(mu, gam)
    rho0 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    cfg = SimulationConfig(t_final=5.0, dt=0.05,
                           observables=[("Z", parse_pauli("Z0", 1))])
    res = evolve(rho0, model, cfg)
    # two-level rate equation: relaxation to tanh(mu) at rate gam*(e^mu+e^-mu)
    rate = gam * (np.exp(mu) + np.exp(-mu))
    z = np.tanh(mu) + (-1 - np.tanh(mu)) * np.exp(-rate * res.times)
    np.testing.assert_allclose(res.expectations["Z"].real, z, atol=1e-10)


def test_dense_vs_adaptive_rk():
    model = random_chain_model(L=3, seed=5)
    dim = 8
    rho0 = np.eye(dim, dtype=complex) / dim
    obs = [("ZZ", parse_pauli("Z0 Z1", 3)), ("X1", parse_pauli("X1", 3))]
    cfg_d = SimulationConfig(integrator="dense_exponential", t_final=2.0,
                             dt=0.2, observables=obs)
    cfg_r = SimulationConfig(integrator="adaptive_rk", t_final=2.0, dt=0.2,
                             observables=obs, rtol=1e-10, atol=1e-12)
    res_d = evolve(rho0, model, cfg_d)
    res_r = evolve(rho0, model, cfg_r)
    for name in ("ZZ", "X1"):
        assert np.abs(
            res_d.expectations[name] - res_r.expectations[name]
        ).max() <= 1e-8


def test_positivity_along_trajectory():
    model = random_chain_model(L=3, seed=6)
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[3, 3] = 1.0
    cfg = SimulationConfig(t_final=3.0, dt=0.1, store_states=True)
    res = evolve(rho0, model, cfg)
    for rho in res.states:
        assert np.linalg.eigvalsh(rho)[0] >= -1e-8
        assert abs(np.trace(rho).real - 1.0) <= 1e-9


def test_bad_initial_state_rejected():
    model = single_qubit_damping()
    with pytest.raises(ConstraintError):
        evolve(np.array([[1.0, 0.5], [0.2, 0.0]]), model,
               SimulationConfig(t_final=1.0, dt=0.5))
    with pytest.raises(ConstraintError):
        evolve(np.diag([0.7, 0.7]), model, SimulationConfig(t_final=1, dt=0.5))


# -- steady states -------------------------------------------------------------------

def test_steady_state_single_qubit():
    mu = 0.9
    model = single_qubit_damping(mu)
    res = steady_state_solve(model)
    want = np.diag([np.exp(mu), np.exp(-mu)]) / (2 * np.cosh(mu))
    np.testing.assert_allclose(res.state, want, atol=1e-10)
    assert not res.degenerate


def test_steady_state_degenerate_sector_detection():
    # the global flip is a strong symmetry of conditional-flip chains, so the
    # fixed space is two dimensional; the canonical state is still sigma
    model = random_chain_model(L=4, seed=7)
    res = steady_state_solve(model)
    assert res.degenerate
    assert len(res.basis) == 2
    sig = model.potential.sigma(normalize=True)
    assert 0.5 * np.abs(np.linalg.eigvalsh(res.state - sig)).sum() <= 1e-8


def test_steady_state_evolve_mode_matches_dense():
    model = random_chain_model(L=3, seed=8)
    dense = steady_state_solve(model, mode="dense")
    evolved = steady_state_solve(model, mode="evolve")
    assert np.abs(dense.state - evolved.state).max() <= 1e-6


# -- correlations -----------------------------------------------------------------------

def test_correlation_identity_is_one():
    model = random_chain_model(L=3, seed=9)
    ident = PauliSum.from_pairs([(1.0, identity(3))], 3)
    out = correlation(model, ident, ident, [0.0, 0.5, 1.3])
    np.testing.assert_allclose(out, 1.0, atol=1e-10)


def test_equal_time_ising_correlators_match_transfer_matrix():
    L, mu = 5, 0.25 * np.log(2)
    model = random_chain_model(L=L, mu=mu, seed=10)
    t = np.tanh(mu)
    for r in (1, 2):
        zz = PauliSum.from_pairs(
            [(1.0, parse_pauli(f"Z0 Z{r}", L))], L
        )
        got = correlation(model, zz, PauliSum.from_pairs(
            [(1.0, identity(L))], L), [0.0])[0]
        want = (t ** r + t ** (L - r)) / (1 + t ** L)
        assert abs(got.real - want) <= 1e-10


def test_heisenberg_schrodinger_agreement():
    model = random_chain_model(L=3, seed=11)
    pot = model.potential
    sigma = pot.sigma(normalize=True)
    a = PauliSum.from_pairs([(1.0, parse_pauli("Z1", 3))], 3)
    times = [0.0, 0.4, 0.9]
    heis = correlation(model, a, PauliSum.from_pairs([(1.0, identity(3))], 3),
                       times, sigma=sigma)
    cfg = SimulationConfig(t_final=0.9, dt=0.1, observables=[("A", a)],
                           integrator="dense_exponential")
    res = evolve(sigma, model, cfg)
    for t, h in zip(times, heis):
        k = int(round(t / 0.1))
        assert abs(res.expectations["A"][k] - h) <= 1e-8


# -- Kraus --------------------------------------------------------------------------------

def test_kraus_zero_model_is_identity():
    pot = chain_potential(3, 0.2)
    basis = single_site_flip_basis(pot)
    model = from_m_matrix(basis, np.zeros((len(basis), len(basis))))
    ops = kraus_step(model, 0.01)
    assert len(ops) == 1
    np.testing.assert_allclose(ops[0], np.eye(8), atol=1e-12)


def test_kraus_defect_scales_quadratically():
    model = single_qubit_damping(0.7, 1.1)
    defects = [
        kraus_completeness_defect(kraus_step(model, dt))
        for dt in (2e-3, 1e-3, 5e-4)
    ]
    slope = np.log(defects[0] / defects[2]) / np.log(4.0)
    assert abs(slope - 2.0) <= 0.1


def test_kraus_channel_matches_evolve_to_second_order():
    model = single_qubit_damping(0.5, 0.9)
    rho0 = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]], dtype=complex)
    for dt in (1e-3, 5e-4):
        ops = kraus_step(model, dt)
        channel = sum(k @ rho0 @ k.conj().T for k in ops)
        exact = rho0 + dt * model.apply_dense(rho0)
        assert np.abs(channel - exact).max() <= 5 * dt ** 2


# -- SVD generalized measurement -----------------------------------------------------------

def test_svd_of_dressed_jump_is_projective():
    pot = field_potential(2, 0.6)
    jump = dressed_jump(parse_pauli("X0", 2), {0: 1}, pot)
    u, e, projective = svd_generalized_measurement(jump.dense())
    assert projective
    np.testing.assert_allclose(u @ e, jump.dense(), atol=1e-12)
    np.testing.assert_allclose(
        e, jump.projector_sum().to_dense(), atol=1e-12
    )


def test_svd_of_corrective_jump():
    pot = field_potential(1, 0.8)
    proj = (np.eye(2) + parse_pauli("Z0", 1).to_dense()) / 2
    op = (parse_pauli("X0", 1).to_dense() - 1j * np.eye(2)) / np.sqrt(2) @ proj
    u, e, projective = svd_generalized_measurement(op)
    np.testing.assert_allclose(e, proj, atol=1e-12)
    np.testing.assert_allclose(u @ e, op, atol=1e-12)
    assert projective


def test_svd_random_reconstruction():
    rng = np.random.default_rng(12)
    for _ in range(5):
        op = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        u, e, _ = svd_generalized_measurement(op)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(u @ e, op, atol=1e-12)
        assert np.linalg.eigvalsh(e)[0] >= -1e-12


# -- trajectories -----------------------------------------------------------------------------

def test_trajectory_pure_measurement_keeps_z_constant():
    pot = field_potential(1, 0.5)
    proto = conditional_flip_protocol(pot, parse_pauli("X0", 1), 1.0)
    # zero out the feedback probabilities: measurement-only protocol
    for row in proto.rows:
        row.probability = 0.0
    rho0 = np.diag([0.25, 0.75]).astype(complex)
    res = trajectory_sample(
        proto, rho0, 3.0, 400, 7, [("Z", parse_pauli("Z0", 1))], n_times=5
    )
    # the ensemble mean stays at tr[Z rho0]; single runs collapse to +-1
    dev = np.abs(res.expectations["Z"].real + 0.5)
    assert np.all(dev <= 3.0 * res.stderr["Z"] + 1e-12)
    assert dev[0] <= 1e-12


def test_trajectory_matches_exact_evolution():
    mu = 0.6
    pot = field_potential(1, mu)
    proto = conditional_flip_protocol(pot, parse_pauli("X0", 1), 1.0)
    lind = protocol_to_lindbladian(proto)
    rho0 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    obs = [("Z", parse_pauli("Z0", 1))]
    res_t = trajectory_sample(proto, rho0, 4.0, 1500, 11, obs, n_times=9)
    res_e = evolve(rho0, lind,
                   SimulationConfig(t_final=4.0, dt=0.5, observables=obs))
    dev = np.abs(res_t.expectations["Z"].real - res_e.expectations["Z"].real)
    bound = 3.0 * res_t.stderr["Z"] + 1e-9
    assert np.all(dev[1:] <= bound[1:])
    assert abs(res_t.expectations["Z"].real[-1] - np.tanh(mu)) <= 3.5 * (
        res_t.stderr["Z"][-1] + 1e-3
    )


def test_trajectory_readout_errors_match_convolved_lindbladian():
    mu, q = 0.45, 0.2
    pot = chain_potential(2, mu, pbc=False)
    proto = conditional_flip_protocol(pot, parse_pauli("X0", 2), 1.0)
    proto.readout_q = q
    lind = protocol_to_lindbladian(proto)
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[3, 3] = 1.0
    obs = [("ZZ", parse_pauli("Z0 Z1", 2))]
    res_t = trajectory_sample(proto, rho0, 3.0, 1200, 13, obs, n_times=7)
    res_e = evolve(rho0, lind,
                   SimulationConfig(t_final=3.0, dt=0.5, observables=obs))
    dev = np.abs(res_t.expectations["ZZ"].real - res_e.expectations["ZZ"].real)
    assert np.all(dev[1:] <= 3.0 * res_t.stderr["ZZ"][1:] + 1e-9)


def test_trajectory_rng_is_reproducible():
    pot = field_potential(1, 0.5)
    proto = conditional_flip_protocol(pot, parse_pauli("X0", 1), 1.0)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    obs = [("Z", parse_pauli("Z0", 1))]
    a = trajectory_sample(proto, rho0, 2.0, 50, 99, obs, n_times=5)
    b = trajectory_sample(proto, rho0, 2.0, 50, 99, obs, n_times=5)
    np.testing.assert_array_equal(a.expectations["Z"], b.expectations["Z"])
