"""stabsteer: design, verify, time-reverse, correct, and simulate local
Lindbladians whose stationary state is a prescribed stabilizer Gibbs state
sigma = exp(-Phi)."""

__version__ = "0.1.0"

from .pauli import PauliString, PauliSum, identity, parse_pauli
from .potential import (
    DressedJump,
    StabilizerPotential,
    all_dressings,
    apply_S,
    chain_potential,
    decompose_operator,
    dressed_jump,
    field_potential,
    projected_jump,
    torus_potential,
)
from .lindblad import (
    AssembledModel,
    LindbladModel,
    assemble,
    check_strong_symmetry,
    check_weak_symmetry,
    davies_generator,
    from_m_matrix,
    merge_models,
    random_admissible_m,
    single_site_flip_basis,
    stationarity_residual,
    t_parity_split,
    time_reverse,
)
from .correct import (
    ErrorSpec,
    FeedbackProtocol,
    GeneralizedMeasurementPlan,
    ProtocolRow,
    conditional_flip_protocol,
    correct_error,
    correct_general_error,
    correct_hamiltonian_error,
    correct_pauli_error,
    error_generator,
    protocol_to_lindbladian,
    recalibrate_for_readout_errors,
    recalibration_threshold,
)
from .evolve import (
    EvolutionResult,
    SimulationConfig,
    SteadyStateResult,
    SuperoperatorHandle,
    correlation,
    evolve,
    kraus_completeness_defect,
    kraus_step,
    steady_state_solve,
    svd_generalized_measurement,
    trajectory_sample,
)
from .todd import (
    MotifRateTable,
    QuantumBlockSolution,
    assemble_classical_model,
    assemble_quantum_block,
    classical_todd_rates,
    drift_correlator,
    enumerate_g_basis,
    f_from_g,
    preset_models,
    quantum_block_solve,
    superposition_correlator,
    zeno_dephasing,
)
from .modelspec import ModelSpec, parse_model_spec
