"""uqsim: compile spin Hamiltonians into raw-ZZ pulse schedules and execute
them on a dense statevector simulator with timing-error injection."""

from .pauli import (
    CoeffMatrix,
    Hamiltonian,
    LocalLayer,
    PauliError,
    PauliString,
    SingleQubitUnitary,
    coeff_matrix,
    commutator,
    commutator_generator,
    conjugate,
    from_coeff_matrix,
    pauli_multiply,
)
from .compiler import (
    ApplyLocal,
    CompileError,
    ControlSequence,
    CostReport,
    HardwareConstraintError,
    InfeasibleTargetError,
    PulseSchedule,
    RawGate,
    UnsupportedInteractionError,
    decoupling_echo,
    effective_hamiltonian,
    homogeneous_feasibility,
    inhomogeneous_cost,
    magnetic_field_layer,
    protocol_library,
    synthesize_diagonal,
    three_body_gate,
    trotter_schedule,
)
from .hardware import (
    HardwareError,
    LatticeModel,
    PulseProfile,
    TrapArrayModel,
    beam_compensation,
    crosstalk_report,
    geometry_remap,
    realize_schedule,
    theta_from_pulse,
    uqs1_gate,
    uqs2_push,
)
from .engine import (
    EngineError,
    ErrorModel,
    SpectrumCache,
    StateVector,
    apply_local_layer,
    apply_zz_gates,
    eigenspace_histogram,
    exact_evolve,
    expectation,
    fidelity,
    ground_state,
    run_schedule,
)

__version__ = "0.1.0"
