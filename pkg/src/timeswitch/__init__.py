"""Quantum SWITCH from superpositions in decay times: simulation and certification."""

from .decay_engine import (
    AggregatedState,
    BranchState,
    DecayParams,
    GateSet,
    JointAmplitude,
    OrderProbabilities,
    TimerRecord,
    TruncationError,
    chi_continuous,
    cumulative_decay_probability,
    delta_p,
    discrete_continuum_check,
    evolve,
    evolve_aggregated,
    joint_amplitude_analysis,
    jump_amplitude,
    mprime_states,
    order_probabilities,
    reduced_sc_state,
    step,
    survival_amplitude,
)
from .qcore import (
    DensityMatrix,
    Ket,
    Operator,
    apply_on,
    basis,
    fidelity,
    hadamard,
    haar_random_unitary,
    identity,
    partial_trace,
    pauli_x,
    pauli_y,
    pauli_z,
    tensor,
    trace_distance,
)
from .realizations import (
    TimeBinConfig,
    switch_from_decays,
    symmetrize_timer,
    time_bin_state,
    unequal_rate_diagnostics,
)
from .switch_verify import SwitchResult, commutation_task, compare, ideal_switch

__version__ = "0.1.0"

__all__ = [
    "AggregatedState",
    "BranchState",
    "DecayParams",
    "DensityMatrix",
    "GateSet",
    "JointAmplitude",
    "Ket",
    "Operator",
    "OrderProbabilities",
    "SwitchResult",
    "TimeBinConfig",
    "TimerRecord",
    "TruncationError",
    "apply_on",
    "basis",
    "chi_continuous",
    "commutation_task",
    "compare",
    "cumulative_decay_probability",
    "delta_p",
    "discrete_continuum_check",
    "evolve",
    "evolve_aggregated",
    "fidelity",
    "haar_random_unitary",
    "hadamard",
    "ideal_switch",
    "identity",
    "joint_amplitude_analysis",
    "jump_amplitude",
    "mprime_states",
    "order_probabilities",
    "partial_trace",
    "pauli_x",
    "pauli_y",
    "pauli_z",
    "reduced_sc_state",
    "step",
    "survival_amplitude",
    "switch_from_decays",
    "symmetrize_timer",
    "tensor",
    "time_bin_state",
    "trace_distance",
    "unequal_rate_diagnostics",
]
