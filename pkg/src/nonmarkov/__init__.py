"""Witnessed-entanglement quantifier of non-Markovianity for finite-dimensional processes."""

__version__ = "0.1.0"

from .qcore import (
    DensityOperator,
    HermitianOperator,
    ValidationError,
    max_entangled,
    partial_trace,
    partial_transpose,
    tensor,
    trace_norm,
)
from .channel import (
    ChannelTrajectory,
    QuantumChannel,
    adjoint_apply,
    apply,
    choi_from_kraus,
    extend_to_ancilla,
    kraus_from_choi,
)
from .robustness import RobustnessResult, SolverError, WitnessOperator, rg_dual_witness, rg_primal
from .witness import (
    IntervalWitness,
    PositiveMapForm,
    expectation_via_map,
    interval_witness,
    witness_to_map,
    witnessed_nm,
)
from .measure import NonMarkovReport, continuity_check, diamond_distance, nm_total
