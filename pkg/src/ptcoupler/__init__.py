"""Simulator for a two-mode optical coupler with periodically modulated loss.

Solves the master equation of the coupler in Liouville space through a
product-of-exponentials factorisation of the evolution superoperator, extracts
Floquet and Lyapunov exponents of the one-cycle propagator to map the
symmetry-breaking phase diagram, propagates multi-photon states, and validates
a waveguide-array implementation of the modulated loss.
"""

__version__ = "0.1.0"

from .fock import (
    DensityMatrix,
    LiouvilleVector,
    TwoModeBasis,
    build_basis,
    devectorize,
    fock_state,
    occupation,
    superposition_state,
    vectorize,
)
from .loss import ConstantProfile, LossProfile, gamma_of_z, mean_loss, profile_for_target
from .superops import CouplerParams, Superoperator, commutator_table, generator, liouvillian
from .weinorman import SegmentedPropagator, propagator
from .oracle import oracle_monodromy, oracle_propagate
from .floquet import (
    FloquetResult,
    PhaseDiagram,
    PTPhase,
    classify_pt,
    monodromy_2x2,
    monodromy_full,
    occupation_trajectories,
    phase_diagram,
    propagate_state,
)
from .reservoir import (
    ReservoirConfig,
    Trajectory,
    analytic_decay,
    config_for_target,
    coupling_profile,
    decay_rate,
    full_system_comparison,
    recurrence_estimate,
    simulate_array,
)

__all__ = [
    "__version__",
    "TwoModeBasis",
    "DensityMatrix",
    "LiouvilleVector",
    "build_basis",
    "vectorize",
    "devectorize",
    "occupation",
    "fock_state",
    "superposition_state",
    "LossProfile",
    "ConstantProfile",
    "gamma_of_z",
    "profile_for_target",
    "mean_loss",
    "CouplerParams",
    "Superoperator",
    "generator",
    "liouvillian",
    "commutator_table",
    "SegmentedPropagator",
    "propagator",
    "oracle_propagate",
    "oracle_monodromy",
    "FloquetResult",
    "PTPhase",
    "PhaseDiagram",
    "monodromy_2x2",
    "monodromy_full",
    "classify_pt",
    "phase_diagram",
    "propagate_state",
    "occupation_trajectories",
    "ReservoirConfig",
    "Trajectory",
    "config_for_target",
    "coupling_profile",
    "decay_rate",
    "simulate_array",
    "analytic_decay",
    "recurrence_estimate",
    "full_system_comparison",
]
