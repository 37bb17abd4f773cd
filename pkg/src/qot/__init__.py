"""Overlapping tomography: hash-family scheduling, simulation and reconstruction
of every k-qubit reduced density matrix."""
from .backend import (
    CountsTable,
    DimerState,
    ExactData,
    PureState,
    dimer_chain,
    exact_expectation,
    exact_rdm,
    ghz_state,
    random_state,
    sample,
)
from .budget import ShotBudget, campaign, failure_bound, hoeffding_tail, shots_required
from .errors import InvalidArgument, MissingData, QOTError, ResourceLimit
from .estimate import (
    ReducedDensityMatrix,
    concurrence,
    entanglement_of_formation,
    expectation_from_counts,
    project_psd,
    reconstruct_all,
    reconstruct_rdm,
    route_pair,
)
from .hash_family import (
    HashFunction,
    PerfectHashFamily,
    binary_family,
    checkerboard_coloring,
    injective_functions,
    random_family,
    required_random_size,
    verify_perfect,
)
from .schedule import MeasurementPlan, naive_rounds, plan_general, plan_k2

__version__ = "0.1.0"
