"""Bounded-confidence opinion dynamics with random pairwise interactions.

Simulation of the random-interaction system, the controlled merge
construction that bounds its convergence time, and checks of every
closed-form bound against both.
"""

from .control import (
    algorithm1_run,
    compute_S_T,
    compute_Tn,
    compute_Tn_star,
    merge_clusters,
    merge_schedule,
    mse_envelope,
    tau_tail_bound,
)
from .core import (
    ClusterPartition,
    ConfidenceProfile,
    EdgeSet,
    SystemState,
    detect_clusters,
    is_e1,
    neighbor_set,
    step,
    subset_diameter,
)
from .interaction import (
    InteractionModel,
    delta_lower_bound,
    erdos_renyi,
    make_rng,
    pair_matrix,
    sample_edge_set,
    uniform_subset,
    verify_lowbound_exhaustive,
)

__version__ = "0.1.0"
