"""Synchronization analysis of networked agents over directed switching graphs."""
from .graphs import (
    ReachDecomposition,
    SwitchingSignal,
    WeightedDigraph,
    check_joint_connectivity,
    has_directed_spanning_tree,
    laplacian,
    reach_decomposition,
    union_graph,
)
from .linalg import (
    Subspace,
    eigenstructure,
    kernel_basis_by_reaches,
    nullspace,
    observability_rank,
    project,
    projection_constants,
    rank,
    reduced_laplacian,
    refine_to_direct_sum,
)

__version__ = "0.1.0"
