"""cglearn: learning consistent connection graphs from vector-valued signals.

A connection graph couples a weighted topology with an orthogonal map per
edge.  This package learns the topology, the edge weights and per-node
orthogonal bases jointly from signal snapshots via block-coordinate descent
with Riemannian updates, and ships the synthetic generators, baselines and
evaluation metrics used to benchmark that solver.
"""

from .datagen import (
    GroundTruth,
    SignalMatrix,
    fibonacci_sphere,
    knn_graph,
    sample_er_cg,
    sample_signals,
    samples_for_ratio,
    spherical_cg,
    tangent_frames,
    vdm_edge_maps,
)
from .graphs import (
    ConnectionGraph,
    ConnectionLaplacian,
    ConsistencyReport,
    DisconnectedGraphError,
    NodeBases,
    SynchronizationError,
    assemble_from_bases,
    build_connection_laplacian,
    check_consistency,
    combinatorial_laplacian,
    kron_gram_operator,
    kron_laplacian,
    kron_laplacian_adjoint,
    log_gdet,
    project_special_orthogonal,
    synchronize,
)
from .indexing import EdgeIndexMap, edge_count, edge_endpoints, edge_index, edge_pairs
from .metrics import (
    EvalReport,
    empirical_tv,
    evaluate,
    f1_sparsity,
    heat_distance,
    kernel_dimension,
    spectral_distance,
    weight_mse,
)
from .solver import (
    FitResult,
    Hyperparams,
    OStepControls,
    SolverState,
    cross_validate,
    fit,
    objective,
    update_O,
    update_U,
    update_lambda,
    update_w,
)

__all__ = [
    "ConnectionGraph",
    "ConnectionLaplacian",
    "ConsistencyReport",
    "DisconnectedGraphError",
    "EdgeIndexMap",
    "EvalReport",
    "FitResult",
    "GroundTruth",
    "Hyperparams",
    "NodeBases",
    "OStepControls",
    "SignalMatrix",
    "SolverState",
    "SynchronizationError",
    "assemble_from_bases",
    "build_connection_laplacian",
    "check_consistency",
    "combinatorial_laplacian",
    "cross_validate",
    "edge_count",
    "edge_endpoints",
    "edge_index",
    "edge_pairs",
    "empirical_tv",
    "evaluate",
    "f1_sparsity",
    "fibonacci_sphere",
    "fit",
    "heat_distance",
    "kernel_dimension",
    "knn_graph",
    "kron_gram_operator",
    "kron_laplacian",
    "kron_laplacian_adjoint",
    "log_gdet",
    "objective",
    "project_special_orthogonal",
    "sample_er_cg",
    "sample_signals",
    "samples_for_ratio",
    "spectral_distance",
    "spherical_cg",
    "synchronize",
    "tangent_frames",
    "update_O",
    "update_U",
    "update_lambda",
    "update_w",
    "vdm_edge_maps",
    "weight_mse",
]

__version__ = "0.1.0"
