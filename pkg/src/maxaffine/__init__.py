"""Sparse max-affine regression: generation, fitting, and experiments."""

from .errors import ConfigError, GuardError
from .experiment import (
    CellResult,
    ExperimentConfig,
    ExperimentGrid,
    load_config,
    lower_median,
    parse_config,
    run_experiment,
    run_trial,
)
from .model import (
    Dataset,
    DatasetMeta,
    MaxAffineParams,
    argmax_cell,
    empirical_pi,
    evaluate,
    generate_dataset,
    generate_ground_truth,
    relative_error,
)
from .numerics import fantope_project, hard_threshold_vector, soft_threshold
from .search import (
    Covering,
    InitCandidate,
    build_covering,
    covering_search,
    optimal_scale,
    random_search_init,
)
from .spectral import (
    SubspaceEstimate,
    fantope_admm,
    pca_baseline,
    residualized_moments,
    sparse_spectral,
    sparse_spectral_sweep,
    span_projector,
    subspace_error,
    weighted_moments,
)
from .spgd import SpgdConfig, SpgdReport, block_gradient, fit_spgd, loss, spgd_step
from .svg import render_heatmap

__all__ = [
    "CellResult",
    "ConfigError",
    "Covering",
    "Dataset",
    "DatasetMeta",
    "ExperimentConfig",
    "ExperimentGrid",
    "GuardError",
    "InitCandidate",
    "MaxAffineParams",
    "SpgdConfig",
    "SpgdReport",
    "SubspaceEstimate",
    "argmax_cell",
    "block_gradient",
    "build_covering",
    "covering_search",
    "empirical_pi",
    "evaluate",
    "fantope_admm",
    "fantope_project",
    "fit_spgd",
    "generate_dataset",
    "generate_ground_truth",
    "hard_threshold_vector",
    "load_config",
    "loss",
    "lower_median",
    "optimal_scale",
    "parse_config",
    "pca_baseline",
    "random_search_init",
    "relative_error",
    "render_heatmap",
    "residualized_moments",
    "run_experiment",
    "run_trial",
    "soft_threshold",
    "span_projector",
    "sparse_spectral",
    "sparse_spectral_sweep",
    "spgd_step",
    "subspace_error",
    "weighted_moments",
]

__version__ = "0.1.0"
