"""dpalign: joint alignment and clustering of time-warped sequences.

Each sequence is modelled as a latent Gaussian-process function observed
through a learned monotone time warp; the de-warped sequences are regularized
by a truncated variational Dirichlet-process mixture, and everything is fitted
by maximizing a single joint objective.
"""

from . import _config  # noqa: F401  (enable float64 before anything else)

__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    FactorizationFailure,
    KernelParams,
    gram_matrix,
    kernel_eval,
    mvn_logpdf,
    robust_cholesky,
)
from .warp import (  # noqa: E402
    WarpState,
    aux_total_variation,
    warp_from_aux,
    warp_log_prior,
)
from .gp_model import (  # noqa: E402
    NoiseModel,
    SequenceModel,
    gp_predict_mean,
    joint_gp_loglik,
)
from .dpmm import (  # noqa: E402
    DPMMState,
    HyperPriors,
    coordinate_ascent_step,
    effective_num_clusters,
    elbo,
    elbo_terms,
    expected_log_sticks,
    map_cluster_assignments,
    responsibilities,
    stick_weights,
)
from .data import (  # noqa: E402
    Dataset,
    GENERATORS,
    MetricsReport,
    MissingGroups,
    ParseError,
    SyntheticConfig,
    alignment_error,
    data_fit_metric,
    generate_synthetic,
    load_csv,
    metrics_report,
    save_csv,
    warp_complexity_metric,
)
from .trainer import (  # noqa: E402
    FitResult,
    GradCheckReport,
    ModelConfig,
    NonFiniteObjective,
    TrainConfig,
    check_gradients,
    fit,
    joint_objective,
)

__all__ = [
    "__version__",
    "FactorizationFailure", "KernelParams", "gram_matrix", "kernel_eval",
    "mvn_logpdf", "robust_cholesky",
    "WarpState", "aux_total_variation", "warp_from_aux", "warp_log_prior",
    "NoiseModel", "SequenceModel", "gp_predict_mean", "joint_gp_loglik",
    "DPMMState", "HyperPriors", "coordinate_ascent_step",
    "effective_num_clusters", "elbo", "elbo_terms", "expected_log_sticks",
    "map_cluster_assignments", "responsibilities", "stick_weights",
    "Dataset", "GENERATORS", "MetricsReport", "MissingGroups", "ParseError",
    "SyntheticConfig", "alignment_error", "data_fit_metric",
    "generate_synthetic", "load_csv", "metrics_report", "save_csv",
    "warp_complexity_metric",
    "FitResult", "GradCheckReport", "ModelConfig", "NonFiniteObjective",
    "TrainConfig", "check_gradients", "fit", "joint_objective",
]
