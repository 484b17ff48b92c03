"""k-nearest-neighbour (Kozachenko-Leonenko) entropy estimation for
stationary time series, with exact Gaussian chain simulators and
Monte-Carlo diagnostics."""

__version__ = "0.1.0"

from .core_math import (
    HolderProfile,
    Metric,
    MixingProfile,
    MomentProfile,
    digamma,
    gamma_tail,
    gaussian_entropy,
    loglog_fit,
    tridiag_det,
    unit_ball_volume,
)
from .errors import (
    ArityError,
    DecompositionError,
    DegenerateDataError,
    DomainError,
    InvalidSpecError,
    KLEntropyError,
)
from .estimator import (
    EntropyEstimate,
    EstimatorConfig,
    kl_entropy,
    mutual_information,
    plug_in_entropy,
)
from .neighbors import Dataset, KDTree, KnnResult, count_in_ball, knn_distances
from .processes import (
    GaussianChainSpec,
    RngSeed,
    build_sigma,
    cholesky,
    sample_iid_gaussian,
    sample_pinned_chain,
    sample_stationary_chain,
)
