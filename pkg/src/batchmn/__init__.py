"""Batch minimum-norm estimation for overparametrized Gaussian linear regression."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BatchMismatch,
    BatchMNError,
    DegenerateProjection,
    DimensionMismatch,
    DomainError,
    InvalidXi,
    NonIntegerDimension,
    SingularGram,
)
from .estimators import (  # noqa: E402
    EstimatorSpec,
    ModifiedModel,
    ShrinkMode,
    batch_min_norm,
    build_modified_model,
    iterative_batch_min_norm,
    min_norm,
    ridge,
    server_average,
    shrunk_batch_min_norm,
    subsample_min_norm,
)
from .model import BetaMode, Instance, ModelParams, generate_instance, make_params, normalized_risk  # noqa: E402
from .montecarlo import RiskEstimate, SweepConfig, estimate_risk, sweep, tune_ridge  # noqa: E402
