"""Sample-based dependence and discrepancy estimators.

Everything here consumes paired feature batches (`SampleBatch`); nothing
touches the exact discrete layer. The conditional-density estimator is
the workhorse for model-vs-reference comparisons; the pairwise critics
provide lower-bound cross-checks; the spectral and kernel discrepancies
compare feature populations directly.
"""

from .club import (
    ClubEstimator,
    club_estimate,
    club_train,
    emi_estimate,
    loglik_slope,
)
from .config import EstimatorConfig
from .critics import infonce_estimate, mine_estimate, nwj_estimate
from .features import SampleBatch, read_features, write_features
from .mmd import mmd
from .rjsd import rjsd

__all__ = [
    "ClubEstimator",
    "EstimatorConfig",
    "SampleBatch",
    "club_estimate",
    "club_train",
    "emi_estimate",
    "infonce_estimate",
    "loglik_slope",
    "mine_estimate",
    "mmd",
    "nwj_estimate",
    "read_features",
    "rjsd",
    "write_features",
]
