"""Cross-view person re-identification metric learning toolkit.

Learns an XQDA projection and Mahalanobis metric from two labeled camera
views, scores probe/gallery pairs, normalizes scores, and evaluates with
CMC curves under a k-fold identity-split protocol.
"""

from .datamodel import (
    CmcResult,
    CovariancePair,
    DifferenceSets,
    FeatureSet,
    ScoreMatrix,
    XqdaModel,
)
from .errors import XridError
from .estimator import XqdaMetricLearner
from .evaluation import ExperimentConfig, SplitPlan, cmc, make_splits, run_experiment
from .ingest import load_feature_set, load_manifest, save_feature_set
from .matcher import mahalanobis_distance, score_matrix
from .normalize import minmax_normalize
from .xqda import (
    EigenvalueThreshold,
    FixedR,
    build_difference_sets,
    covariance,
    load_model,
    project,
    save_model,
    solve_xqda,
)

__version__ = "0.1.0"

__all__ = [
    "CmcResult",
    "CovariancePair",
    "DifferenceSets",
    "EigenvalueThreshold",
    "ExperimentConfig",
    "FeatureSet",
    "FixedR",
    "ScoreMatrix",
    "SplitPlan",
    "XqdaMetricLearner",
    "XqdaModel",
    "XridError",
    "build_difference_sets",
    "cmc",
    "covariance",
    "load_feature_set",
    "load_manifest",
    "load_model",
    "mahalanobis_distance",
    "make_splits",
    "minmax_normalize",
    "project",
    "run_experiment",
    "save_feature_set",
    "save_model",
    "score_matrix",
    "solve_xqda",
    "__version__",
]
