"""Hyperbox-based fuzzy min-max classifiers."""
from .batch import AggloConfig, box_similarity, fit_agglo2
from .core import (
    FMNN,
    GFMM,
    MISSING,
    UNLABELED,
    Dataset,
    Hyperbox,
    IntervalSample,
    ModelParams,
    TrainedModel,
    contract,
    expand,
    fmnn_membership,
    gfmm_membership,
    is_expandable,
    overlap_test,
    predict,
    predict_batch,
)
from .ensemble import (
    EnsembleConfig,
    EnsembleModel,
    fit_bagging,
    fit_random_hyperboxes,
    merge_models,
    predict_ensemble,
)
from .online import OnlineFitConfig, fit_fmnn, fit_iol_gfmm, fit_onln_gfmm, partial_fit

__version__ = "0.1.0"
