"""Attention-weighted ensembles of Beran estimators for censored data."""

from .beran import BeranModel, CumulativeHazard, beran_chf, beran_sf, kaplan_meier
from .core import (
    ComparablePairSet,
    Dataset,
    Kernel,
    KernelFamily,
    NearestTimeNeighbors,
    PerObjectRandom,
    RandomK,
    StepSurvivalFunction,
    SurvivalRecord,
    build_pairs,
    concordance_index,
    expected_time,
    kernel_value,
    loss_censored,
    loss_mae,
    loss_observed,
    normalized_weights,
    paired_t_test,
    reduce_pairs,
)
from .data import (
    CsvSchema,
    SplitSpec,
    Standardizer,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    preset_config,
    save_csv,
    split,
)
from .ensemble import (
    EnsembleModel,
    Subsample,
    SurvBetaModel,
    attention_weights,
    bagging_predict_sf,
    fit_weak_learners,
    generate_subsamples,
    load_model,
    mean_prototype,
    predict_expected_time,
    predict_sf,
    prototype,
    save_model,
)
from .lp import LinearProgram, LPSolution, solve_lp
from .training import (
    FitConfig,
    TrainingTableau,
    build_cindex_lp,
    build_cindex_mae_lp,
    build_tableau,
    build_trainable_eps_lp,
    build_weak_table,
    fit_survbeta,
    project_simplex,
    recover_trainable_eps,
    regularized_objective,
    solve_regularized,
)

__version__ = "0.1.0"
