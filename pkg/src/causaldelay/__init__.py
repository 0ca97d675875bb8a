"""Causal analysis of supply-chain delivery delays.

Double machine learning for average effects, B-spline effect curves,
policy trees, causal graph learning and a synthetic order generator with
known ground truth.
"""

from .cate import CateCurve, SplineBasis, build_basis, cate_curve, estimate_cate, project_cate
from .dataset import (
    ColumnSpec,
    DataTable,
    DelayStats,
    DesignMatrix,
    FoldPlan,
    clean,
    derive_quarter,
    encode,
    load_csv,
    make_folds,
    summary_stats,
    write_csv,
)
from .dml import (
    AteEstimate,
    DmlConfig,
    NuisancePredictions,
    OrthoScores,
    crossfit_nuisances,
    estimate_ate,
    estimate_ate_arrays,
    estimate_plr,
    fwl_direct,
    fwl_threestep,
    inference,
    irm_score,
    naive_difference,
    solve_theta,
)
from .errors import (
    CausalDelayError,
    ConfigError,
    DataError,
    DegenerateInferenceError,
    EstimationError,
    GraphError,
    RankDeficiencyError,
)
from .learners import FittedModel, Hyperparams, fit_classifier, fit_ols, fit_regressor, grid_search_cv
from .policy import PolicyTree, evaluate_policy, fit_policy_tree, predict_policy, weighted_targets

__version__ = "0.1.0"
