"""Double/debiased machine learning for a binary treatment.

Pipeline: stratified K-fold split -> cross-fitted nuisances (propensity and
one outcome regression per treatment arm) -> per-row orthogonal scores of
the interactive regression model -> moment solution for the average effect
-> sandwich inference. Repeated cross-fitting aggregates by the median.

The Frisch-Waugh-Lovell helpers (:func:`fwl_direct`, :func:`fwl_threestep`)
show the residual-on-residual identity that the partially linear variant
(:func:`estimate_plr`) generalises to ML nuisances.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .dataset import DesignMatrix, FoldPlan, make_folds
from .errors import DataError, DegenerateInferenceError, EstimationError, RankDeficiencyError
from .learners import (
    FittedModel,
    Hyperparams,
    fit_classifier,
    fit_regressor,
    grid_search_cv,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "CAUSALDELAY_WORKERS"

LearnerChoice = Hyperparams | Sequence[Hyperparams]

# deeper ensembles than the generic defaults; shallow boosting leaves visible
# first-stage bias in the effect estimate on the delay data
NUISANCE_PARAMS = Hyperparams(n_trees=300, max_depth=3, learning_rate=0.1, min_leaf=5)


@dataclass(frozen=True)
class DmlConfig:
    k_folds: int = 5
    n_reps: int = 1
    trim: float = 0.01
    confidence_level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if not 0 <= self.trim < 0.5:
            raise ValueError("trim must lie in [0, 0.5)")
        if not 0 < self.confidence_level < 1:
            raise ValueError("confidence_level must lie in (0, 1)")


@dataclass
class NuisancePredictions:
    g0_hat: np.ndarray
    g1_hat: np.ndarray
    m_hat: np.ndarray
    folds: FoldPlan | None = None
    clamped_count: int = 0
    train_rows: list[np.ndarray] = field(default_factory=list, repr=False)


@dataclass
class OrthoScores:
    psi_a: np.ndarray
    psi_b: np.ndarray
    rep_index: int = 0
    treatment_name: str = ""


@dataclass
class AteEstimate:
    theta: float
    std_error: float
    t_statistic: float
    p_value: float
    ci_low: float
    ci_high: float
    n_used: int
    treatment: str = ""
    level: float = 0.95
    k_folds: int = 0
    n_reps: int = 1
    clamped_count: int = 0
    rep_thetas: list[float] = field(default_factory=list, repr=False)
    scores: list[OrthoScores] = field(default_factory=list, repr=False, compare=False)

    def mean_psi_b(self) -> np.ndarray:
        """Per-row signal averaged over cross-fitting repetitions."""
        return np.mean([s.psi_b for s in self.scores], axis=0)

    def record(self) -> dict:
        return {
            "treatment": self.treatment,
            "coef": self.theta,
            "std_error": self.std_error,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n_used,
            "k_folds": self.k_folds,
            "n_reps": self.n_reps,
            "clamped_count": self.clamped_count,
        }


# ---------------------------------------------------------------- FWL


def _ols_full_rank(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise RankDeficiencyError(f"design of shape {A.shape} is rank deficient")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def _with_intercept(Z, n: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=float).reshape(n, -1) if Z is not None else np.empty((n, 0))
    return np.column_stack([np.ones(n), Z])


def fwl_direct(Y, D, Z) -> float:
    """OLS coefficient on ``D`` from regressing ``Y`` on ``[1, D, Z]``."""
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    A = np.column_stack([np.ones(len(Y)), D, _with_intercept(Z, len(Y))[:, 1:]])
    return float(_ols_full_rank(A, Y)[1])


def fwl_threestep(Y, D, Z) -> float:
    """Residualise ``D`` and ``Y`` on ``[1, Z]``, then regress residual on residual."""
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    A = _with_intercept(Z, len(Y))
    _ols_full_rank(A, Y)
    v = D - A @ np.linalg.lstsq(A, D, rcond=None)[0]
    u = Y - A @ np.linalg.lstsq(A, Y, rcond=None)[0]
    vv = float(v @ v)
    if vv <= 1e-12 * max(1.0, float(D @ D)):
        raise RankDeficiencyError("treatment has no variation left after partialling out Z")
    return float(v @ u) / vv


# ---------------------------------------------------------------- nuisances


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([abs(int(p)) for p in parts]).generate_state(1)[0])


def fold_seed(seed: int, rep: int) -> int:
    """Seed of the fold permutation used in repetition ``rep``."""
    return _derive_seed(seed, rep, 1)


def _fit_with(kind: str, X, y, choice: LearnerChoice, seed: int) -> FittedModel:
    if isinstance(choice, Hyperparams):
        hp = choice
    elif len(choice) == 1:
        hp = choice[0]
    else:
        hp = grid_search_cv(X, y, kind, list(choice), k=5, seed=seed).best
    fit = fit_classifier if kind == "classifier" else fit_regressor
    return fit(X, y, hp, seed=seed)


def crossfit_nuisances(
    X,
    Y,
    D,
    config: DmlConfig = DmlConfig(),
    outcome_learner: LearnerChoice = NUISANCE_PARAMS,
    propensity_learner: LearnerChoice = NUISANCE_PARAMS,
    rep: int = 0,
    folds: FoldPlan | None = None,
) -> NuisancePredictions:
    """Out-of-fold predictions of g(0, X), g(1, X) and m(X).

    Folds are stratified by treatment arm. For each fold, the propensity
    classifier and the two arm-specific outcome regressors are trained on
    the remaining folds only and predict the held-out rows. Passing a grid
    (sequence of hyperparameters) tunes each learner inside the training
    folds. Propensities are clamped to ``[trim, 1 - trim]``.
    """
    X = np.asarray(getattr(X, "values", X), dtype=float)
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    n = len(Y)
    if X.shape[0] != n or len(D) != n:
        raise DataError("X, Y and D must have the same number of rows")
    if not np.isin(D, (0.0, 1.0)).all():
        raise DataError("treatment must be binary 0/1")
    if folds is None:
        folds = make_folds(n, config.k_folds, fold_seed(config.seed, rep), strata=D)

    def run_fold(f: int):
        train, test = folds.train_rows(f), folds.test_rows(f)
        d_train = D[train]
        if d_train.min() == d_train.max():
            raise EstimationError(
                f"fold {f}: training split contains only treatment arm {int(d_train[0])}"
            )
        base = _derive_seed(config.seed, rep, f, 2)
        try:
            m_model = _fit_with("classifier", X[train], d_train, propensity_learner, base)
            preds = [m_model.predict(X[test])]
            for arm in (0, 1):
                rows = train[d_train == arm]
                g_model = _fit_with("regressor", X[rows], Y[rows], outcome_learner, base + 1 + arm)
                preds.append(g_model.predict(X[test]))
        except (DataError, EstimationError) as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        return train, test, preds

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_fold, range(folds.k)))
    else:
        results = [run_fold(f) for f in range(folds.k)]

    m_raw = np.empty(n)
    g0 = np.empty(n)
    g1 = np.empty(n)
    train_sets = []
    for train, test, (m_pred, g0_pred, g1_pred) in results:
        m_raw[test] = m_pred
        g0[test] = g0_pred
        g1[test] = g1_pred
        train_sets.append(train)
    m_hat = np.clip(m_raw, config.trim, 1 - config.trim)
    clamped = int(np.count_nonzero(m_hat != m_raw))
    if clamped:
        log.info("clamped %d propensities to [%g, %g]", clamped, config.trim, 1 - config.trim)
    return NuisancePredictions(g0, g1, m_hat, folds, clamped, train_sets)


# ---------------------------------------------------------------- scores


def irm_score(Y, D, nuisances: NuisancePredictions, treatment_name: str = "", rep: int = 0) -> OrthoScores:
    """Orthogonal (doubly robust) score of the interactive regression model."""
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    g0, g1, m = nuisances.g0_hat, nuisances.g1_hat, nuisances.m_hat
    if not (len(Y) == len(D) == len(g0) == len(g1) == len(m)):
        raise DataError("score inputs differ in length")
    for name, arr in (("Y", Y), ("D", D), ("g0", g0), ("g1", g1), ("m", m)):
        if not np.all(np.isfinite(arr)):
            raise DataError(f"non-finite values in {name}")
    if np.any((m <= 0) | (m >= 1)):
        raise DataError("propensities must lie strictly inside (0, 1)")
    psi_b = g1 - g0 + D * (Y - g1) / m - (1 - D) * (Y - g0) / (1 - m)
    return OrthoScores(np.full(len(Y), -1.0), psi_b, rep, treatment_name)


def solve_theta(scores: OrthoScores) -> float:
    """Root of the empirical moment ``mean(psi_a) * theta + mean(psi_b) = 0``."""
    if len(scores.psi_b) == 0:
        raise DataError("no scores")
    return float(-np.mean(scores.psi_b) / np.mean(scores.psi_a))


def inference(scores: OrthoScores, theta: float, level: float = 0.95) -> AteEstimate:
    """Sandwich standard error with a normal reference distribution."""
    n = len(scores.psi_b)
    if n < 2:
        raise DataError("inference needs at least two scores")
    psi = scores.psi_a * theta + scores.psi_b
    scale = max(1.0, float(np.max(np.abs(scores.psi_b))))
    if np.max(np.abs(psi)) <= 1e-12 * scale:
        raise DegenerateInferenceError("score has zero variance")
    J = float(np.mean(scores.psi_a))
    se = float(np.sqrt(np.mean(psi**2) / (J * J) / n))
    return _estimate(theta, se, n, level, scores.treatment_name)


def _estimate(theta: float, se: float, n: int, level: float, treatment: str) -> AteEstimate:
    t = theta / se
    p = float(2 * stats.norm.sf(abs(t)))
    z = float(stats.norm.ppf(0.5 + level / 2))
    return AteEstimate(
        theta=theta,
        std_error=se,
        t_statistic=t,
        p_value=p,
        ci_low=theta - z * se,
        ci_high=theta + z * se,
        n_used=n,
        treatment=treatment,
        level=level,
    )


def aggregate_reps(estimates: Sequence[AteEstimate], level: float) -> AteEstimate:
    """Median point estimate; variance is the median of se^2 + (theta_r - median)^2."""
    thetas = np.array([e.theta for e in estimates])
    theta = float(np.median(thetas))
    var = float(np.median([e.std_error**2 + (e.theta - theta) ** 2 for e in estimates]))
    out = _estimate(theta, float(np.sqrt(var)), estimates[0].n_used, level, estimates[0].treatment)
    out.rep_thetas = thetas.tolist()
    return out


# ---------------------------------------------------------------- pipelines


def covariate_names(
    design: DesignMatrix,
    treatment: str,
    outcome: str,
    exclude_columns: Sequence[str] = (),
) -> list[str]:
    """Features usable as confounders for ``treatment``.

    Drops every feature derived from the outcome column, from the
    treatment's source column (so sibling one-hot indicators cannot reveal
    the treatment) and from ``exclude_columns`` (e.g. descendants of the
    treatment in a causal graph).
    """
    drop = {outcome, design.source_column[treatment].name, *exclude_columns}
    return [
        f
        for f in design.feature_names
        if design.source_column[f].name not in drop and design.source_column[f].role != "ignored"
    ]


def _arrays(design: DesignMatrix, treatment: str, outcome: str, covariates, exclude_columns):
    if covariates is None:
        covariates = covariate_names(design, treatment, outcome, exclude_columns)
    Y = design.column(outcome)
    D = design.column(treatment)
    X = design.subset(list(covariates)).values
    return X, Y, D


def estimate_ate(
    design: DesignMatrix,
    treatment: str,
    outcome: str,
    config: DmlConfig = DmlConfig(),
    covariates: Sequence[str] | None = None,
    exclude_columns: Sequence[str] = (),
    outcome_learner: LearnerChoice = NUISANCE_PARAMS,
    propensity_learner: LearnerChoice = NUISANCE_PARAMS,
) -> AteEstimate:
    """Cross-fitted doubly robust estimate of the average treatment effect."""
    X, Y, D = _arrays(design, treatment, outcome, covariates, exclude_columns)
    return estimate_ate_arrays(
        X, Y, D, config, treatment, outcome_learner=outcome_learner,
        propensity_learner=propensity_learner,
    )


def estimate_ate_arrays(
    X,
    Y,
    D,
    config: DmlConfig = DmlConfig(),
    treatment: str = "",
    outcome_learner: LearnerChoice = NUISANCE_PARAMS,
    propensity_learner: LearnerChoice = NUISANCE_PARAMS,
) -> AteEstimate:
    per_rep = []
    all_scores = []
    clamped = 0
    for rep in range(config.n_reps):
        try:
            nuis = crossfit_nuisances(X, Y, D, config, outcome_learner, propensity_learner, rep=rep)
        except EstimationError as exc:
            raise EstimationError(f"{treatment or 'treatment'}: nuisance stage: {exc}") from exc
        scores = irm_score(Y, D, nuis, treatment, rep)
        theta = solve_theta(scores)
        try:
            est = inference(scores, theta, config.confidence_level)
        except EstimationError as exc:
            raise type(exc)(f"{treatment or 'treatment'}: inference stage: {exc}") from exc
        per_rep.append(est)
        all_scores.append(scores)
        clamped += nuis.clamped_count
    out = per_rep[0] if config.n_reps == 1 else aggregate_reps(per_rep, config.confidence_level)
    out.rep_thetas = [e.theta for e in per_rep]
    out.treatment = treatment
    out.k_folds = config.k_folds
    out.n_reps = config.n_reps
    out.clamped_count = clamped
    out.scores = all_scores
    return out


def estimate_plr(
    design: DesignMatrix,
    treatment: str,
    outcome: str,
    config: DmlConfig = DmlConfig(),
    covariates: Sequence[str] | None = None,
    exclude_columns: Sequence[str] = (),
    outcome_learner: LearnerChoice = NUISANCE_PARAMS,
    propensity_learner: LearnerChoice = NUISANCE_PARAMS,
) -> AteEstimate:
    """Partially linear model: ML residualisation of Y and D, then residual-on-residual.

    Score: ``psi_a = -V^2``, ``psi_b = V * (Y - l(X))`` with ``V = D - m(X)``.
    """
    X, Y, D = _arrays(design, treatment, outcome, covariates, exclude_columns)
    n = len(Y)
    per_rep = []
    all_scores = []
    for rep in range(config.n_reps):
        folds = make_folds(n, config.k_folds, fold_seed(config.seed, rep), strata=D)
        l_hat = np.empty(n)
        m_hat = np.empty(n)
        for f in range(folds.k):
            train, test = folds.train_rows(f), folds.test_rows(f)
            base = _derive_seed(config.seed, rep, f, 3)
            l_hat[test] = _fit_with("regressor", X[train], Y[train], outcome_learner, base).predict(X[test])
            m_hat[test] = _fit_with("classifier", X[train], D[train], propensity_learner, base + 1).predict(X[test])
        v = D - m_hat
        scores = OrthoScores(-(v**2), v * (Y - l_hat), rep, treatment)
        theta = solve_theta(scores)
        per_rep.append(inference(scores, theta, config.confidence_level))
        all_scores.append(scores)
    out = per_rep[0] if config.n_reps == 1 else aggregate_reps(per_rep, config.confidence_level)
    out.treatment = treatment
    out.k_folds = config.k_folds
    out.n_reps = config.n_reps
    out.scores = all_scores
    return out


def naive_difference(Y, D) -> float:
    """Unadjusted difference in mean outcome between treated and control rows."""
    Y = np.asarray(Y, dtype=float)
    D = np.asarray(D, dtype=float)
    return float(Y[D == 1].mean() - Y[D == 0].mean())
