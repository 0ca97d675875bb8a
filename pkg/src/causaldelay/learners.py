"""Nuisance learners: gradient-boosted trees, least squares, grid search.

The boosted learners grow depth-limited trees with exact greedy splits on
Newton-style gains (squared loss for regression, logistic loss for
classification). Classifier outputs are probabilities clipped to
``[PROB_CLIP, 1 - PROB_CLIP]``.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _treekernels
from .dataset import make_folds
from .errors import DataError, EstimationError

PROB_CLIP = 1e-3
MODEL_FORMAT = "causaldelay-model"
MODEL_VERSION = 1

# L2 penalty on leaf values; zero keeps regression leaves at plain residual means
_REG_LAMBDA = {"regressor": 0.0, "classifier": 1.0}


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_leaf: int = 20
    subsample: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError(f"tree counts must be positive: {self}")
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must lie in (0, 1]: {self.learning_rate}")
        if not 0 < self.subsample <= 1:
            raise ValueError(f"subsample must lie in (0, 1]: {self.subsample}")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_leaf": self.min_leaf,
            "subsample": self.subsample,
        }


DEFAULT_GRID: tuple[Hyperparams, ...] = tuple(
    Hyperparams(n_trees=nt, max_depth=d, learning_rate=lr, min_leaf=ml)
    for d, nt, lr, ml in itertools.product((2, 3, 4), (100, 300), (0.05, 0.1), (20,))
)


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def add_predictions(self, X: np.ndarray, out: np.ndarray) -> None:
        _treekernels.predict_tree(
            X, self.feature, self.threshold, self.left, self.right, self.value, out
        )

    def to_record(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_record(int(self.left[node])),
            "right": self.to_record(int(self.right[node])),
        }

    @classmethod
    def from_record(cls, record: dict) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(rec) -> int:
            nd = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "leaf" in rec:
                value[nd] = rec["leaf"]
            else:
                feature[nd] = rec["feature"]
                threshold[nd] = rec["threshold"]
                left[nd] = visit(rec["left"])
                right[nd] = visit(rec["right"])
            return nd

        visit(record)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=float),
        )


@dataclass
class FittedModel:
    kind: str
    feature_count: int
    base_score: float = 0.0
    trees: list[Tree] = field(default_factory=list)
    coef: np.ndarray | None = None
    train_loss: list[float] = field(default_factory=list, repr=False)

    def raw_predict(self, X) -> np.ndarray:
        X = _matrix(X)
        if X.shape[1] != self.feature_count:
            raise DataError(f"model expects {self.feature_count} features, got {X.shape[1]}")
        if self.kind == "linear":
            return X @ self.coef
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            tree.add_predictions(X, out)
        return out

    def predict(self, X) -> np.ndarray:
        raw = self.raw_predict(X)
        if self.kind == "classifier":
            return np.clip(_sigmoid(raw), PROB_CLIP, 1 - PROB_CLIP)
        return raw

    def to_text(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "feature_count": self.feature_count,
            "base_score": self.base_score,
            "trees": [t.to_record() for t in self.trees],
        }
        if self.coef is not None:
            doc["coef"] = [float(c) for c in self.coef]
        return json.dumps(doc, indent=1)

    @classmethod
    def from_text(cls, text: str) -> "FittedModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError("unrecognised model serialization")
        coef = np.array(doc["coef"]) if "coef" in doc else None
        return cls(
            kind=doc["kind"],
            feature_count=doc["feature_count"],
            base_score=doc["base_score"],
            trees=[Tree.from_record(r) for r in doc["trees"]],
            coef=coef,
        )


def _matrix(X) -> np.ndarray:
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.ascontiguousarray(X)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class _FeatureIndex:
    """Per-fit split metadata: binary feature row lists and presorted orders."""

    def __init__(self, X: np.ndarray):
        n, p = X.shape
        self.is_binary = np.zeros(p, dtype=np.bool_)
        self.bin_lo = np.zeros(p)
        self.bin_hi = np.zeros(p)
        self.gen_slot = -np.ones(p, dtype=np.int64)
        hi_lists = []
        orders = []
        for j in range(p):
            col = X[:, j]
            lo, hi = col.min(), col.max()
            if lo == hi:
                hi_lists.append(np.empty(0, dtype=np.int64))
                continue
            high = col == hi
            if np.all(high | (col == lo)):
                self.is_binary[j] = True
                self.bin_lo[j], self.bin_hi[j] = lo, hi
                hi_lists.append(np.flatnonzero(high).astype(np.int64))
            else:
                hi_lists.append(np.empty(0, dtype=np.int64))
                self.gen_slot[j] = len(orders)
                orders.append(np.argsort(col, kind="stable").astype(np.int64))
        self.hi_ptr = np.zeros(p + 1, dtype=np.int64)
        self.hi_ptr[1:] = np.cumsum([len(h) for h in hi_lists])
        self.hi_rows = np.concatenate(hi_lists) if hi_lists else np.empty(0, dtype=np.int64)
        self.gen_order = np.array(orders, dtype=np.int64).reshape(len(orders), n)


def _boost(X, y, hp: Hyperparams, seed: int, kind: str) -> FittedModel:
    X = _matrix(X)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise DataError("cannot fit on zero rows")
    if len(y) != n:
        raise DataError(f"X has {n} rows but target has {len(y)}")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
        raise DataError("non-finite values in training data")
    if n < 2 * hp.min_leaf:
        raise DataError(f"need at least {2 * hp.min_leaf} rows for min_leaf={hp.min_leaf}, got {n}")

    if kind == "classifier":
        prevalence = y.mean()
        base = float(np.log(prevalence / (1 - prevalence)))
    else:
        base = float(y.mean())
    index = _FeatureIndex(X)
    rng = np.random.default_rng(seed)
    lam = _REG_LAMBDA[kind]
    raw = np.full(n, base)
    model = FittedModel(kind=kind, feature_count=X.shape[1], base_score=base)
    model.train_loss.append(_loss(kind, y, raw))
    n_sub = max(int(round(hp.subsample * n)), 2 * hp.min_leaf)
    for _ in range(hp.n_trees):
        if kind == "classifier":
            prob = _sigmoid(raw)
            grad = prob - y
            hess = np.maximum(prob * (1 - prob), 1e-12)
        else:
            grad = raw - y
            hess = np.ones(n)
        if hp.subsample < 1.0:
            in_sample = np.zeros(n, dtype=np.bool_)
            in_sample[rng.choice(n, size=min(n_sub, n), replace=False)] = True
        else:
            in_sample = np.ones(n, dtype=np.bool_)
        arrays = _treekernels.grow_tree(
            X, grad, hess, in_sample,
            index.is_binary, index.bin_lo, index.bin_hi, index.hi_ptr, index.hi_rows,
            index.gen_slot, index.gen_order,
            hp.max_depth, hp.min_leaf, lam, hp.learning_rate,
        )
        tree = Tree(*arrays)
        tree.add_predictions(X, raw)
        model.trees.append(tree)
        model.train_loss.append(_loss(kind, y, raw))
    return model


def _loss(kind: str, y: np.ndarray, raw: np.ndarray) -> float:
    if kind == "classifier":
        # log(1 + exp(raw)) - y * raw, computed stably
        return float(np.mean(np.logaddexp(0.0, raw) - y * raw))
    return float(np.mean((y - raw) ** 2))


def fit_regressor(X, y, hp: Hyperparams = Hyperparams(), seed: int = 0) -> FittedModel:
    """Gradient-boosted regression trees on squared error."""
    return _boost(X, y, hp, seed, "regressor")


def fit_classifier(X, d, hp: Hyperparams = Hyperparams(), seed: int = 0) -> FittedModel:
    """Gradient-boosted trees on logistic loss; ``predict`` gives P(d = 1)."""
    d = np.asarray(d, dtype=float)
    if not np.isin(d, (0.0, 1.0)).all():
        raise DataError("classifier target must be 0/1")
    if d.min() == d.max():
        raise EstimationError("classifier target has a single class; propensity undefined")
    return _boost(X, d, hp, seed, "classifier")


class RankDeficiencyWarning(UserWarning):
    """OLS design lacked full column rank; a tiny ridge penalty was used."""


RIDGE_PENALTY = 1e-8


def fit_ols(X, y) -> np.ndarray:
    """Least-squares coefficients of ``y`` on the columns of ``X`` (no intercept added).

    A rank-deficient design falls back to ridge regression with penalty
    ``RIDGE_PENALTY`` and emits :class:`RankDeficiencyWarning`.
    """
    X = _matrix(X)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != len(y):
        raise DataError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        warnings.warn(
            f"design of shape {X.shape} is rank deficient; using ridge penalty {RIDGE_PENALTY}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        gram = X.T @ X + RIDGE_PENALTY * np.eye(X.shape[1])
        return np.linalg.solve(gram, X.T @ y)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


@dataclass
class CvReport:
    losses: dict[Hyperparams, float]
    best: Hyperparams
    kind: str
    k: int


def grid_search_cv(
    X,
    y,
    kind: str,
    grid: Sequence[Hyperparams] = DEFAULT_GRID,
    k: int = 5,
    seed: int = 0,
) -> CvReport:
    """Pick hyperparameters by k-fold mean out-of-fold loss.

    Regressors are scored by squared error, classifiers by log loss. Ties go
    to the earlier grid point.
    """
    if not grid:
        raise ValueError("grid must contain at least one point")
    if kind not in ("regressor", "classifier"):
        raise ValueError(f"unknown learner kind {kind!r}")
    X = _matrix(X)
    y = np.asarray(y, dtype=float)
    strata = y if kind == "classifier" else None
    plan = make_folds(len(y), k, seed, strata=strata)
    fit = fit_classifier if kind == "classifier" else fit_regressor
    losses: dict[Hyperparams, float] = {}
    for gi, hp in enumerate(grid):
        fold_losses = []
        for f in range(k):
            train, test = plan.train_rows(f), plan.test_rows(f)
            try:
                model = fit(X[train], y[train], hp, seed=seed + f)
            except (DataError, EstimationError) as exc:
                raise type(exc)(f"grid point {gi} ({hp}), fold {f}: {exc}") from exc
            pred = model.predict(X[test])
            if kind == "classifier":
                yt = y[test]
                fold_losses.append(float(-np.mean(yt * np.log(pred) + (1 - yt) * np.log(1 - pred))))
            else:
                fold_losses.append(float(np.mean((y[test] - pred) ** 2)))
        losses[hp] = float(np.mean(fold_losses))
    best = min(grid, key=lambda hp: losses[hp])
    return CvReport(losses=losses, best=best, kind=kind, k=k)
