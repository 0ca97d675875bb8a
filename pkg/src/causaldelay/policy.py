"""Deterministic binary treatment policies as shallow decision trees.

A policy tree is chosen to maximise ``sum_i (2 pi(X_i) - 1) psi_b_i`` over
axis-aligned trees of bounded depth. Search is exact: every feature and
every midpoint between consecutive distinct values present in a node is a
candidate split. Ties go to the lowest feature index, then the lowest
threshold, and a split is only kept when it strictly beats a single leaf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _policykernels
from .dml import OrthoScores
from .errors import DataError


@dataclass(frozen=True)
class Leaf:
    action: int

    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"

    def depth(self) -> int:
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass(frozen=True)
class PolicyTree:
    root: Leaf | Split
    n_features: int
    max_depth: int = 2
    feature_names: tuple[str, ...] | None = None

    def depth(self) -> int:
        return self.root.depth()

    def name(self, j: int) -> str:
        return self.feature_names[j] if self.feature_names else f"x{j}"

    def split_features(self) -> list[int]:
        out = []

        def walk(node):
            if isinstance(node, Split):
                out.append(node.feature)
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out

    def to_text(self) -> str:
        lines: list[str] = []

        def walk(node, indent: int, branch: str):
            pad = "  " * indent
            if isinstance(node, Leaf):
                lines.append(f"{pad}{branch}treat={node.action}")
                return
            lines.append(f"{pad}{branch}{self.name(node.feature)} <= {node.threshold!r}")
            walk(node.left, indent + 1, "yes: ")
            walk(node.right, indent + 1, "no: ")

        walk(self.root, 0, "")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph policy {", "  node [shape=box];"]
        counter = [0]

        def walk(node) -> str:
            nid = f"n{counter[0]}"
            counter[0] += 1
            if isinstance(node, Leaf):
                lines.append(f'  {nid} [label="treat = {node.action}"];')
                return nid
            label = f"{self.name(node.feature)} <= {node.threshold:.6g}".replace('"', r"\"")
            lines.append(f'  {nid} [label="{label}"];')
            left = walk(node.left)
            right = walk(node.right)
            lines.append(f'  {nid} -> {left} [label="yes"];')
            lines.append(f'  {nid} -> {right} [label="no"];')
            return nid

        walk(self.root)
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class WeightedTargets:
    weights: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class PolicyValue:
    value: float
    n: int

    @property
    def mean(self) -> float:
        return self.value / self.n if self.n else 0.0


def _psi(scores) -> np.ndarray:
    psi = scores.psi_b if isinstance(scores, OrthoScores) else scores
    return np.asarray(psi, dtype=float)


def weighted_targets(scores) -> WeightedTargets:
    """Classification view of the objective: weight ``|psi_b|``, label ``psi_b > 0``."""
    psi = _psi(scores)
    if not np.all(np.isfinite(psi)):
        raise DataError("psi_b has non-finite values")
    return WeightedTargets(np.abs(psi), (psi > 0).astype(int))


def _codes(X: np.ndarray):
    n, p = X.shape
    codes = np.empty((n, p), dtype=np.int64)
    levels = []
    for j in range(p):
        vals, inv = np.unique(X[:, j], return_inverse=True)
        codes[:, j] = inv
        levels.append(vals)
    offsets = np.zeros(p + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(v) for v in levels])
    order = np.array([np.argsort(codes[:, j], kind="stable") for j in range(p)], dtype=np.int64).reshape(p, n)
    return codes, levels, offsets, order


class _Searcher:
    def __init__(self, X: np.ndarray, psi: np.ndarray):
        self.X = X
        self.psi = psi
        self.codes, self.levels, self.offsets, self.order = _codes(X)
        self.tol = 1e-10 * (float(np.abs(psi).sum()) + 1.0)

    def _threshold(self, j: int, lo: int, hi: int) -> float:
        return float(0.5 * (self.levels[j][lo] + self.levels[j][hi]))

    def _leaf(self, active: np.ndarray) -> Leaf:
        return Leaf(int(self.psi[active].sum() > 0))

    def _split(self, j, lo, hi, active, left_sub, right_sub) -> Split:
        thr = self._threshold(j, lo, hi)
        go_left = self.X[:, j] <= thr
        return Split(int(j), thr, left_sub(active & go_left), right_sub(active & ~go_left))

    def best(self, active: np.ndarray, depth: int) -> tuple[float, Leaf | Split]:
        if depth <= 2:
            value, out = _policykernels.search(
                self.codes, self.offsets, self.order, self.psi, active, depth, self.tol
            )
            return value, self._decode(out, active)
        return self._best_deep(active, depth)

    def _decode(self, out, active) -> Leaf | Split:
        if out[0] < 0:
            return self._leaf(active)

        def child(f, lo, hi):
            if f < 0:
                return self._leaf
            return lambda rows: self._split(f, lo, hi, rows, self._leaf, self._leaf)

        return self._split(out[0], out[1], out[2], active,
                           child(out[3], out[4], out[5]), child(out[6], out[7], out[8]))

    def _best_deep(self, active: np.ndarray, depth: int):
        # exact recursion: every root split with an exact subtree search below
        psi = self.psi
        best_value = abs(float(psi[active].sum()))
        best_tree: Leaf | Split = self._leaf(active)
        for j in range(self.X.shape[1]):
            present = np.unique(self.codes[active, j])
            for lo, hi in zip(present[:-1], present[1:]):
                thr = self._threshold(j, lo, hi)
                go_left = self.X[:, j] <= thr
                vl, tl = self.best(active & go_left, depth - 1)
                vr, tr = self.best(active & ~go_left, depth - 1)
                if vl + vr > best_value + self.tol:
                    best_value = vl + vr
                    best_tree = Split(int(j), thr, tl, tr)
        return best_value, best_tree


def fit_policy_tree(
    X,
    scores,
    max_depth: int = 2,
    feature_names: Sequence[str] | None = None,
) -> PolicyTree:
    """Exact maximiser of the policy value among trees of depth <= ``max_depth``.

    Depth 3 searches every root split with an exact depth-2 search per child,
    which is only practical for small data.
    """
    if feature_names is None and hasattr(X, "feature_names"):
        feature_names = X.feature_names
    X = np.ascontiguousarray(np.asarray(getattr(X, "values", X), dtype=float))
    psi = _psi(scores)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError("policy search needs a non-empty feature matrix")
    if X.shape[0] != len(psi):
        raise DataError(f"X has {X.shape[0]} rows, scores have {len(psi)}")
    if X.shape[0] < 2:
        raise DataError("policy search needs at least two rows")
    if max_depth not in (1, 2, 3):
        raise DataError("max_depth must be 1, 2 or 3")
    searcher = _Searcher(X, psi)
    _, root = searcher.best(np.ones(X.shape[0], dtype=np.bool_), max_depth)
    names = tuple(feature_names) if feature_names is not None else None
    return PolicyTree(root, X.shape[1], max_depth, names)


def _assign(node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Leaf):
        return np.full(X.shape[0], node.action, dtype=int)
    out = np.empty(X.shape[0], dtype=int)
    go_left = X[:, node.feature] <= node.threshold
    out[go_left] = _assign(node.left, X[go_left])
    out[~go_left] = _assign(node.right, X[~go_left])
    return out


def assign_policy(tree: PolicyTree, X) -> np.ndarray:
    """Vectorised treatment assignment for every row of ``X``."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise DataError(f"policy expects {tree.n_features} features")
    return _assign(tree.root, X)


def predict_policy(tree: PolicyTree, x) -> int:
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != tree.n_features:
        raise DataError(f"policy expects {tree.n_features} features, got {len(x)}")
    node = tree.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.action


def evaluate_policy(tree: PolicyTree, X, scores) -> PolicyValue:
    psi = _psi(scores)
    pi = assign_policy(tree, X)
    return PolicyValue(float(np.sum((2 * pi - 1) * psi)), len(psi))


def constant_policy(action: int, n_features: int) -> PolicyTree:
    return PolicyTree(Leaf(int(action)), n_features, 0)
