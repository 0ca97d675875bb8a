"""Decomposable scores for discrete Bayesian networks (K2 and BIC)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from ..dataset import DataTable
from ..errors import DataError, GraphError
from .graph import Dag, Move

DEFAULT_BINS = 4
MAX_PARENTS = 4


@dataclass(frozen=True)
class DiscreteData:
    """Integer-coded variables; column ``j`` takes values ``0 .. cardinality[j] - 1``."""

    names: tuple[str, ...]
    codes: np.ndarray
    cardinality: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise GraphError(f"unknown variable {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.index(name)]


def _dense(codes: np.ndarray) -> tuple[np.ndarray, int]:
    levels, inv = np.unique(codes, return_inverse=True)
    return inv.astype(np.int64), len(levels)


def equal_frequency_codes(x: np.ndarray, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin at the interior quantiles; columns with at most ``bins`` values keep their own levels."""
    x = np.asarray(x, dtype=float)
    if len(np.unique(x)) <= bins:
        return _dense(x)[0]
    edges = np.unique(np.quantile(x, np.arange(1, bins) / bins))
    return _dense(np.searchsorted(edges, x, side="left"))[0]


def discretize(values, names: Sequence[str] | None = None, bins: int = DEFAULT_BINS) -> DiscreteData:
    """Discretize a numeric matrix or a :class:`DataTable`.

    Numeric columns are cut into ``bins`` equal-frequency bins, binary and
    categorical columns are coded by their sorted levels. Date and ignored
    columns of a table are skipped.
    """
    if isinstance(values, DataTable):
        if values.missing_mask().any():
            raise DataError("discretize requires a clean table (missing cells present)")
        cols, out_names = [], []
        for spec in values.specs:
            if spec.role == "ignored" or spec.kind == "date":
                continue
            col = values[spec.name]
            if spec.kind == "numeric":
                cols.append(equal_frequency_codes(col, bins))
            else:
                cols.append(_dense(np.asarray(col, dtype=object if spec.kind == "categorical" else float))[0])
            out_names.append(spec.name)
        codes = np.column_stack(cols) if cols else np.zeros((values.n_rows, 0), dtype=np.int64)
        card = tuple(int(c.max()) + 1 for c in cols)
        return DiscreteData(tuple(out_names), codes, card)
    X = np.asarray(values, dtype=float)
    if X.ndim != 2:
        raise DataError("expected a two-dimensional array")
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise DataError("name count does not match column count")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite values cannot be discretized")
    cols = [equal_frequency_codes(X[:, j], bins) for j in range(X.shape[1])]
    return DiscreteData(tuple(names), np.column_stack(cols), tuple(int(c.max()) + 1 for c in cols))


def from_codes(codes, names: Sequence[str]) -> DiscreteData:
    """Wrap already-discrete integer data without binning."""
    codes = np.asarray(codes)
    cols = [_dense(codes[:, j])[0] for j in range(codes.shape[1])]
    return DiscreteData(tuple(names), np.column_stack(cols), tuple(int(c.max()) + 1 for c in cols))


def _family_counts(data: DiscreteData, child: int, parents: Sequence[int]) -> tuple[np.ndarray, int]:
    """Count table of shape (observed parent configs, child states) and total config count."""
    r = data.cardinality[child]
    config = np.zeros(data.n_rows, dtype=np.int64)
    q = 1
    for p in parents:
        config = config * data.cardinality[p] + data.codes[:, p]
        q *= data.cardinality[p]
    _, config = np.unique(config, return_inverse=True)
    counts = np.bincount(config * r + data.codes[:, child], minlength=(config.max() + 1) * r)
    return counts.reshape(-1, r), q


def k2_family(data: DiscreteData, child: int, parents: Sequence[int]) -> float:
    counts, _ = _family_counts(data, child, parents)
    r = data.cardinality[child]
    n_j = counts.sum(axis=1)
    return float(np.sum(gammaln(r) - gammaln(n_j + r)) + np.sum(gammaln(counts + 1)))


def bic_family(data: DiscreteData, child: int, parents: Sequence[int]) -> float:
    counts, q = _family_counts(data, child, parents)
    r = data.cardinality[child]
    n_j = counts.sum(axis=1, keepdims=True)
    nz = counts > 0
    loglik = float(np.sum(counts[nz] * np.log((counts / n_j)[nz])))
    return loglik - 0.5 * parameter_count(r, q) * np.log(data.n_rows)


def parameter_count(states: int, parent_configs: int) -> int:
    return (states - 1) * parent_configs


FAMILY_SCORES: dict[str, Callable[[DiscreteData, int, Sequence[int]], float]] = {
    "k2": k2_family,
    "bic": bic_family,
}


class FamilyScorer:
    """Memoised per-family scores; graph scores are sums over nodes."""

    def __init__(self, data: DiscreteData, score: str = "k2", max_parents: int = MAX_PARENTS):
        if score not in FAMILY_SCORES:
            raise GraphError(f"unknown score {score!r}; expected one of {sorted(FAMILY_SCORES)}")
        self.data = data
        self.kind = score
        self.max_parents = max_parents
        self._fn = FAMILY_SCORES[score]
        self._cache: dict[tuple[str, frozenset[str]], float] = {}

    def family(self, node: str, parents: Iterable[str]) -> float:
        parents = frozenset(parents)
        key = (node, parents)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if len(parents) > self.max_parents:
            raise GraphError(f"{node!r} has {len(parents)} parents; the limit is {self.max_parents}")
        idx = sorted(self.data.index(p) for p in parents)
        value = self._fn(self.data, self.data.index(node), idx)
        self._cache[key] = value
        return value

    def total(self, dag: Dag) -> float:
        return sum(self.family(v, dag.parents(v)) for v in dag.nodes)

    def delta(self, dag: Dag, move: Move) -> float:
        """Score change of ``move`` from rescoring only the families it touches."""
        a, b = move.edge
        if move.kind == "add":
            new = {b: dag.parents(b) | {a}}
        elif move.kind == "remove":
            new = {b: dag.parents(b) - {a}}
        else:
            new = {b: dag.parents(b) - {a}, a: dag.parents(a) | {b}}
        return sum(self.family(v, ps) - self.family(v, dag.parents(v)) for v, ps in new.items())

    @property
    def cache_size(self) -> int:
        return len(self._cache)


def _check_nodes(dag: Dag, data: DiscreteData) -> None:
    missing = set(dag.nodes) - set(data.names)
    if missing:
        raise GraphError(f"graph nodes missing from data: {sorted(missing)}")


def k2_score(dag: Dag, data: DiscreteData, max_parents: int = MAX_PARENTS) -> float:
    """Log K2 marginal likelihood (uniform Dirichlet priors), summed over families."""
    _check_nodes(dag, data)
    return FamilyScorer(data, "k2", max_parents).total(dag)


def bic_score(dag: Dag, data: DiscreteData, max_parents: int = MAX_PARENTS) -> float:
    """Maximum-likelihood log-likelihood minus half the free-parameter count times log n."""
    _check_nodes(dag, data)
    return FamilyScorer(data, "bic", max_parents).total(dag)
