"""Constraint-based discovery: PC skeleton with Fisher-z tests, then orientation."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import stats

from ..dataset import DataTable
from ..errors import DataError, EstimationError, GraphError
from .graph import Pdag, SepSets

log = logging.getLogger(__name__)

SINGULAR_COND = 1e12


def partial_correlation(i: int, j: int, cond: Sequence[int], corr: np.ndarray) -> float:
    """Partial correlation of ``i`` and ``j`` given ``cond``.

    Uses the Schur complement of the conditioning block, which equals the
    normalised off-diagonal of the inverted ``{i, j} + cond`` submatrix but
    stays defined when that submatrix is singular only because ``|r| = 1``.
    """
    cond = list(cond)
    pair = [i, j]
    C = corr[np.ix_(pair, pair)]
    if cond:
        S = corr[np.ix_(cond, cond)]
        if np.linalg.cond(S) > SINGULAR_COND:
            raise EstimationError(f"singular conditioning block for variables {cond}")
        B = corr[np.ix_(pair, cond)]
        C = C - B @ np.linalg.solve(S, B.T)
    if C[0, 0] <= 1e-12 or C[1, 1] <= 1e-12:
        raise EstimationError(f"variable {i if C[0, 0] <= 1e-12 else j} is determined by {cond}")
    r = C[0, 1] / np.sqrt(C[0, 0] * C[1, 1])
    return float(np.clip(r, -1.0, 1.0))


def fisher_z_test(i: int, j: int, cond, corr: np.ndarray, n: int, alpha: float = 0.01) -> tuple[float, bool]:
    """Fisher z statistic for zero partial correlation and the independence decision."""
    cond = sorted(cond)
    if i in cond or j in cond or i == j:
        raise GraphError("conditioning set must exclude the tested pair")
    if n <= len(cond) + 3:
        raise DataError(f"n={n} too small for a conditioning set of size {len(cond)}")
    r = partial_correlation(i, j, cond, corr)
    if abs(r) >= 1.0 - 1e-15:
        return float("inf"), False
    z = float(np.arctanh(r) * np.sqrt(n - len(cond) - 3))
    return z, bool(abs(z) <= stats.norm.ppf(1 - alpha / 2))


def numeric_matrix(table: DataTable) -> tuple[np.ndarray, list[str]]:
    """One column per original variable; categoricals become sorted level indices."""
    cols, names = [], []
    for spec in table.specs:
        if spec.role == "ignored" or spec.kind == "date":
            continue
        values = table[spec.name]
        if spec.kind == "categorical":
            _, values = np.unique(values.astype(str), return_inverse=True)
        cols.append(np.asarray(values, dtype=float))
        names.append(spec.name)
    return np.column_stack(cols), names


@dataclass
class PcResult:
    pdag: Pdag
    skeleton: Pdag
    sepsets: SepSets
    tests: list[tuple[int, int, tuple[int, ...], float, bool]] = field(default_factory=list)
    alpha: float = 0.01

    @property
    def n_tests(self) -> int:
        return len(self.tests)


def _prep(data, names):
    if isinstance(data, DataTable):
        X, tnames = numeric_matrix(data)
        names = names or tnames
    else:
        X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError("expected a two-dimensional array")
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise DataError("name count does not match column count")
    if n <= p + 3:
        raise DataError(f"PC needs more rows than variables + 3 (n={n}, p={p})")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite values in PC input")
    if np.any(X.std(axis=0) == 0):
        bad = [names[j] for j in np.flatnonzero(X.std(axis=0) == 0)]
        raise DataError(f"constant columns cannot be tested: {bad}")
    return X, names


def pc_skeleton(
    data,
    alpha: float = 0.01,
    max_cond_size: int = 3,
    names: Sequence[str] | None = None,
    workers: int = 1,
    test_log: list | None = None,
) -> tuple[Pdag, SepSets]:
    """Edge-removal sweep with conditioning sets of growing size.

    Within one size level every pair is tested against the adjacencies as they
    stood when the level began, and removals are committed only at the end of
    the level, so the result does not depend on pair order or scheduling.
    Candidate sets come from the neighbours of the lower-indexed endpoint
    first, then the other endpoint, each in lexicographic order; the first set
    found independent is recorded. Each test is appended to ``test_log`` as
    ``(i, j, cond, z, independent)`` when a list is given.
    """
    X, names = _prep(data, names)
    n, p = X.shape
    corr = np.corrcoef(X, rowvar=False)
    adj = {i: set(range(p)) - {i} for i in range(p)}
    sepsets = SepSets()
    log_tests: list = test_log if test_log is not None else []

    def test_pair(args):
        i, j, level, frozen = args
        out = []
        seen = set()
        for side in (i, j):
            pool = sorted(frozen[side] - {i, j})
            for cond in combinations(pool, level):
                if cond in seen:
                    continue
                seen.add(cond)
                z, indep = fisher_z_test(i, j, cond, corr, n, alpha)
                out.append((i, j, cond, z, indep))
                if indep:
                    return out, cond
        return out, None

    level = 0
    while level <= max_cond_size:
        frozen = {k: set(v) for k, v in adj.items()}
        pairs = [
            (i, j, level, frozen)
            for i in range(p) for j in range(i + 1, p)
            if j in frozen[i] and (len(frozen[i]) - 1 >= level or len(frozen[j]) - 1 >= level)
        ]
        if not pairs:
            break
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(test_pair, pairs))
        else:
            results = [test_pair(a) for a in pairs]
        for (i, j, _, _), (tests, cond) in zip(pairs, results):
            log_tests.extend(tests)
            if cond is not None:
                adj[i].discard(j)
                adj[j].discard(i)
                sepsets.record(names[i], names[j], [names[k] for k in cond])
        level += 1

    skeleton = Pdag(names, undirected=[(names[i], names[j]) for i in range(p) for j in adj[i] if i < j])
    return skeleton, sepsets


def orient_v_structures(skeleton: Pdag, sepsets: SepSets) -> Pdag:
    """Orient ``a -> c <- b`` for each unshielded ``a - c - b`` with ``c`` outside the separating set.

    Orientations that conflict (the same edge pointed both ways), or that
    would close a directed cycle, are left undirected and listed in
    ``conflicts``.
    """
    out = skeleton.copy()
    nodes = out.nodes
    proposed: set[tuple[str, str]] = set()
    for c in nodes:
        nbrs = sorted((v for v in nodes if v != c and out.adjacent(v, c)), key=nodes.index)
        for a, b in combinations(nbrs, 2):
            if out.adjacent(a, b):
                continue
            sep = sepsets.get(a, b)
            if sep is None or c in sep:
                continue
            proposed.add((a, c))
            proposed.add((b, c))
    conflicts = {(a, b) for a, b in proposed if (b, a) in proposed}
    for a, b in sorted(conflicts):
        if nodes.index(a) < nodes.index(b):
            log.info("conflicting orientation on %s - %s left undirected", a, b)
            out.conflicts.append((a, b))
    for a, b in sorted(proposed - conflicts, key=lambda e: (nodes.index(e[0]), nodes.index(e[1]))):
        if not out.is_undirected(a, b):
            continue
        if out.can_orient(a, b):
            out.orient(a, b)
        else:
            log.info("orienting %s -> %s would close a cycle; left undirected", a, b)
            out.conflicts.append((a, b))
    return out


def apply_orientation_rules(pdag: Pdag) -> Pdag:
    """Propagate orientations to a fixed point.

    Rule 1: ``a -> b - c`` with ``a``, ``c`` non-adjacent gives ``b -> c``.
    Rule 2: ``a - b`` with a directed path ``a -> k -> b`` gives ``a -> b``.
    """
    out = pdag.copy()
    changed = True
    while changed:
        changed = False
        for a, b in out.undirected_edges():
            for x, y in ((a, b), (b, a)):
                if not out.is_undirected(x, y):
                    break
                rule1 = any(not out.adjacent(w, y) and w != y for w in out.parents(x))
                rule2 = any(out.is_directed(k, y) for k in out.children(x))
                if (rule1 or rule2) and out.can_orient(x, y):
                    out.orient(x, y)
                    changed = True
                    break
    return out


def pc(
    data,
    alpha: float = 0.01,
    max_cond_size: int = 3,
    names: Sequence[str] | None = None,
    workers: int = 1,
) -> PcResult:
    tests: list = []
    skeleton, sepsets = pc_skeleton(data, alpha, max_cond_size, names, workers, tests)
    pdag = apply_orientation_rules(orient_v_structures(skeleton, sepsets))
    return PcResult(pdag, skeleton, sepsets, tests, alpha)
