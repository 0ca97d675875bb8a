"""One-dimensional conditional effect curves on a B-spline basis.

The doubly robust signal ``psi_b`` is regressed on a clamped B-spline basis
of one covariate; pointwise bands come from the HC0 sandwich covariance of
the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dml import OrthoScores
from .errors import DataError, RankDeficiencyError
from .learners import fit_ols


@dataclass(frozen=True)
class SplineBasis:
    degree: int
    df: int
    knots: np.ndarray
    boundary: tuple[float, float]

    @property
    def full_knots(self) -> np.ndarray:
        lo, hi = self.boundary
        return np.concatenate([[lo] * (self.degree + 1), self.knots, [hi] * (self.degree + 1)])

    def evaluate(self, x) -> np.ndarray:
        """Basis matrix, one row per value of ``x`` and ``df`` columns."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.boundary
        tol = 1e-12 * max(1.0, hi - lo)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise DataError(f"values outside the basis range [{lo}, {hi}]")
        return _bspline_design(np.clip(x, lo, hi), self.full_knots, self.degree)


def _bspline_design(x: np.ndarray, t: np.ndarray, k: int) -> np.ndarray:
    """Cox-de Boor recursion on knot vector ``t`` (clamped)."""
    n_basis = len(t) - k - 1
    # degree-0 indicators on half-open spans; the last non-empty span is closed
    last = np.flatnonzero(t[:-1] < t[1:])[-1]
    B = np.zeros((len(x), len(t) - 1))
    for i in range(len(t) - 1):
        if t[i] < t[i + 1]:
            upper = x <= t[i + 1] if i == last else x < t[i + 1]
            B[:, i] = (x >= t[i]) & upper
    for d in range(1, k + 1):
        nxt = np.zeros((len(x), len(t) - 1 - d))
        for i in range(len(t) - 1 - d):
            left_den = t[i + d] - t[i]
            right_den = t[i + d + 1] - t[i + 1]
            term = np.zeros(len(x))
            if left_den > 0:
                term += (x - t[i]) / left_den * B[:, i]
            if right_den > 0:
                term += (t[i + d + 1] - x) / right_den * B[:, i + 1]
            nxt[:, i] = term
        B = nxt
    return B[:, :n_basis]


def build_basis(x, df: int = 5, degree: int = 3, knots: str = "quantile") -> SplineBasis:
    """Clamped B-spline basis spanning the constants (intercept included).

    ``df - degree - 1`` interior knots sit at equally spaced quantiles of
    ``x`` (or equally spaced over its range with ``knots="uniform"``).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataError("covariate has non-finite values")
    if df < degree + 1:
        raise DataError(f"df={df} is below degree + 1 = {degree + 1}")
    if len(np.unique(x)) < df:
        raise DataError(f"covariate needs at least {df} distinct values")
    lo, hi = float(x.min()), float(x.max())
    n_inner = df - degree - 1
    probs = np.arange(1, n_inner + 1) / (n_inner + 1)
    if knots == "quantile":
        inner = np.quantile(x, probs)
    elif knots == "uniform":
        inner = lo + probs * (hi - lo)
    else:
        raise ValueError(f"unknown knot placement {knots!r}")
    return SplineBasis(degree=degree, df=df, knots=inner, boundary=(lo, hi))


def project_cate(psi_b, basis_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """OLS of the signal on the basis columns with an HC0 covariance."""
    psi = np.asarray(psi_b.psi_b if isinstance(psi_b, OrthoScores) else psi_b, dtype=float)
    B = np.asarray(basis_values, dtype=float)
    if B.shape[0] != len(psi):
        raise DataError(f"basis has {B.shape[0]} rows, signal has {len(psi)}")
    if np.linalg.matrix_rank(B) < B.shape[1]:
        raise RankDeficiencyError("spline basis is rank deficient on these covariate values")
    coef = fit_ols(B, psi)
    resid = psi - B @ coef
    bread = np.linalg.inv(B.T @ B)
    meat = (B * resid[:, None] ** 2).T @ B
    cov = bread @ meat @ bread
    return coef, (cov + cov.T) / 2


@dataclass(frozen=True)
class CateCurve:
    grid: np.ndarray
    estimate: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    level: float = 0.95

    def rows(self):
        return zip(self.grid, self.estimate, self.band_low, self.band_high)


def cate_curve(
    coefficients: np.ndarray,
    covariance: np.ndarray,
    basis: SplineBasis,
    grid: int = 100,
    level: float = 0.95,
) -> CateCurve:
    """Evaluate the fitted curve and pointwise bands on an even grid over the basis range."""
    if grid < 2:
        raise DataError("grid needs at least two points")
    lo, hi = basis.boundary
    xs = np.linspace(lo, hi, grid)
    B = basis.evaluate(xs)
    est = B @ coefficients
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", B, covariance, B), 0.0))
    z = float(stats.norm.ppf(0.5 + level / 2))
    return CateCurve(xs, est, est - z * se, est + z * se, level)


def estimate_cate(psi_b, x, df: int = 5, degree: int = 3, grid: int = 100, level: float = 0.95,
                  knots: str = "quantile") -> CateCurve:
    """Basis construction, projection and curve evaluation in one call."""
    basis = build_basis(x, df=df, degree=degree, knots=knots)
    coef, cov = project_cate(psi_b, basis.evaluate(x))
    return cate_curve(coef, cov, basis, grid=grid, level=level)
