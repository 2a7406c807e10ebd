"""Weighted ridge surrogate fitting and coefficient ranking.

The local surrogate is the minimizer of

    sum_i w_i * (y_i - b0 - x_i . beta)^2 + lambda * ||beta||^2

with the intercept b0 unpenalized.  The solve goes through the (F+1)-d normal
equations: augment the design with a ones column, form Xa' W Xa + lambda * P
where P is the identity with the intercept entry zeroed, and solve directly.
F is small (tens of features), so a dense solve is exact and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ValidationError


class SingularSystemError(ValidationError):
    """The normal equations are singular (lambda = 0 and rank-deficient design)."""


@dataclass(frozen=True, eq=False)
class SurrogateFit:
    """Fitted coefficients, intercept, and a weighted-R^2 diagnostic."""

    coefficients: np.ndarray
    intercept: float
    ridge_lambda: float
    weighted_r2: float

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=np.float64).ravel().copy()
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        if not np.isfinite(coef).all() or not np.isfinite(self.intercept):
            raise ValidationError("fit produced non-finite values")


def fit_weighted_ridge(
    design, targets, weights, ridge_lambda: float = 1.0, fit_intercept: bool = True
) -> SurrogateFit:
    """Solve the weighted ridge problem on (mask, target) pairs.

    ``design`` is S x F (binary masks in practice, any reals accepted),
    ``targets`` and ``weights`` are length S, weights positive.  The ridge
    penalty never touches the intercept.  Raises
    :class:`SingularSystemError` when ridge_lambda = 0 and the system has no
    unique solution.
    """
    x = np.asarray(design, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise ValidationError("design must be a 2-d matrix")
    s, f = x.shape
    if s < 2:
        raise ValidationError("need at least 2 samples to fit")
    if y.shape[0] != s or w.shape[0] != s:
        raise ValidationError(
            f"dimension mismatch: design has {s} rows, targets {y.shape[0]}, weights {w.shape[0]}"
        )
    if not np.isfinite(x).all() or not np.isfinite(y).all() or not np.isfinite(w).all():
        raise ValidationError("non-finite values in design, targets, or weights")
    if (w <= 0).any():
        raise ValidationError("weights must be positive")
    if ridge_lambda < 0:
        raise ValidationError("ridge_lambda must be ≥ 0")

    if fit_intercept:
        xa = np.hstack([x, np.ones((s, 1))])
    else:
        xa = x
    penalty = np.eye(xa.shape[1])
    if fit_intercept:
        penalty[-1, -1] = 0.0  # intercept unpenalized
    xtw = xa.T * w
    lhs = xtw @ xa + ridge_lambda * penalty
    rhs = xtw @ y
    try:
        solution = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "normal equations are singular; retry with ridge_lambda > 0"
        ) from exc
    if fit_intercept:
        coef, intercept = solution[:-1], float(solution[-1])
    else:
        coef, intercept = solution, 0.0

    residuals = y - intercept - x @ coef
    rss = float(w @ residuals**2)
    y_bar = float(w @ y) / float(w.sum())
    tss = float(w @ (y - y_bar) ** 2)
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    return SurrogateFit(
        coefficients=coef, intercept=intercept, ridge_lambda=float(ridge_lambda), weighted_r2=r2
    )


def rank_coefficients(coefficients, k: int) -> list:
    """Top min(k, F) features by |coefficient|, ties broken by ascending index.

    Returns (feature_index, signed_coefficient) pairs in rank order.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    coef = np.asarray(coefficients, dtype=np.float64).ravel()
    order = sorted(range(coef.shape[0]), key=lambda i: (-abs(coef[i]), i))
    return [(i, float(coef[i])) for i in order[: min(k, coef.shape[0])]]


def rank_features(fit: SurrogateFit, k: int) -> list:
    """Rank the fit's features; see :func:`rank_coefficients`."""
    return rank_coefficients(fit.coefficients, k)
