import numpy as np
import pytest

import mmsurrogate as mm
from mmsurrogate.surrogate import SingularSystemError


def brute_force_solve(design, targets, weights, ridge_lambda, fit_intercept=True):
    """Independent oracle: penalized least squares via sqrt-weight row scaling
    plus explicit penalty rows, solved with an SVD-based lstsq."""
    x = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=float)
    if fit_intercept:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    sw = np.sqrt(w)
    rows = [x * sw[:, None]]
    rhs = [y * sw]
    if ridge_lambda > 0:
        penalty = np.sqrt(ridge_lambda) * np.eye(x.shape[1])
        if fit_intercept:
            penalty = penalty[:-1]  # no penalty row for the intercept column
        rows.append(penalty)
        rhs.append(np.zeros(penalty.shape[0]))
    solution, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    if fit_intercept:
        return solution[:-1], float(solution[-1])
    return solution, 0.0


class TestHandSolvedCases:
    def test_exact_interpolation_of_two_points(self):
        fit = mm.fit_weighted_ridge([[1.0], [0.0]], [3.0, 0.0], [1.0, 1.0], 0.0)
        np.testing.assert_allclose(fit.coefficients, [3.0], atol=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)

    def test_weighted_no_intercept(self):
        # (X'WX) beta = X'Wy gives 2 beta = 4
        fit = mm.fit_weighted_ridge(
            [[1.0], [0.0]], [2.0, 0.0], [2.0, 1.0], 0.0, fit_intercept=False
        )
        np.testing.assert_allclose(fit.coefficients, [2.0], atol=1e-12)

    def test_ridge_shrinks_no_intercept(self):
        # (1 + 1) beta = 3
        fit = mm.fit_weighted_ridge(
            [[1.0], [0.0]], [3.0, 0.0], [1.0, 1.0], 1.0, fit_intercept=False
        )
        np.testing.assert_allclose(fit.coefficients, [1.5], atol=1e-12)

    def test_constant_target_gives_zero_coefficients(self):
        rng = np.random.default_rng(0)
        design = rng.integers(0, 2, size=(40, 5)).astype(float)
        fit = mm.fit_weighted_ridge(design, np.full(40, 0.5), np.ones(40), 1.0)
        np.testing.assert_allclose(fit.coefficients, 0.0, atol=1e-12)
        assert fit.intercept == pytest.approx(0.5, abs=1e-12)


class TestOracleEquivalence:
    def test_matches_brute_force_on_random_systems(self):
        rng = np.random.default_rng(2024)
        for trial in range(300):
            s = int(rng.integers(8, 21))
            f = int(rng.integers(1, 7))
            lam = [0.0, 0.1, 1.0][trial % 3]
            design = rng.integers(0, 2, size=(s, f)).astype(float)
            if lam == 0.0:
                design = rng.standard_normal((s, f))  # full rank a.s.
            targets = rng.standard_normal(s)
            weights = rng.uniform(0.05, 1.0, s)
            fit = mm.fit_weighted_ridge(design, targets, weights, lam)
            coef, intercept = brute_force_solve(design, targets, weights, lam)
            np.testing.assert_allclose(fit.coefficients, coef, atol=1e-8)
            assert fit.intercept == pytest.approx(intercept, abs=1e-8)

    def test_residual_orthogonality_at_lambda_zero(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            s, f = 15, 4
            design = rng.standard_normal((s, f))
            targets = rng.standard_normal(s)
            weights = rng.uniform(0.1, 1.0, s)
            fit = mm.fit_weighted_ridge(design, targets, weights, 0.0)
            residuals = targets - fit.intercept - design @ fit.coefficients
            xa = np.hstack([design, np.ones((s, 1))])
            np.testing.assert_allclose(xa.T @ (weights * residuals), 0.0, atol=1e-8)

    def test_local_optimality(self):
        rng = np.random.default_rng(11)
        design = rng.integers(0, 2, size=(30, 4)).astype(float)
        targets = rng.standard_normal(30)
        weights = rng.uniform(0.1, 1.0, 30)
        lam = 0.7
        fit = mm.fit_weighted_ridge(design, targets, weights, lam)

        def loss(coef, intercept):
            r = targets - intercept - design @ coef
            return float(weights @ r**2 + lam * coef @ coef)

        base = loss(fit.coefficients, fit.intercept)
        for j in range(4):
            for delta in (1e-4, -1e-4):
                coef = fit.coefficients.copy()
                coef[j] += delta
                assert loss(coef, fit.intercept) >= base
        for delta in (1e-4, -1e-4):
            assert loss(fit.coefficients.copy(), fit.intercept + delta) >= base

    def test_singular_system_reported(self):
        design = [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]  # duplicated column
        with pytest.raises(SingularSystemError):
            mm.fit_weighted_ridge(design, [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 0.0)
        # same system solvable once regularized
        mm.fit_weighted_ridge(design, [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 0.5)

    def test_input_validation(self):
        with pytest.raises(mm.ValidationError, match="2 samples"):
            mm.fit_weighted_ridge([[1.0]], [1.0], [1.0], 0.0)
        with pytest.raises(mm.ValidationError, match="positive"):
            mm.fit_weighted_ridge([[1.0], [0.0]], [1.0, 0.0], [1.0, 0.0], 0.0)
        with pytest.raises(mm.ValidationError, match="non-finite"):
            mm.fit_weighted_ridge([[1.0], [np.nan]], [1.0, 0.0], [1.0, 1.0], 0.0)


class TestRankFeatures:
    def test_magnitude_ranking_keeps_sign(self):
        fit = mm.SurrogateFit(
            coefficients=np.array([0.5, -0.9, 0.1]), intercept=0.0, ridge_lambda=0.0, weighted_r2=1.0
        )
        assert mm.rank_features(fit, 2) == [(1, -0.9), (0, 0.5)]

    def test_tie_breaks_by_index(self):
        fit = mm.SurrogateFit(
            coefficients=np.array([0.2, 0.2]), intercept=0.0, ridge_lambda=0.0, weighted_r2=1.0
        )
        assert mm.rank_features(fit, 1) == [(0, 0.2)]

    def test_k_larger_than_f_returns_all(self):
        fit = mm.SurrogateFit(
            coefficients=np.array([0.3, -0.1, 0.2]), intercept=0.0, ridge_lambda=0.0, weighted_r2=1.0
        )
        ranked = mm.rank_features(fit, 10)
        assert [i for i, _ in ranked] == [0, 2, 1]

    def test_prefix_is_duplicate_free_permutation(self):
        rng = np.random.default_rng(3)
        coef = rng.standard_normal(12)
        ranked = mm.rank_coefficients(coef, 7)
        indices = [i for i, _ in ranked]
        assert len(indices) == 7
        assert len(set(indices)) == 7
        magnitudes = [abs(s) for _, s in ranked]
        assert magnitudes == sorted(magnitudes, reverse=True)
