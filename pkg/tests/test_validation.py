import numpy as np
import pytest
from scipy import stats

from tadkit.errors import ContractViolationError
from tadkit.gp import Dataset, NormalDist, data_predictive
from tadkit.kernels import stack_means
from tadkit.validation import (batch_validation, chi2_right_tail,
                               regularized_upper_gamma, training_fit)
from conftest import random_model, sample_from_model


class TestChi2RightTail:
    def test_zero_statistic_gives_one(self):
        for dof in (1, 2, 5, 17):
            assert chi2_right_tail(0.0, dof) == 1.0

    def test_two_dof_closed_form(self):
        for q in np.linspace(0.0, 40.0, 401):
            assert abs(chi2_right_tail(float(q), 2) - np.exp(-q / 2)) <= 1e-12

    def test_spec_values(self):
        assert chi2_right_tail(2.0, 2) == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert chi2_right_tail(2.0 * np.log(10.0), 2) == pytest.approx(0.1, abs=1e-12)

    def test_matches_scipy_grid(self):
        worst = 0.0
        for dof in (1, 2, 3, 6, 8, 20, 57):
            for q in np.linspace(0.0, 80.0, 161):
                mine = chi2_right_tail(float(q), dof)
                ref = float(stats.chi2.sf(q, dof))
                worst = max(worst, abs(mine - ref))
        assert worst <= 1e-10

    def test_strictly_decreasing(self):
        for dof in (1, 3, 8):
            values = [chi2_right_tail(q, dof) for q in np.linspace(0.01, 30, 100)]
            assert all(a > b for a, b in zip(values, values[1:]))

    def test_contract_violations(self):
        with pytest.raises(ContractViolationError):
            chi2_right_tail(-0.1, 2)
        with pytest.raises(ContractViolationError):
            chi2_right_tail(1.0, 0)
        with pytest.raises(ContractViolationError):
            regularized_upper_gamma(0.0, 1.0)


class TestBatchValidation:
    def test_exact_prediction_gives_unit_pvalue(self):
        pred = NormalDist(np.array([1.0, -2.0]), np.eye(2))
        report = batch_validation(pred, np.array([1.0, -2.0]))
        assert report.statistic == pytest.approx(0.0)
        assert report.p_value == 1.0
        assert report.kind == "batch_Q"

    def test_identity_covariance_unit_residuals(self):
        pred = NormalDist(np.zeros(3), np.eye(3))
        report = batch_validation(pred, np.ones(3))
        assert report.statistic == pytest.approx(3.0, abs=1e-12)
        assert report.dof == 3
        assert report.p_value == pytest.approx(0.3916251762710878, abs=1e-9)

    def test_whitening_invariance(self, rng):
        # The statistic is the squared norm of the whitened residual.
        cov = rng.standard_normal((4, 4))
        cov = cov @ cov.T + 0.5 * np.eye(4)
        mean = rng.standard_normal(4)
        obs = rng.standard_normal(4)
        report = batch_validation(NormalDist(mean, cov), obs)
        chol = np.linalg.cholesky(cov)
        white = np.linalg.solve(chol, obs - mean)
        assert report.statistic == pytest.approx(float(white @ white), abs=1e-10)

    def test_pvalues_uniform_under_true_model(self):
        # Predict-then-sample calibration: 500 replicate draws from the
        # model itself must give uniform right-tail P-values.
        r = np.random.default_rng(7)
        model = random_model(r, n_tasks=2, n_dims=2)
        train_pts = r.uniform(-2, 2, size=(5, 2))
        batch_pts = r.uniform(-2, 2, size=(3, 2))
        noise = np.array([0.05, 0.08])
        p_values = []
        n1e = 5 * 2
        for _ in range(500):
            stacked = sample_from_model(r, model, np.vstack([train_pts, batch_pts]),
                                        noise)
            data = Dataset(train_pts, stacked[:n1e], np.tile(noise, 5))
            pred = data_predictive(model, data, batch_pts, noise)
            p_values.append(batch_validation(pred, stacked[n1e:]).p_value)
        result = stats.kstest(p_values, "uniform")
        assert result.pvalue > 0.01


class TestTrainingFit:
    def test_zero_residual(self, rng):
        model = random_model(rng)
        pts = rng.uniform(-2, 2, size=(3, 2))
        data = Dataset(pts, stack_means(model, 3), np.full(6, 0.1))
        report = training_fit(model, data)
        assert report.statistic == pytest.approx(0.0)
        assert report.p_value == 1.0
        assert report.kind == "training_S"

    def test_two_point_closed_form(self):
        # Residuals (1, -1) against identity covariance: statistic 2, dof 1.
        from tadkit.kernels import KernelModel, ScalarKernelParams, TaskMatrixParams
        model = KernelModel(np.array([0.0]),
                            ((ScalarKernelParams(1.0, np.array([1.0])),
                              TaskMatrixParams(np.array([[1.0]]))),))
        # Far-apart points with unit prior variance and no noise: covariance
        # is the identity to double precision.
        data = Dataset(np.array([[0.0], [1000.0]]), np.array([1.0, -1.0]),
                       np.zeros(2))
        report = training_fit(model, data)
        assert report.statistic == pytest.approx(2.0, abs=1e-9)
        assert report.dof == 1
        assert report.p_value == pytest.approx(0.15729920705028513, abs=1e-9)

    def test_wellspecified_draws_have_plausible_pvalues(self):
        r = np.random.default_rng(21)
        model = random_model(r, n_tasks=2, n_dims=2)
        pts = r.uniform(-2, 2, size=(15, 2))
        noise = np.array([0.05, 0.05])
        inside = 0
        for _ in range(200):
            obs = sample_from_model(r, model, pts, noise)
            data = Dataset(pts, obs, np.tile(noise, 15))
            p = training_fit(model, data).p_value
            inside += int(0.001 <= p <= 0.999)
        assert inside >= 190
