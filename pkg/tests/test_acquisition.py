import numpy as np
import pytest

from tadkit.acquisition import (AcquisitionInputs, correction_term, domain_penalty,
                                domain_penalty_with_gradient,
                                expected_information_gain,
                                expected_information_gain_with_gradient,
                                predictive_log_likelihood, tad_acquisition,
                                tad_acquisition_with_gradient)
from tadkit.campaign import Box
from tadkit.gp import Dataset, predictive_given_1
from tadkit.testbed import mc_expectation_oracle
from conftest import joint_conditioning_oracle, random_dataset, random_model


def random_inputs(seed, n_tasks=2, n_dims=2, n_train=5, n_batch=3,
                  noise=(0.04, 0.09)):
    r = np.random.default_rng(seed)
    model = random_model(r, n_tasks=n_tasks, n_dims=n_dims)
    data = random_dataset(r, model, n_points=n_train, noise=0.05)
    return AcquisitionInputs(
        model, data,
        r.uniform(-2, 2, size=(n_batch, n_dims)),
        r.uniform(-2, 2, size=n_dims),
        r.standard_normal(n_tasks),
        np.array(noise[:n_tasks]),
    )


def empty_batch_inputs(inputs):
    return AcquisitionInputs(inputs.model, inputs.data,
                             np.zeros((0, inputs.model.n_dims)),
                             inputs.target_point, inputs.target_design,
                             inputs.batch_noise)


class TestCorrectionTerm:
    def test_empty_batch_is_zero(self):
        inputs = random_inputs(0)
        t = correction_term(empty_batch_inputs(inputs))
        assert np.array_equal(t, np.zeros((2, 2)))

    def test_redundant_batch_contributes_almost_nothing(self):
        # Batch duplicating noise-free training points with tiny batch
        # noise: the correction stays negligible against the predictive
        # covariance (redundant information drops out).
        r = np.random.default_rng(3)
        model = random_model(r)
        pts = r.uniform(-2, 2, size=(4, 2))
        data = Dataset(pts, r.standard_normal(8), np.zeros(8))
        x = r.uniform(-2, 2, size=2)
        inputs = AcquisitionInputs(model, data, pts[:3].copy(), x,
                                   r.standard_normal(2), np.full(2, 1e-6))
        t = correction_term(inputs)
        qf1 = predictive_given_1(model, data, x).cov
        assert np.linalg.norm(t) <= 1e-4 * np.linalg.norm(qf1)

    def test_update_identity_against_joint_conditioning(self):
        worst = 0.0
        for seed in range(10):
            inputs = random_inputs(100 + seed)
            t = correction_term(inputs)
            pred1 = predictive_given_1(inputs.model, inputs.data,
                                       inputs.target_point)
            _, cov12 = joint_conditioning_oracle(
                inputs.model, inputs.data, inputs.target_point,
                inputs.batch_points,
                np.zeros(inputs.batch_points.shape[0] * inputs.model.n_tasks),
                inputs.batch_noise)
            worst = max(worst, float(np.max(np.abs(t - (pred1.cov - cov12)))))
        assert worst <= 1e-9

    def test_symmetric_psd(self):
        for seed in range(5):
            t = correction_term(random_inputs(seed))
            assert np.allclose(t, t.T)
            assert np.linalg.eigvalsh(t).min() >= -1e-10


class TestPredictiveLogLikelihood:
    def test_zero_residual_unit_variance(self):
        # Far-apart scalar construction with unit predictive variance.
        from tadkit.kernels import KernelModel, ScalarKernelParams, TaskMatrixParams
        model = KernelModel(np.array([0.0]),
                            ((ScalarKernelParams(1.0, np.array([1.0])),
                              TaskMatrixParams(np.array([[1.0]]))),))
        data = Dataset.empty(1)
        value = predictive_log_likelihood(model, data, np.zeros((0, 1)),
                                          np.zeros(0), np.array([0.0]),
                                          np.array([0.0]), np.array([0.0]))
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_unit_residual(self):
        from tadkit.kernels import KernelModel, ScalarKernelParams, TaskMatrixParams
        model = KernelModel(np.array([0.0]),
                            ((ScalarKernelParams(1.0, np.array([1.0])),
                              TaskMatrixParams(np.array([[1.0]]))),))
        value = predictive_log_likelihood(model, Dataset.empty(1),
                                          np.zeros((0, 1)), np.zeros(0),
                                          np.array([0.0]), np.array([1.0]),
                                          np.array([0.0]))
        assert value == pytest.approx(-0.5, abs=1e-12)

    def test_matches_normal_logpdf_oracle(self, rng):
        from conftest import dense_mvn_logpdf
        inputs = random_inputs(11)
        obs = rng.standard_normal(6)
        value = predictive_log_likelihood(
            inputs.model, inputs.data, inputs.batch_points, obs,
            inputs.target_point, inputs.target_design, inputs.batch_noise)
        mean, cov = joint_conditioning_oracle(
            inputs.model, inputs.data, inputs.target_point,
            inputs.batch_points, obs, inputs.batch_noise)
        oracle = dense_mvn_logpdf(inputs.target_design, mean, cov) \
            + 0.5 * 2 * np.log(2 * np.pi)
        assert value == pytest.approx(oracle, abs=1e-10)


class TestTadAcquisition:
    def test_empty_batch_reduces_to_log_likelihood(self):
        inputs = random_inputs(4)
        empty = empty_batch_inputs(inputs)
        breakdown = tad_acquisition(empty)
        assert breakdown.trace_term == 0.0
        assert np.array_equal(breakdown.correction, np.zeros((2, 2)))
        direct = predictive_log_likelihood(
            empty.model, empty.data, empty.batch_points, np.zeros(0),
            empty.target_point, empty.target_design, empty.batch_noise)
        assert breakdown.total == pytest.approx(direct, abs=1e-12)

    def test_total_is_sum_of_terms(self):
        for seed in range(5):
            bd = tad_acquisition(random_inputs(seed))
            assert bd.total == pytest.approx(
                bd.log_det_term + bd.data_fit_term + bd.trace_term, abs=1e-12)
            assert bd.trace_term <= 0.0
            assert bd.eig_nats >= -1e-9

    def test_scalar_closed_form(self):
        # Unit prior variance, one batch point at x with unit noise: the
        # correction is exactly 0.5; with zero residual the total is
        # -0.5 log 0.5 - 0.5.
        from tadkit.kernels import KernelModel, ScalarKernelParams, TaskMatrixParams
        model = KernelModel(np.array([0.3]),
                            ((ScalarKernelParams(1.0, np.array([1.0])),
                              TaskMatrixParams(np.array([[1.0]]))),))
        x = np.array([0.0])
        inputs = AcquisitionInputs(model, Dataset.empty(1), x[None, :], x,
                                   np.array([0.3]), np.array([1.0]))
        bd = tad_acquisition(inputs)
        assert bd.correction[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert bd.data_fit_term == pytest.approx(0.0, abs=1e-12)
        assert bd.total == pytest.approx(-0.5 * np.log(0.5) - 0.5, abs=1e-12)
        assert bd.total == pytest.approx(-0.15342640972002733, abs=1e-9)
        # The matching information gain: -0.5 log(0.5) nats.
        assert expected_information_gain(inputs) == pytest.approx(
            0.34657359027997264, abs=1e-12)

    def test_expectation_identity_monte_carlo(self):
        # The closed form must equal the average of the predictive
        # log-likelihood over simulated batch outcomes.
        for seed in (0, 1, 2):
            inputs = random_inputs(200 + seed)
            bd = tad_acquisition(inputs)
            mean, stderr = mc_expectation_oracle(
                inputs, 60000, rng=np.random.default_rng(900 + seed))
            assert abs(bd.total - mean) <= 3.0 * stderr

    def test_gradient_matches_finite_differences(self):
        from tadkit.optim import gradient_check
        for seed in (0, 5, 9):
            inputs = random_inputs(300 + seed)
            d = inputs.model.n_dims
            n2 = inputs.batch_points.shape[0]

            def objective(z):
                probe = AcquisitionInputs(
                    inputs.model, inputs.data, z[d:].reshape(n2, d), z[:d],
                    inputs.target_design, inputs.batch_noise)
                bd, grad = tad_acquisition_with_gradient(probe)
                return bd.total, grad

            z0 = np.concatenate([inputs.target_point,
                                 inputs.batch_points.reshape(-1)])
            assert gradient_check(objective, z0) <= 1e-4


class TestExpectedInformationGain:
    def test_empty_batch_gives_zero(self):
        inputs = random_inputs(6)
        assert expected_information_gain(empty_batch_inputs(inputs)) == 0.0

    def test_nonnegative(self):
        for seed in range(10):
            assert expected_information_gain(random_inputs(seed)) >= -1e-9

    def test_redundant_batch_carries_negligible_information(self):
        r = np.random.default_rng(8)
        model = random_model(r)
        pts = r.uniform(-2, 2, size=(4, 2))
        data = Dataset(pts, r.standard_normal(8), np.zeros(8))
        inputs = AcquisitionInputs(model, data, pts[:3].copy(),
                                   r.uniform(-2, 2, size=2),
                                   r.standard_normal(2), np.full(2, 1e-6))
        assert expected_information_gain(inputs) <= 1e-3

    def test_compact_and_volume_ratio_forms_agree(self):
        worst = 0.0
        for seed in range(100):
            inputs = random_inputs(400 + seed)
            compact = expected_information_gain(inputs)
            ratio = tad_acquisition(inputs).eig_nats
            worst = max(worst, abs(compact - ratio))
        assert worst <= 1e-9

    def test_gradient_matches_finite_differences(self):
        from tadkit.optim import gradient_check
        for seed in (1, 4, 7):
            inputs = random_inputs(500 + seed)
            d = inputs.model.n_dims
            n2 = inputs.batch_points.shape[0]

            def objective(z):
                probe = AcquisitionInputs(
                    inputs.model, inputs.data, z[d:].reshape(n2, d), z[:d],
                    inputs.target_design, inputs.batch_noise)
                return expected_information_gain_with_gradient(probe)

            z0 = np.concatenate([inputs.target_point,
                                 inputs.batch_points.reshape(-1)])
            assert gradient_check(objective, z0) <= 1e-4


class TestRedundancyLimit:
    def test_pure_duplicates_drop_out_at_any_noise(self):
        # An all-duplicate batch over noise-free data carries nothing: the
        # acquisition equals its empty-batch value at every noise level.
        r = np.random.default_rng(12)
        model = random_model(r)
        pts = r.uniform(-2, 2, size=(4, 2))
        data = Dataset(pts, r.standard_normal(8), np.zeros(8))
        x = r.uniform(-2, 2, size=2)
        target = r.standard_normal(2)
        base = tad_acquisition(AcquisitionInputs(
            model, data, np.zeros((0, 2)), x, target, np.zeros(2))).total
        for eps in (1e-2, 1e-4, 1e-6):
            bd = tad_acquisition(AcquisitionInputs(
                model, data, pts[:2].copy(), x, target, np.full(2, eps)))
            assert abs(bd.total - base) < 1e-6 * (1 + abs(base))

    def test_mixed_batch_approaches_fresh_only_limit(self):
        # Fresh plus duplicated points: as the batch noise shrinks the
        # duplicates stop mattering, so the acquisition approaches the
        # value of the fresh-only noise-free batch, monotonically.
        r = np.random.default_rng(13)
        model = random_model(r)
        pts = r.uniform(-2, 2, size=(4, 2))
        data = Dataset(pts, r.standard_normal(8), np.zeros(8))
        x = r.uniform(-2, 2, size=2)
        target = r.standard_normal(2)
        fresh = r.uniform(-2, 2, size=(1, 2))
        reference = tad_acquisition(AcquisitionInputs(
            model, data, fresh, x, target, np.zeros(2))).total
        gaps = []
        for eps in (1e-2, 1e-4, 1e-6):
            batch = np.vstack([fresh, pts[:2]])
            bd = tad_acquisition(AcquisitionInputs(
                model, data, batch, x, target, np.full(2, eps)))
            gaps.append(abs(bd.total - reference))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-4 * (1 + abs(reference))


class TestDomainPenalty:
    BOX = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))

    def test_interior_is_exactly_zero(self):
        value = domain_penalty(np.array([0.2, -0.3]),
                               np.array([[0.5, 0.5], [-0.9, 0.0]]),
                               self.BOX, strength=3.0)
        assert value == 0.0

    def test_single_excursion_quadratic(self):
        value = domain_penalty(np.array([1.5, 0.0]), np.zeros((0, 2)),
                               self.BOX, strength=1.0)
        assert value == pytest.approx(-0.25)

    def test_additive_over_points_and_dims(self):
        batch = np.array([[2.0, 0.0], [0.0, -2.0]])
        value = domain_penalty(np.array([0.0, 0.0]), batch, self.BOX, strength=2.0)
        assert value == pytest.approx(-4.0)

    def test_gradient_matches_finite_differences(self):
        from tadkit.optim import gradient_check
        x0 = np.array([1.7, -0.2])
        batch0 = np.array([[0.3, -1.9], [0.8, 0.8]])

        def objective(z):
            return domain_penalty_with_gradient(z[:2], z[2:].reshape(2, 2),
                                                self.BOX, strength=4.0)

        z0 = np.concatenate([x0, batch0.reshape(-1)])
        assert gradient_check(objective, z0) <= 1e-6
