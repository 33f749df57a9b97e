"""Built-in two-task benchmark response, noisy oracle, and brute-force checks.

The benchmark maps a 2-D control box [-3, 3]^2 to two design values via a
pair of mirrored sums of Gaussian bumps plus a linear tilt. The module also
hosts the independent heavyweight oracles the property suite leans on: a
Monte-Carlo estimate of the acquisition expectation and a shrinking-noise
ladder that exposes how redundant batch points drop out of the updated
predictive covariance.
"""

import numpy as np

from .acquisition import predictive_log_likelihood
from .errors import ContractViolationError
from .gp import data_predictive, predictive_given_1, prediction_update
from .linalg import chol_pd, chol_solve


def eval_test_function(point):
    """Benchmark response (v1, v2) at one control point in [-3, 3]^2."""
    d1, d2 = float(point[0]), float(point[1])
    return tuple(eval_test_function_batch(np.array([[d1, d2]]))[0])


def eval_test_function_batch(points):
    """Vectorized benchmark response; points is (n, 2), result (n, 2)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    d1 = pts[:, 0]
    d2 = pts[:, 1]
    tilt = 0.5 * (2.0 * d1 + d2)
    core = np.exp(-d1 ** 2 - d2 ** 2)
    v1 = (3.0 * (1.0 - d1) ** 2 * np.exp(-d1 ** 2 - (d2 + 1.0) ** 2)
          - 10.0 * (d1 / 5.0 - d1 ** 3 - d2 ** 5) * core
          - 3.0 * np.exp(-(d1 + 2.0) ** 2 - d2 ** 2) + tilt)
    v2 = (3.0 * (1.0 + d2) ** 2 * np.exp(-d2 ** 2 - (d1 + 1.0) ** 2)
          - 10.0 * (-d2 / 5.0 + d2 ** 3 + d1 ** 5) * core
          - 3.0 * np.exp(-(2.0 - d2) ** 2 - d1 ** 2) + tilt)
    return np.column_stack([v1, v2])


class SimulatedOracle:
    """Noisy sampler of a deterministic response function.

    Observations are function values plus independent zero-mean Gaussian
    noise with a known standard deviation per task; the generator is owned
    by the oracle so campaigns can persist and replay its stream.
    """

    def __init__(self, func=eval_test_function_batch, noise_std=(0.01, 0.01),
                 rng=None):
        self.func = func
        self.noise_std = np.atleast_1d(np.asarray(noise_std, dtype=float))
        if np.any(self.noise_std < 0):
            raise ContractViolationError("noise standard deviations must be >= 0")
        self.rng = rng if rng is not None else np.random.default_rng(0)

    @property
    def n_tasks(self):
        return self.noise_std.shape[0]

    @property
    def noise_variances(self):
        return self.noise_std ** 2

    def observe(self, points):
        """Observation rows (n, E) at the given control points."""
        pts = np.asarray(points, dtype=float)
        truth = np.asarray(self.func(pts), dtype=float).reshape(pts.shape[0], -1)
        noise = self.rng.standard_normal(truth.shape) * self.noise_std[None, :]
        return truth + noise

    def rng_state(self):
        return self.rng.bit_generator.state

    def set_rng_state(self, state):
        self.rng.bit_generator.state = state


def mc_expectation_oracle(inputs, n_samples, rng=None):
    """Monte-Carlo estimate of the acquisition's defining expectation.

    Draws batch observations from their predictive distribution, averages
    the target's predictive log-likelihood over the draws, and returns
    (mean, standard error). Exact with zero standard error for an empty
    batch, where nothing is latent.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    model, data = inputs.model, inputs.data
    x = inputs.target_point
    batch = inputs.batch_points
    target = inputs.target_design
    if batch.shape[0] == 0:
        exact = predictive_log_likelihood(model, data, batch, np.zeros(0), x,
                                          target, inputs.batch_noise)
        return exact, 0.0
    if n_samples < 1000:
        raise ContractViolationError("use at least 1000 Monte-Carlo samples")
    pred21 = data_predictive(model, data, batch, inputs.batch_noise)
    chol21 = chol_pd(pred21.cov, label="batch predictive covariance")
    draws = pred21.mean[None, :] + rng.standard_normal(
        (n_samples, pred21.dim)) @ chol21.T

    # The updated covariance ignores the drawn values and the updated mean
    # is linear in them, so the log-likelihood is a fixed quadratic of the
    # innovations and the whole sample can be scored in one shot.
    pred1 = predictive_given_1(model, data, x)
    updated = prediction_update(pred1, model, data, x, batch, pred21.mean,
                                inputs.batch_noise)
    chol_up = chol_pd(updated.cov, label="updated predictive covariance")
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol_up))))
    base_resid = target - pred1.mean
    gain = _mean_shift_matrix(model, data, x, batch, inputs.batch_noise, chol21)
    resids = base_resid[None, :] - (gain @ (draws - pred21.mean[None, :]).T).T
    white = chol_solve(chol_up, resids.T).T
    values = -0.5 * logdet - 0.5 * np.sum(resids * white, axis=1)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(n_samples))


def _mean_shift_matrix(model, data, x, batch, batch_noise, chol21):
    """Linear map from batch innovations to the updated predictive mean."""
    from .kernels import assemble_cross_cov

    x = np.atleast_1d(np.asarray(x, dtype=float))
    kx2 = assemble_cross_cov(x.reshape(1, -1), batch, model)
    if data.n_points == 0:
        coupling = kx2
    else:
        kx1 = assemble_cross_cov(x.reshape(1, -1), data.points, model)
        k12 = assemble_cross_cov(data.points, batch, model)
        gram = assemble_cross_cov(data.points, data.points, model)
        gram += np.diag(data.noise_variances)
        chol = chol_pd(gram, label="training covariance")
        coupling = kx2 - kx1 @ chol_solve(chol, k12)
    return chol_solve(chol21, coupling.T).T


def redundancy_limit_oracle(model, data, x, fresh_batch_points, duplicate_indices,
                            eps_ladder=(1e-2, 1e-3, 1e-4, 1e-5)):
    """Updated-covariance discrepancy as batch noise shrinks to zero.

    The batch is the fresh points plus exact duplicates of training points;
    the reference drops the duplicates and keeps only the fresh points. As
    the batch noise scale eps decreases, the two updated predictive
    covariances at x must approach each other, because redundant points
    carry no information beyond their noise. Requires a noise-free dataset.

    Returns a list of (eps, discrepancy_norm, reference_norm) rows.
    """
    if np.any(data.noise_variances != 0.0):
        raise ContractViolationError("redundancy ladder requires noise-free data")
    fresh = np.asarray(fresh_batch_points, dtype=float).reshape(-1, model.n_dims)
    dup = data.points[np.asarray(duplicate_indices, dtype=int)].reshape(-1, model.n_dims)
    batch_full = np.vstack([fresh, dup]) if fresh.size else dup
    e = model.n_tasks
    pred1 = predictive_given_1(model, data, x)
    # Reference: the zero-noise limit, duplicates dropped entirely.
    if fresh.shape[0] > 0:
        ref = _updated_cov(model, data, x, fresh, np.zeros(e), pred1)
    else:
        ref = pred1.cov
    ref_norm = float(np.linalg.norm(ref))
    rows = []
    for eps in eps_ladder:
        noise = np.full(e, float(eps))
        full = _updated_cov(model, data, x, batch_full, noise, pred1)
        rows.append((float(eps), float(np.linalg.norm(full - ref)), ref_norm))
    return rows


def _updated_cov(model, data, x, batch, noise, pred1):
    obs = np.zeros(batch.shape[0] * model.n_tasks)  # covariance ignores values
    return prediction_update(pred1, model, data, x, batch, obs, noise).cov
