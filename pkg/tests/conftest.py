"""Shared generators and independent oracles for the test suite.

The oracles here recompute quantities from first principles (dense joint
normals, naive loops) so that library code is always checked against an
implementation that shares none of its factorization shortcuts.
"""

import numpy as np
import pytest

from tadkit.gp import Dataset
from tadkit.kernels import (KernelModel, ScalarKernelParams, TaskMatrixParams,
                            assemble_cross_cov, eval_scalar_kernel, stack_means)


def random_model(rng, n_tasks=2, n_dims=2, n_components=2, ls_range=(0.6, 2.0)):
    comps = []
    for _ in range(n_components):
        sv = float(rng.uniform(0.5, 2.0))
        ls = rng.uniform(*ls_range, size=n_dims)
        raw = 0.4 * rng.standard_normal((n_tasks, n_tasks))
        chol = np.tril(raw)
        np.fill_diagonal(chol, np.abs(np.diag(raw)) + 0.5)
        comps.append((ScalarKernelParams(sv, ls), TaskMatrixParams(chol)))
    return KernelModel(rng.standard_normal(n_tasks), tuple(comps))


def random_dataset(rng, model, n_points=5, noise=0.05, box=2.0):
    pts = rng.uniform(-box, box, size=(n_points, model.n_dims))
    obs = rng.standard_normal(n_points * model.n_tasks)
    return Dataset(pts, obs, np.full(n_points * model.n_tasks, noise))


def sample_from_model(rng, model, points, noise_per_task):
    """Draw stacked observations from the model's own prior plus noise."""
    n = points.shape[0]
    gram = assemble_cross_cov(points, points, model)
    gram = gram + np.diag(np.tile(noise_per_task, n)) + 1e-12 * np.eye(gram.shape[0])
    chol = np.linalg.cholesky(gram)
    return stack_means(model, n) + chol @ rng.standard_normal(gram.shape[0])


def joint_conditioning_oracle(model, data, x, batch_points, batch_obs, batch_noise):
    """Predictive at x from one dense solve on the stacked joint normal."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    batch_points = np.asarray(batch_points, dtype=float).reshape(-1, model.n_dims)
    all_pts = np.vstack([data.points, batch_points])
    n_all = all_pts.shape[0]
    gram = assemble_cross_cov(all_pts, all_pts, model)
    noise = np.concatenate([data.noise_variances,
                            np.tile(batch_noise, batch_points.shape[0])])
    gram = gram + np.diag(noise)
    kx = assemble_cross_cov(x.reshape(1, -1), all_pts, model)
    kxx = model.self_block()
    stacked_obs = np.concatenate([data.observations,
                                  np.asarray(batch_obs, dtype=float).reshape(-1)])
    resid = stacked_obs - stack_means(model, n_all)
    mean = model.task_means + kx @ np.linalg.solve(gram, resid)
    cov = kxx - kx @ np.linalg.solve(gram, kx.T)
    return mean, 0.5 * (cov + cov.T)


def naive_cross_cov(points_a, points_b, model):
    """Element-by-element double loop over points and components."""
    e = model.n_tasks
    a = np.asarray(points_a, dtype=float)
    b = np.asarray(points_b, dtype=float)
    out = np.zeros((a.shape[0] * e, b.shape[0] * e))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            block = np.zeros((e, e))
            for scalar, task in model.components:
                block += eval_scalar_kernel(a[i], b[j], scalar) * task.matrix()
            out[i * e:(i + 1) * e, j * e:(j + 1) * e] = block
    return out


def dense_mvn_logpdf(x, mean, cov):
    """Straightforward multivariate normal log density."""
    resid = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0
    n = resid.shape[0]
    return float(-0.5 * n * np.log(2 * np.pi) - 0.5 * logdet
                 - 0.5 * resid @ np.linalg.solve(cov, resid))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
