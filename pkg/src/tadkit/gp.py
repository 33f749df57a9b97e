"""Vector-valued GP regression: likelihood, predictives, and update formulas.

All solves go through Cholesky factorizations (see linalg); explicit
inverses appear only where a dense inverse is itself the quantity needed
(the likelihood gradient trace terms).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DimensionMismatchError
from .kernels import assemble_cross_cov, scalar_kernel_matrix, stack_means
from .linalg import chol_inverse, chol_logdet, chol_pd, chol_solve

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Dataset:
    """Acquired control points with stacked observations and noise variances.

    ``observations`` and ``noise_variances`` use the point-major stacked
    layout of length n_points * n_tasks. Datasets are value objects: use
    ``append`` to extend, which returns a new instance.
    """

    points: np.ndarray
    observations: np.ndarray
    noise_variances: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(0, 0) if pts.size == 0 else pts.reshape(1, -1)
        obs = np.asarray(self.observations, dtype=float).reshape(-1)
        noise = np.asarray(self.noise_variances, dtype=float).reshape(-1)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "noise_variances", noise)
        n = pts.shape[0]
        if n > 0 and obs.size % n != 0:
            raise DimensionMismatchError(
                f"{obs.size} stacked observations do not divide over {n} points")
        if noise.shape != obs.shape:
            raise DimensionMismatchError("noise_variances must match observations")
        if np.any(noise < 0.0):
            raise ContractViolationError("noise variances must be nonnegative")

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def n_tasks(self):
        if self.n_points == 0:
            return 0
        return self.observations.size // self.n_points

    def observations_by_point(self):
        return self.observations.reshape(self.n_points, self.n_tasks)

    @classmethod
    def from_rows(cls, points, observation_rows, noise_per_task):
        """Build from per-point observation rows and one variance per task."""
        points = np.asarray(points, dtype=float)
        rows = np.asarray(observation_rows, dtype=float)
        n = points.shape[0]
        noise = np.tile(np.asarray(noise_per_task, dtype=float), n)
        return cls(points, rows.reshape(-1), noise)

    @classmethod
    def empty(cls, n_dims):
        return cls(np.zeros((0, n_dims)), np.zeros(0), np.zeros(0))

    def append(self, points, observation_rows, noise_per_task):
        points = np.asarray(points, dtype=float).reshape(-1, self.points.shape[1])
        rows = np.asarray(observation_rows, dtype=float).reshape(points.shape[0], -1)
        noise = np.tile(np.asarray(noise_per_task, dtype=float), points.shape[0])
        return Dataset(
            np.vstack([self.points, points]),
            np.concatenate([self.observations, rows.reshape(-1)]),
            np.concatenate([self.noise_variances, noise]),
        )


@dataclass(frozen=True)
class NormalDist:
    """Multivariate normal with a symmetrized covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatchError("covariance shape does not match mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size


@dataclass(frozen=True)
class GramBlocks:
    """All covariance blocks between a target point, data, and a batch."""

    target_self: np.ndarray      # (E, E)
    target_data: np.ndarray      # (E, N1*E)
    target_batch: np.ndarray     # (E, N2*E)
    data_data: np.ndarray        # (N1*E, N1*E)
    data_batch: np.ndarray       # (N1*E, N2*E)
    batch_batch: np.ndarray      # (N2*E, N2*E)


def gram_blocks(model, data_points, batch_points, target_point):
    x = np.atleast_2d(np.asarray(target_point, dtype=float))
    return GramBlocks(
        target_self=model.self_block(),
        target_data=assemble_cross_cov(x, data_points, model),
        target_batch=assemble_cross_cov(x, batch_points, model),
        data_data=assemble_cross_cov(data_points, data_points, model),
        data_batch=assemble_cross_cov(data_points, batch_points, model),
        batch_batch=assemble_cross_cov(batch_points, batch_points, model),
    )


def _training_matrix(model, data):
    """K11 + Sigma1 for the stacked training layout."""
    gram = assemble_cross_cov(data.points, data.points, model)
    return gram + np.diag(data.noise_variances)


def _residual(model, data):
    return data.observations - stack_means(model, data.n_points)


def marginal_log_likelihood(model, data):
    """Log density of the stacked observations under the GP prior plus noise."""
    n = data.observations.size
    if n == 0:
        return 0.0
    chol = chol_pd(_training_matrix(model, data), label="training covariance")
    resid = _residual(model, data)
    alpha = chol_solve(chol, resid)
    return float(-0.5 * n * LOG_2PI - 0.5 * chol_logdet(chol)
                 - 0.5 * float(resid @ alpha))


def training_quadratic_form(model, data):
    """The data-fit quadratic form resid^T (K11+Sigma1)^{-1} resid."""
    if data.observations.size == 0:
        return 0.0
    chol = chol_pd(_training_matrix(model, data), label="training covariance")
    resid = _residual(model, data)
    return float(resid @ chol_solve(chol, resid))


def marginal_log_likelihood_and_gradient(model, data):
    """Likelihood value, gradient in the flat hyperparameter layout, and the
    data-fit quadratic form (handy for optimizer early stopping).

    Gradient identity: for value = -0.5*(n log 2pi + log det A + r^T A^-1 r)
    with A = K11 + Sigma1 and r the de-meaned observations,
    d(value) = 0.5 * <alpha alpha^T - A^-1, dA> + alpha^T d(mean-stack),
    alpha = A^-1 r.
    """
    n1 = data.n_points
    e = model.n_tasks
    d = model.n_dims
    n = data.observations.size
    chol = chol_pd(_training_matrix(model, data), label="training covariance")
    resid = _residual(model, data)
    alpha = chol_solve(chol, resid)
    value = float(-0.5 * n * LOG_2PI - 0.5 * chol_logdet(chol)
                  - 0.5 * float(resid @ alpha))
    quad = float(resid @ alpha)

    inv = chol_inverse(chol)
    outer = np.outer(alpha, alpha) - inv
    outer4 = outer.reshape(n1, e, n1, e)

    grads = [alpha.reshape(n1, e).sum(axis=0)]  # d/d task_means
    pts = data.points
    for scalar, task in model.components:
        kappa = task.matrix()
        chol_factor = task.chol_factor
        kmat = scalar_kernel_matrix(pts, pts, scalar)
        # Contractions of the outer matrix against the component structure.
        block_scalar = np.einsum("aibj,ij->ab", outer4, kappa)   # (N1, N1)
        block_task = np.einsum("aibj,ab->ij", outer4, kmat)      # (E, E)

        g_sv = 0.5 * float(np.sum(kmat * block_scalar))          # d/d log sv
        g_ls = np.empty(d)
        for dim in range(d):
            diff = pts[:, dim][:, None] - pts[None, :, dim]
            scaled = (diff / scalar.lengthscales[dim]) ** 2
            g_ls[dim] = 0.5 * float(np.sum(kmat * block_scalar * scaled))
        # d kappa / d L_pq pairing: <block_task, dL L^T + L dL^T> = 2 (block_task L)_pq
        task_pair = block_task @ chol_factor
        g_tri = []
        for i in range(e):
            for j in range(i + 1):
                val = task_pair[i, j]
                if i == j:
                    val *= chol_factor[i, i]  # chain through log-diagonal
                g_tri.append(val)
        grads.append(np.concatenate([[g_sv], g_ls, np.asarray(g_tri)]))
    return value, np.concatenate(grads), quad


def predictive_given_1(model, data, x):
    """Predictive distribution of the latent response at x given the data."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != model.n_dims:
        raise DimensionMismatchError("target point has wrong dimension")
    mu = model.task_means
    kxx = model.self_block()
    if data.n_points == 0:
        return NormalDist(mu.copy(), kxx)
    kx1 = assemble_cross_cov(x.reshape(1, -1), data.points, model)
    chol = chol_pd(_training_matrix(model, data), label="training covariance")
    resid = _residual(model, data)
    alpha = chol_solve(chol, resid)
    v1 = chol_solve(chol, kx1.T)
    mean = mu + kx1 @ alpha
    cov = kxx - kx1 @ v1
    return NormalDist(mean, cov)


def data_predictive(model, data, batch_points, batch_noise):
    """Distribution of the stacked observations a batch would produce.

    ``batch_noise`` is one variance per task, applied to every batch point.
    With an empty dataset this is the prior over the batch observations.
    """
    batch = np.asarray(batch_points, dtype=float).reshape(-1, model.n_dims)
    n2 = batch.shape[0]
    if n2 == 0:
        raise ContractViolationError("data_predictive requires a nonempty batch")
    noise = np.tile(np.asarray(batch_noise, dtype=float), n2)
    mu2 = stack_means(model, n2)
    k22 = assemble_cross_cov(batch, batch, model) + np.diag(noise)
    if data.n_points == 0:
        return NormalDist(mu2, k22)
    k12 = assemble_cross_cov(data.points, batch, model)
    chol = chol_pd(_training_matrix(model, data), label="training covariance")
    resid = _residual(model, data)
    mean = mu2 + k12.T @ chol_solve(chol, resid)
    cov = k22 - k12.T @ chol_solve(chol, k12)
    return NormalDist(mean, cov)


def prediction_update(pred1, model, data, x, batch_points, batch_obs, batch_noise):
    """Fold a batch of new observations into a predictive at x.

    Mean picks up the innovation against the batch predictive; the
    covariance contracts by a PSD term that does not involve the new
    observation values at all.
    """
    batch = np.asarray(batch_points, dtype=float).reshape(-1, model.n_dims)
    n2 = batch.shape[0]
    if n2 == 0:
        return pred1
    x = np.atleast_1d(np.asarray(x, dtype=float))
    obs = np.asarray(batch_obs, dtype=float).reshape(-1)
    if obs.size != n2 * model.n_tasks:
        raise DimensionMismatchError("batch observations do not match batch size")
    pred21 = data_predictive(model, data, batch, batch_noise)
    kx2 = assemble_cross_cov(x.reshape(1, -1), batch, model)
    if data.n_points == 0:
        coupling = kx2
    else:
        kx1 = assemble_cross_cov(x.reshape(1, -1), data.points, model)
        k12 = assemble_cross_cov(data.points, batch, model)
        chol = chol_pd(_training_matrix(model, data), label="training covariance")
        coupling = kx2 - kx1 @ chol_solve(chol, k12)
    chol21 = chol_pd(pred21.cov, label="batch predictive covariance")
    gain = chol_solve(chol21, coupling.T)          # (n2*E, E)
    mean = pred1.mean + coupling @ chol_solve(chol21, obs - pred21.mean)
    cov = pred1.cov - coupling @ gain
    return NormalDist(mean, cov)
