"""Multitask covariance model: sums of (scalar RBF kernel) x (task matrix).

Stacking convention used everywhere: observations at N points with E tasks
form a vector of length N*E ordered point-major, so entry (point k, task i)
sits at index k*E + i. Covariance matrices between point lists follow the
same layout, block (a, b) being an E x E matrix.

Each covariance component pairs a squared-exponential kernel over control
space (per-dimension lengthscales) with a symmetric positive-definite task
matrix stored by its lower Cholesky factor. Positivity constraints are
enforced structurally: signal variances, lengthscales and the Cholesky
diagonal live in log-space inside the flat hyperparameter vector.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DimensionMismatchError


@dataclass(frozen=True)
class ScalarKernelParams:
    """Squared-exponential kernel over control space.

    k(a, b) = signal_variance * exp(-0.5 * sum_d ((a_d - b_d)/lengthscales_d)^2)
    """

    signal_variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lengthscales",
                           np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0.0:
            raise ContractViolationError(
                f"signal_variance must be positive, got {self.signal_variance}")
        if self.lengthscales.ndim != 1 or np.any(self.lengthscales <= 0.0) \
                or not np.all(np.isfinite(self.lengthscales)):
            raise ContractViolationError("lengthscales must be a vector of positive reals")

    @property
    def n_dims(self):
        return self.lengthscales.shape[0]


@dataclass(frozen=True)
class TaskMatrixParams:
    """Task coupling matrix kappa = L L^T with L lower triangular, diag > 0."""

    chol_factor: np.ndarray

    def __post_init__(self):
        chol = np.asarray(self.chol_factor, dtype=float)
        if chol.ndim != 2 or chol.shape[0] != chol.shape[1]:
            raise ContractViolationError("chol_factor must be a square matrix")
        if not np.allclose(chol, np.tril(chol)):
            raise ContractViolationError("chol_factor must be lower triangular")
        if np.any(np.diag(chol) <= 0.0) or not np.all(np.isfinite(chol)):
            raise ContractViolationError("chol_factor needs a strictly positive diagonal")
        object.__setattr__(self, "chol_factor", np.tril(chol))

    @property
    def n_tasks(self):
        return self.chol_factor.shape[0]

    def matrix(self):
        return self.chol_factor @ self.chol_factor.T


@dataclass(frozen=True)
class KernelModel:
    """Constant per-task means plus a sum of separable covariance components."""

    task_means: np.ndarray
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "task_means",
                           np.atleast_1d(np.asarray(self.task_means, dtype=float)))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 1:
            raise ContractViolationError("a kernel model needs at least one component")
        e = self.task_means.shape[0]
        d = self.components[0][0].n_dims
        for scalar, task in self.components:
            if scalar.n_dims != d:
                raise DimensionMismatchError("components disagree on control dimension")
            if task.n_tasks != e:
                raise DimensionMismatchError("components disagree on task dimension")

    @property
    def n_tasks(self):
        return self.task_means.shape[0]

    @property
    def n_dims(self):
        return self.components[0][0].n_dims

    @property
    def n_components(self):
        return len(self.components)

    def task_matrices(self):
        return [task.matrix() for _, task in self.components]

    def self_block(self):
        """C(x, x): sum over components of signal_variance * kappa."""
        e = self.n_tasks
        out = np.zeros((e, e))
        for scalar, task in self.components:
            out += scalar.signal_variance * task.matrix()
        return out

    def with_component(self, scalar, task):
        return KernelModel(self.task_means, self.components + ((scalar, task),))


def eval_scalar_kernel(a, b, params):
    """Squared-exponential kernel value between two control points."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.shape[0] != params.n_dims:
        raise DimensionMismatchError(
            f"kernel arguments must both have dimension {params.n_dims}, "
            f"got {a.shape} and {b.shape}")
    z = (a - b) / params.lengthscales
    return float(params.signal_variance * np.exp(-0.5 * np.dot(z, z)))


def scalar_kernel_matrix(points_a, points_b, params):
    """Kernel matrix k(A, B) of shape (len(A), len(B))."""
    a = np.asarray(points_a, dtype=float).reshape(-1, params.n_dims)
    b = np.asarray(points_b, dtype=float).reshape(-1, params.n_dims)
    sa = a / params.lengthscales
    sb = b / params.lengthscales
    sq = (np.sum(sa * sa, axis=1)[:, None] + np.sum(sb * sb, axis=1)[None, :]
          - 2.0 * sa @ sb.T)
    np.clip(sq, 0.0, None, out=sq)
    return params.signal_variance * np.exp(-0.5 * sq)


def kron_block(scalar_matrix, task_matrix):
    """Expand an (n, m) scalar matrix into the (n*E, m*E) blocked form."""
    n, m = scalar_matrix.shape
    e = task_matrix.shape[0]
    out = np.einsum("ab,ij->aibj", scalar_matrix, task_matrix)
    return out.reshape(n * e, m * e)


def assemble_cross_cov(points_a, points_b, model):
    """Blocked cross-covariance between two point lists.

    Block (a, b) equals sum_l k_l(x_a, x_b) * kappa_l. With identical
    argument lists the result is symmetric PSD up to roundoff.
    """
    d = model.n_dims
    a = np.asarray(points_a, dtype=float).reshape(-1, d)
    b = np.asarray(points_b, dtype=float).reshape(-1, d)
    e = model.n_tasks
    out = np.zeros((a.shape[0] * e, b.shape[0] * e))
    for scalar, task in model.components:
        out += kron_block(scalar_kernel_matrix(a, b, scalar), task.matrix())
    return out


def stack_means(model, n_points):
    """Mean vector of the stacked observation layout for n_points points."""
    return np.tile(model.task_means, n_points)


# ---------------------------------------------------------------------------
# Flat hyperparameter vector <-> model
#
# Layout: [task_means (E)] then per component
#   [log signal_variance (1), log lengthscales (D),
#    lower-triangle of L row-major (E*(E+1)/2) with log-diagonal].
# ---------------------------------------------------------------------------


def _tril_indices(e):
    return [(i, j) for i in range(e) for j in range(i + 1)]


def n_hyperparams(n_tasks, n_dims, n_components):
    per_comp = 1 + n_dims + n_tasks * (n_tasks + 1) // 2
    return n_tasks + n_components * per_comp


def model_to_vector(model):
    e = model.n_tasks
    parts = [model.task_means]
    for scalar, task in model.components:
        chol = task.chol_factor
        tri = np.array([np.log(chol[i, j]) if i == j else chol[i, j]
                        for i, j in _tril_indices(e)])
        parts.append(np.concatenate([[np.log(scalar.signal_variance)],
                                     np.log(scalar.lengthscales), tri]))
    return np.concatenate(parts)


def vector_to_model(vec, n_tasks, n_dims, n_components):
    vec = np.asarray(vec, dtype=float)
    expected = n_hyperparams(n_tasks, n_dims, n_components)
    if vec.shape != (expected,):
        raise DimensionMismatchError(
            f"hyperparameter vector must have length {expected}, got {vec.shape}")
    means = vec[:n_tasks].copy()
    pos = n_tasks
    comps = []
    n_tri = n_tasks * (n_tasks + 1) // 2
    for _ in range(n_components):
        sv = float(np.exp(vec[pos]))
        pos += 1
        ls = np.exp(vec[pos:pos + n_dims])
        pos += n_dims
        chol = np.zeros((n_tasks, n_tasks))
        for (i, j), val in zip(_tril_indices(n_tasks), vec[pos:pos + n_tri]):
            chol[i, j] = np.exp(val) if i == j else val
        pos += n_tri
        comps.append((ScalarKernelParams(sv, ls), TaskMatrixParams(chol)))
    return KernelModel(means, tuple(comps))
