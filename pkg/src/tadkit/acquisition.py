"""Batch-design acquisition: expected log-predictive likelihood of a target.

The acquisition scores a candidate target point x together with a batch of
not-yet-measured settings by the expectation, over the data the batch would
produce, of the log-likelihood that the latent response at x equals the
target design. That expectation has a closed form with three pieces:

    total = -0.5 log det M                  (log-determinant term)
            -0.5 r^T M^{-1} r               (data-fit term, r = target - mean)
            -0.5 trace(T M^{-1})            (latent-batch broadening, <= 0)

where  T = U Q21^{-1} U^T  is the batch correction,  M = Q1 - T  is the
updated predictive covariance at x, Q1 the current predictive covariance,
Q21 the batch's own predictive covariance, and U the coupling between the
response at x and the batch observations after conditioning on the data.

The expected information gain of the batch about the response at x is
    -0.5 log det(I - T Q1^{-1})  =  0.5 [log det Q1 - log det M],
nonnegative, and zero exactly when the batch carries no new information.

Gradients with respect to x and every batch coordinate are assembled
analytically by pairing adjoint matrices with derivatives of the kernel
blocks; only the E x E and batch-sized systems are ever factorized per
evaluation, and the training factorization is shared across evaluations.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DimensionMismatchError
from .gp import prediction_update, predictive_given_1
from .kernels import assemble_cross_cov, scalar_kernel_matrix, stack_means
from .linalg import chol_inverse, chol_logdet, chol_pd, chol_solve


@dataclass(frozen=True)
class AcquisitionInputs:
    """Everything the acquisition needs besides the geometry being scored."""

    model: object
    data: object
    batch_points: np.ndarray     # (N2, D); N2 may be zero
    target_point: np.ndarray     # (D,)
    target_design: np.ndarray    # (E,)
    batch_noise: np.ndarray      # (E,) variance per task, every batch point

    def __post_init__(self):
        object.__setattr__(self, "batch_points",
                           np.asarray(self.batch_points, dtype=float).reshape(-1, self.model.n_dims))
        object.__setattr__(self, "target_point",
                           np.atleast_1d(np.asarray(self.target_point, dtype=float)))
        object.__setattr__(self, "target_design",
                           np.atleast_1d(np.asarray(self.target_design, dtype=float)))
        object.__setattr__(self, "batch_noise",
                           np.atleast_1d(np.asarray(self.batch_noise, dtype=float)))
        if self.target_point.shape[0] != self.model.n_dims:
            raise DimensionMismatchError("target point dimension mismatch")
        if self.target_design.shape[0] != self.model.n_tasks:
            raise DimensionMismatchError("target design must have one entry per task")
        if self.batch_noise.shape[0] != self.model.n_tasks:
            raise DimensionMismatchError("batch noise must have one variance per task")


@dataclass(frozen=True)
class AcquisitionBreakdown:
    """Acquisition value split into its three closed-form terms."""

    log_det_term: float
    data_fit_term: float
    trace_term: float
    total: float
    correction: np.ndarray       # T, (E, E)
    cov_current: np.ndarray      # predictive covariance at x given data
    cov_updated: np.ndarray      # same after folding in the batch
    eig_nats: float


class AcquisitionContext:
    """Shared training-side factorization for repeated evaluations.

    The training covariance factorization, the de-meaned observation solve
    and per-component kernel parameters do not change while a single
    optimization varies (x, batch); build one context per (model, data).
    """

    def __init__(self, model, data, target_design, batch_noise):
        self.model = model
        self.data = data
        self.target_design = np.atleast_1d(np.asarray(target_design, dtype=float))
        self.batch_noise = np.atleast_1d(np.asarray(batch_noise, dtype=float))
        self.n_tasks = model.n_tasks
        self.n_dims = model.n_dims
        self.n_train = data.n_points
        self.kxx = model.self_block()
        if self.n_train > 0:
            gram = assemble_cross_cov(data.points, data.points, model)
            gram += np.diag(data.noise_variances)
            self.chol_train = chol_pd(gram, label="training covariance")
            resid = data.observations - stack_means(model, self.n_train)
            self.alpha = chol_solve(self.chol_train, resid)
        else:
            self.chol_train = np.zeros((0, 0))
            self.alpha = np.zeros(0)

    # -- evaluation ---------------------------------------------------------

    def workspace(self, x, batch):
        return _Workspace(self, x, batch)

    def breakdown(self, x, batch):
        return self.workspace(x, batch).breakdown()

    def value_and_gradient(self, x, batch):
        ws = self.workspace(x, batch)
        bd = ws.breakdown()
        return bd, ws.acquisition_gradient()

    def eig(self, x, batch):
        return self.workspace(x, batch).eig_compact()

    def eig_and_gradient(self, x, batch):
        ws = self.workspace(x, batch)
        return ws.eig_compact(), ws.eig_gradient()


class _Workspace:
    """All intermediates for one (x, batch) evaluation."""

    def __init__(self, ctx, x, batch):
        self.ctx = ctx
        model = ctx.model
        e = ctx.n_tasks
        d = ctx.n_dims
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self.batch = np.asarray(batch, dtype=float).reshape(-1, d)
        n2 = self.batch.shape[0]
        self.n2 = n2
        pts = ctx.data.points

        # Per-component scalar kernel pieces.
        self.scalars = []
        for scalar, task in model.components:
            self.scalars.append({
                "params": scalar,
                "kappa": task.matrix(),
                "to_data": scalar_kernel_matrix(self.x, pts, scalar)[0],        # (N1,)
                "to_batch": scalar_kernel_matrix(self.x, self.batch, scalar)[0],  # (N2,)
                "data_batch": scalar_kernel_matrix(pts, self.batch, scalar),    # (N1, N2)
                "batch_batch": scalar_kernel_matrix(self.batch, self.batch, scalar),
            })

        def blocked_row(key, count):
            out = np.zeros((e, count * e))
            for comp in self.scalars:
                out += np.einsum("a,ij->iaj", comp[key], comp["kappa"]).reshape(e, -1)
            return out

        def blocked(key, rows, cols):
            out = np.zeros((rows * e, cols * e))
            for comp in self.scalars:
                out += np.einsum("ab,ij->aibj", comp[key], comp["kappa"]).reshape(rows * e, cols * e)
            return out

        n1 = ctx.n_train
        self.k_x1 = blocked_row("to_data", n1)            # (E, n1*E)
        self.k_x2 = blocked_row("to_batch", n2)           # (E, n2*E)
        self.k_12 = blocked("data_batch", n1, n2)         # (n1*E, n2*E)
        self.k_22 = blocked("batch_batch", n2, n2)

        if n1 > 0:
            self.v1 = chol_solve(ctx.chol_train, self.k_x1.T)   # (n1E, E)
            self.v2 = chol_solve(ctx.chol_train, self.k_12)     # (n1E, n2E)
            self.mean_current = model.task_means + self.k_x1 @ ctx.alpha
            self.cov_current = ctx.kxx - self.k_x1 @ self.v1
            mean2 = stack_means(model, n2) + self.k_12.T @ ctx.alpha
        else:
            self.v1 = np.zeros((0, e))
            self.v2 = np.zeros((0, n2 * e))
            self.mean_current = model.task_means.copy()
            self.cov_current = ctx.kxx.copy()
            mean2 = stack_means(model, n2)
        self.cov_current = 0.5 * (self.cov_current + self.cov_current.T)
        self.batch_pred_mean = mean2

        noise2 = np.tile(ctx.batch_noise, n2)
        q21 = self.k_22 + np.diag(noise2) - self.k_12.T @ self.v2
        self.q21 = 0.5 * (q21 + q21.T)
        self.coupling = self.k_x2 - self.k_x1 @ self.v2     # U, (E, n2E)

        if n2 > 0:
            self.chol_q21 = chol_pd(self.q21, label="batch predictive covariance")
            self.gain = chol_solve(self.chol_q21, self.coupling.T)  # (n2E, E)
            corr = self.coupling @ self.gain
            self.correction = 0.5 * (corr + corr.T)
        else:
            self.chol_q21 = np.zeros((0, 0))
            self.gain = np.zeros((0, e))
            self.correction = np.zeros((e, e))

        self.cov_updated = self.cov_current - self.correction
        self.chol_updated = chol_pd(self.cov_updated, label="updated predictive covariance")
        self.residual = ctx.target_design - self.mean_current
        self.whitened = chol_solve(self.chol_updated, self.residual)

        self._breakdown = None

    # -- values -------------------------------------------------------------

    def breakdown(self):
        if self._breakdown is not None:
            return self._breakdown
        logdet = chol_logdet(self.chol_updated)
        updated_inv = chol_inverse(self.chol_updated)
        log_det_term = -0.5 * logdet
        data_fit_term = -0.5 * float(self.residual @ self.whitened)
        trace_term = -0.5 * float(np.sum(self.correction * updated_inv))
        self._updated_inv = updated_inv
        self._breakdown = AcquisitionBreakdown(
            log_det_term=log_det_term,
            data_fit_term=data_fit_term,
            trace_term=trace_term,
            total=log_det_term + data_fit_term + trace_term,
            correction=self.correction,
            cov_current=self.cov_current,
            cov_updated=self.cov_updated,
            eig_nats=self.eig_volume_ratio(),
        )
        return self._breakdown

    def eig_volume_ratio(self):
        """0.5 * log of the predictive covariance volume reduction."""
        chol_current = chol_pd(self.cov_current, label="current predictive covariance")
        return 0.5 * (chol_logdet(chol_current) - chol_logdet(self.chol_updated))

    def eig_compact(self):
        """-0.5 log det(I - T Q1^{-1}), the direct one-solve form."""
        if self.n2 == 0:
            return 0.0
        chol_current = chol_pd(self.cov_current, label="current predictive covariance")
        inner = np.eye(self.ctx.n_tasks) - chol_solve(chol_current, self.correction)
        sign, logdet = np.linalg.slogdet(inner)
        if sign <= 0:
            from .errors import NumericalError
            raise NumericalError("information-gain determinant is not positive",
                                 sign=sign)
        return -0.5 * float(logdet)

    # -- gradients ----------------------------------------------------------

    def _kernel_pairings(self, bar_x1, bar_x2, bar_12, bar_22):
        """Pair adjoint matrices with kernel-block derivatives.

        Returns the gradient over (x, batch) coordinates of any scalar whose
        differential is <bar_x1, dK_x1> + <bar_x2, dK_x2> + <bar_12, dK_12>
        + <bar_22, dK_22>, exploiting that a squared-exponential kernel's
        coordinate derivative is the kernel value times a scaled difference.
        """
        ctx = self.ctx
        e = ctx.n_tasks
        d = ctx.n_dims
        n1 = ctx.n_train
        n2 = self.n2
        pts = ctx.data.points
        grad_x = np.zeros(d)
        grad_batch = np.zeros((n2, d))

        b1 = bar_x1.reshape(e, n1, e) if n1 else None
        b2 = bar_x2.reshape(e, n2, e) if n2 else None
        b12 = bar_12.reshape(n1, e, n2, e) if (n1 and n2) else None
        b22 = bar_22.reshape(n2, e, n2, e) if n2 else None

        for comp in self.scalars:
            kappa = comp["kappa"]
            inv_sq = 1.0 / comp["params"].lengthscales ** 2
            if n1:
                c1 = np.einsum("iaj,ij->a", b1, kappa)            # (N1,)
                w1 = (self.x[None, :] - pts) * inv_sq             # (N1, D)
                grad_x -= np.einsum("ad,a,a->d", w1, comp["to_data"], c1)
            if n2:
                c2 = np.einsum("iaj,ij->a", b2, kappa)            # (N2,)
                w2 = (self.x[None, :] - self.batch) * inv_sq      # (N2, D)
                grad_x -= np.einsum("md,m,m->d", w2, comp["to_batch"], c2)
                grad_batch += np.einsum("md,m,m->md", w2, comp["to_batch"], c2)
                c22 = np.einsum("jimk,ik->jm", b22, kappa)        # (N2, N2)
                w22 = (self.batch[:, None, :] - self.batch[None, :, :]) * inv_sq
                grad_batch += 2.0 * np.einsum("jmd,jm,jm->md", w22,
                                              comp["batch_batch"], c22)
                if n1:
                    c12 = np.einsum("aibj,ij->ab", b12, kappa)    # (N1, N2)
                    w12 = (pts[:, None, :] - self.batch[None, :, :]) * inv_sq
                    grad_batch += np.einsum("amd,am,am->md", w12,
                                            comp["data_batch"], c12)
        return np.concatenate([grad_x, grad_batch.reshape(-1)])

    def _adjoints(self, phi, psi, include_residual):
        """Adjoint kernel-block matrices for d = tr(phi dQ1) - tr(psi dT) - w^T dr."""
        e = self.ctx.n_tasks
        n1e = self.ctx.n_train * e
        n2e = self.n2 * e
        psi_gain = psi @ self.gain.T if self.n2 else np.zeros((e, 0))   # (E, n2E)
        omega = self.gain @ psi_gain if self.n2 else np.zeros((0, 0))   # (n2E, n2E)

        bar_x1 = -2.0 * phi @ self.v1.T
        if self.n2 and n1e:
            bar_x1 += 2.0 * psi_gain @ self.v2.T
        if include_residual and n1e:
            bar_x1 += np.outer(self.whitened, self.ctx.alpha)
        bar_x2 = -2.0 * psi_gain
        if n1e and n2e:
            bar_12 = 2.0 * self.v1 @ psi_gain - 2.0 * self.v2 @ omega
        else:
            bar_12 = np.zeros((n1e, n2e))
        return bar_x1, bar_x2, bar_12, omega

    def acquisition_gradient(self):
        """Gradient of the acquisition total over (x, batch) coordinates."""
        bd = self.breakdown()
        inv_updated = self._updated_inv
        w = self.whitened
        spread = inv_updated @ self.correction @ inv_updated
        psi = 0.5 * (np.outer(w, w) + spread)
        phi = psi - 0.5 * inv_updated
        bar_x1, bar_x2, bar_12, bar_22 = self._adjoints(phi, psi, include_residual=True)
        return self._kernel_pairings(bar_x1, bar_x2, bar_12, bar_22)

    def eig_gradient(self):
        """Gradient of the information gain over (x, batch) coordinates."""
        if self.n2 == 0:
            return np.zeros(self.ctx.n_dims + 0)
        chol_current = chol_pd(self.cov_current, label="current predictive covariance")
        inv_current = chol_inverse(chol_current)
        inv_updated = chol_inverse(self.chol_updated)
        phi = 0.5 * (inv_current - inv_updated)
        psi = -0.5 * inv_updated
        bar_x1, bar_x2, bar_12, bar_22 = self._adjoints(phi, psi, include_residual=False)
        return self._kernel_pairings(bar_x1, bar_x2, bar_12, bar_22)


# ---------------------------------------------------------------------------
# Stateless operation wrappers
# ---------------------------------------------------------------------------


def _context(inputs):
    return AcquisitionContext(inputs.model, inputs.data,
                              inputs.target_design, inputs.batch_noise)


def correction_term(inputs):
    """Batch information correction T; symmetric PSD, zero for an empty batch."""
    ws = _context(inputs).workspace(inputs.target_point, inputs.batch_points)
    return ws.correction


def tad_acquisition(inputs):
    """Closed-form expected log-predictive likelihood of the target design."""
    return _context(inputs).breakdown(inputs.target_point, inputs.batch_points)


def tad_acquisition_with_gradient(inputs):
    """Breakdown plus gradient over (x, batch) coordinates, x first."""
    return _context(inputs).value_and_gradient(inputs.target_point, inputs.batch_points)


def expected_information_gain(inputs):
    """Expected information (nats) the batch carries about the response at x."""
    return _context(inputs).eig(inputs.target_point, inputs.batch_points)


def expected_information_gain_with_gradient(inputs):
    return _context(inputs).eig_and_gradient(inputs.target_point, inputs.batch_points)


def predictive_log_likelihood(model, data, batch_points, batch_obs, x, target_design,
                              batch_noise):
    """Log-likelihood of the target design at x after folding in batch data.

    The additive -E/2 log 2pi constant is omitted, consistently with the
    acquisition terms, so expectation checks compare like with like.
    """
    pred1 = predictive_given_1(model, data, x)
    updated = prediction_update(pred1, model, data, x, batch_points, batch_obs,
                                batch_noise)
    chol = chol_pd(updated.cov, label="updated predictive covariance")
    resid = np.atleast_1d(np.asarray(target_design, dtype=float)) - updated.mean
    return float(-0.5 * chol_logdet(chol) - 0.5 * resid @ chol_solve(chol, resid))


def domain_penalty(x, batch_points, domain, strength):
    """Soft keep-in-domain penalty: zero inside, -strength * squared excursion.

    ``domain`` is any object with ``lower`` and ``upper`` arrays. The value
    is continuously differentiable and strictly negative as soon as any
    coordinate of x or the batch leaves the box.
    """
    value, _ = domain_penalty_with_gradient(x, batch_points, domain, strength)
    return value


def domain_penalty_with_gradient(x, batch_points, domain, strength):
    if strength <= 0:
        raise ContractViolationError("penalty strength must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    batch = np.asarray(batch_points, dtype=float).reshape(-1, x.shape[0])
    pts = np.vstack([x[None, :], batch])
    below = np.maximum(domain.lower[None, :] - pts, 0.0)
    above = np.maximum(pts - domain.upper[None, :], 0.0)
    value = -strength * float(np.sum(below ** 2) + np.sum(above ** 2))
    grad = -strength * (2.0 * above - 2.0 * below)
    return value, grad.reshape(-1)
