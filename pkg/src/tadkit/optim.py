"""Quasi-Newton maximizers for the model fit and the design acquisition.

A dense-inverse BFGS iteration with backtracking line search drives both
problems. Objective evaluations that fail a factorization are treated as
minus infinity, so the line search backs off automatically when a proposed
step makes the batch geometry numerically degenerate. Restarts perturb the
initializer only; the best value over all starts wins, which guarantees
the returned value never falls below the value at the supplied start.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionContext, domain_penalty_with_gradient
from .errors import ContractViolationError, NumericalError, OptimizationError
from .kernels import model_to_vector, vector_to_model
from .gp import marginal_log_likelihood_and_gradient
from .validation import chi2_right_tail

logger = logging.getLogger(__name__)

_ARMIJO_C1 = 1e-4
_MAX_BACKTRACKS = 50
_CURVATURE_FLOOR = 1e-12
# Restart initializers perturb coordinates by this fraction of the domain width.
TAD_RESTART_SCALE = 0.15
# Hyperparameter restarts perturb the log-parameters by this much.
GP_RESTART_SCALE = 0.4
# Hyperparameter vectors with any entry beyond this magnitude are rejected:
# the likelihood is near-flat out there but the kernels they describe are
# numerically degenerate (lengthscales ~e^12, task variances ~e^-24).
GP_LOG_BOUND = 12.0


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    step_tol: float = 1e-9
    restarts: int = 4
    early_stop_p_band: tuple = (0.01, 0.99)

    def __post_init__(self):
        if self.max_iters < 1 or self.grad_tol <= 0 or self.step_tol <= 0:
            raise ContractViolationError("optimizer tolerances must be positive")
        if self.restarts < 0:
            raise ContractViolationError("restarts must be nonnegative")
        lo, hi = self.early_stop_p_band
        if not (0.0 <= lo <= hi <= 1.0):
            raise ContractViolationError("early-stop band must sit inside [0, 1]")


@dataclass
class OptResult:
    argmax: np.ndarray
    value: float
    converged: bool
    iters: int
    restarts_used: int
    evaluations: int = field(default=0)


def _maximize_bfgs(fun_grad, x0, cfg, early_stop=None):
    """Maximize fun via BFGS; fun_grad returns (value, gradient).

    Returns (x, value, gradient, converged, iters, n_evals). Raises
    NumericalError if the start itself cannot be evaluated.
    """
    x = np.asarray(x0, dtype=float).copy()
    value, grad = fun_grad(x)
    if not np.isfinite(value):
        raise NumericalError("objective not finite at the start point")
    n = x.size
    n_evals = 1
    if float(np.max(np.abs(grad))) < cfg.grad_tol:
        return x, value, grad, True, 0, n_evals
    if early_stop is not None and early_stop(x, value, grad):
        return x, value, grad, True, 0, n_evals

    # None means "take a normalized steepest-ascent step"; the curvature of
    # the first accepted step then seeds the inverse-Hessian scale.
    hess_inv = None
    converged = False
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        if hess_inv is not None:
            direction = hess_inv @ grad
            slope = float(direction @ grad)
            if slope <= 0.0 or not np.isfinite(slope):
                hess_inv = None
        if hess_inv is None:
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= 0.0:
                converged = True
                break
            direction = grad / gnorm
            slope = gnorm
        step = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            trial = x + step * direction
            try:
                with np.errstate(over="ignore", invalid="ignore", under="ignore"):
                    trial_value, trial_grad = fun_grad(trial)
                n_evals += 1
                ok = np.isfinite(trial_value) and np.all(np.isfinite(trial_grad))
            except (NumericalError, ContractViolationError, FloatingPointError):
                ok = False
            if ok and trial_value >= value + _ARMIJO_C1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s = step * direction
        y = trial_grad - grad
        x, value, grad = trial, trial_value, trial_grad
        if float(np.max(np.abs(grad))) < cfg.grad_tol:
            converged = True
            break
        if float(np.linalg.norm(s)) < cfg.step_tol * (1.0 + float(np.linalg.norm(x))):
            converged = True
            break
        if early_stop is not None and early_stop(x, value, grad):
            converged = True
            break
        # Inverse-Hessian update in minimization convention (phi = -f).
        ys = float(-(y @ s))
        if ys > _CURVATURE_FLOOR * float(np.linalg.norm(y)) * float(np.linalg.norm(s)):
            if hess_inv is None:
                hess_inv = (ys / float(y @ y)) * np.eye(n)
            rho = 1.0 / ys
            sy = np.outer(s, -y)
            hess_inv = (np.eye(n) - rho * sy) @ hess_inv @ (np.eye(n) - rho * sy.T)
            hess_inv += rho * np.outer(s, s)
    return x, value, grad, converged, iters, n_evals


def _multistart(fun_grad, starts, cfg, early_stop=None):
    best = None
    failures = []
    total_evals = 0
    for idx, start in enumerate(starts):
        try:
            x, value, grad, conv, iters, n_evals = _maximize_bfgs(
                fun_grad, start, cfg, early_stop=early_stop)
        except (NumericalError, ContractViolationError) as exc:
            failures.append(f"start {idx}: {exc}")
            continue
        total_evals += n_evals
        logger.debug("optimizer restart done",
                     extra={"restart": idx, "value": value,
                            "iters": iters, "converged": conv})
        if best is None or value > best[1]:
            best = (x, value, conv, iters, idx)
    if best is None:
        raise OptimizationError("every optimizer start failed a factorization",
                                failures=failures)
    x, value, conv, iters, idx = best
    return OptResult(argmax=x, value=value, converged=conv, iters=iters,
                     restarts_used=len(starts) - 1, evaluations=total_evals), idx


def maximize_gp_hyperparams(data, init, cfg, rng=None):
    """Fit kernel hyperparameters by maximizing the marginal log-likelihood.

    Optimization runs in the unconstrained log/Cholesky parameterization.
    Stops early once the training-fit P-value sits inside the configured
    band while the gradient is already small. Monotone by construction:
    the initializer is one of the evaluated starts.
    """
    if data.n_points == 0:
        raise ContractViolationError("cannot fit hyperparameters to an empty dataset")
    if rng is None:
        rng = np.random.default_rng(0)
    e, d, p = init.n_tasks, init.n_dims, init.n_components
    dof = max(data.observations.size - e, 1)

    def fun_grad(vec):
        if float(np.max(np.abs(vec))) > GP_LOG_BOUND:
            raise NumericalError("hyperparameters left the numeric trust region")
        model = vector_to_model(vec, e, d, p)
        value, grad, quad = marginal_log_likelihood_and_gradient(model, data)
        fun_grad.last_quad = quad
        return value, grad

    lo, hi = cfg.early_stop_p_band

    def early_stop(vec, value, grad):
        p_val = chi2_right_tail(max(fun_grad.last_quad, 0.0), dof)
        return (lo <= p_val <= hi
                and float(np.max(np.abs(grad))) < 10.0 * cfg.grad_tol)

    vec0 = model_to_vector(init)
    starts = [vec0]
    for _ in range(cfg.restarts):
        starts.append(vec0 + GP_RESTART_SCALE * rng.standard_normal(vec0.size))
    result, _ = _multistart(fun_grad, starts, cfg, early_stop=early_stop)
    return vector_to_model(result.argmax, e, d, p), result


def maximize_tad(model, data, target_design, batch_noise, domain, penalty_strength,
                 x_init, batch_init, cfg, rng=None):
    """Jointly optimize the target point and the batch settings.

    The objective is the acquisition total plus the keep-in-domain penalty
    over all (1 + N2) * D coordinates. A step that makes the updated
    predictive covariance indefinite simply fails its factorization and is
    halved away by the line search.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x_init = np.atleast_1d(np.asarray(x_init, dtype=float))
    batch_init = np.asarray(batch_init, dtype=float).reshape(-1, x_init.shape[0])
    d = x_init.shape[0]
    n2 = batch_init.shape[0]
    ctx = AcquisitionContext(model, data, target_design, batch_noise)

    def fun_grad(z):
        x = z[:d]
        batch = z[d:].reshape(n2, d)
        breakdown, grad = ctx.value_and_gradient(x, batch)
        pen, pen_grad = domain_penalty_with_gradient(x, batch, domain, penalty_strength)
        fun_grad.last_breakdown = breakdown
        return breakdown.total + pen, grad + pen_grad

    z0 = np.concatenate([x_init, batch_init.reshape(-1)])
    widths = np.asarray(domain.upper, dtype=float) - np.asarray(domain.lower, dtype=float)
    scale = TAD_RESTART_SCALE * np.tile(widths, 1 + n2)
    starts = [z0]
    for _ in range(cfg.restarts):
        starts.append(z0 + scale * rng.standard_normal(z0.size))
    result, _ = _multistart(fun_grad, starts, cfg)
    z = result.argmax
    x_best = z[:d]
    batch_best = z[d:].reshape(n2, d)
    breakdown = ctx.breakdown(x_best, batch_best)
    return x_best, batch_best, breakdown, result


def gradient_check(objective, point, step_scale=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``objective(point)`` must return ``(value, gradient)``. The relative
    error normalizes against the numeric gradient, so a gradient that is
    wrong by a factor c reports an error near |c - 1|.
    """
    point = np.asarray(point, dtype=float)
    value, grad = objective(point)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise ContractViolationError("objective must be finite at the check point")
    numeric = np.zeros_like(point)
    for i in range(point.size):
        h = step_scale * (1.0 + abs(point[i]))
        plus = point.copy()
        plus[i] += h
        minus = point.copy()
        minus[i] -= h
        v_plus, _ = objective(plus)
        v_minus, _ = objective(minus)
        if not (np.isfinite(v_plus) and np.isfinite(v_minus)):
            raise ContractViolationError("objective not finite at perturbed points")
        numeric[i] = (v_plus - v_minus) / (2.0 * h)
    floor = 1e-8 * (1.0 + float(np.max(np.abs(numeric))))
    rel = np.abs(grad - numeric) / np.maximum(np.abs(numeric), floor)
    return float(np.max(rel))
