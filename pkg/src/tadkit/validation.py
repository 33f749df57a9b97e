"""Frequentist adequacy checks for the surrogate model.

A batch of new observations has a known multivariate-normal predictive
distribution before it is measured, so the whitened squared residual of
the measured values is a chi-squared variable with one degree of freedom
per predicted number. Tiny right-tail P-values therefore flag model
inadequacy. The analogous quadratic form over the training data is only a
heuristic sanity check (its residuals were used to fit the model), but it
makes a useful early-stopping signal for hyperparameter optimization.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .gp import training_quadratic_form
from .linalg import chol_pd, chol_solve

_GAMMA_MAX_ITERS = 500
_GAMMA_EPS = 1e-15


def _lower_regularized_series(a, x):
    """P(a, x) by power series; converges fast for x < a + 1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_GAMMA_MAX_ITERS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_regularized_cf(a, x):
    """Q(a, x) by modified Lentz continued fraction; best for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, _GAMMA_MAX_ITERS + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_upper_gamma(a, x):
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ContractViolationError(f"shape parameter must be positive, got {a}")
    if x < 0.0:
        raise ContractViolationError(f"argument must be nonnegative, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_regularized_series(a, x)))
    return min(1.0, max(0.0, _upper_regularized_cf(a, x)))


def chi2_right_tail(q, dof):
    """Right-tail probability of a chi-squared variable with ``dof`` d.o.f."""
    if q < 0.0:
        raise ContractViolationError(f"chi-squared statistic must be >= 0, got {q}")
    if dof < 1:
        raise ContractViolationError(f"degrees of freedom must be >= 1, got {dof}")
    return regularized_upper_gamma(0.5 * dof, 0.5 * q)


@dataclass(frozen=True)
class ValidationReport:
    statistic: float
    dof: int
    p_value: float
    kind: str  # "batch_Q" or "training_S"

    def to_dict(self):
        return {"statistic": self.statistic, "dof": self.dof,
                "p_value": self.p_value, "kind": self.kind}


def batch_validation(pred, observed):
    """Chi-squared test of freshly measured batch data against its prediction.

    ``pred`` is the batch predictive distribution computed before the data
    was acquired; ``observed`` the stacked measured values.
    """
    observed = np.asarray(observed, dtype=float).reshape(-1)
    if observed.shape[0] != pred.dim:
        raise ContractViolationError(
            f"observed vector has length {observed.shape[0]}, prediction has "
            f"dimension {pred.dim}")
    resid = observed - pred.mean
    chol = chol_pd(pred.cov, label="batch predictive covariance")
    stat = float(resid @ chol_solve(chol, resid))
    dof = observed.shape[0]
    return ValidationReport(stat, dof, chi2_right_tail(stat, dof), "batch_Q")


def training_fit(model, data):
    """Sanity check of the training-data quadratic form; not a formal test."""
    stat = training_quadratic_form(model, data)
    dof = max(data.observations.size - model.n_tasks, 1)
    return ValidationReport(stat, dof, chi2_right_tail(stat, dof), "training_S")
