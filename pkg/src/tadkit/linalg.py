"""Positive-definite solves with escalating diagonal jitter.

Near-duplicate sample points make self-covariance matrices numerically
singular even though the underlying predictive quantities stay finite, so
every factorization here retries with a diagonal shift that escalates from
1e-8 to 1e-4 of the mean diagonal before giving up.
"""

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError

# Relative jitter ladder applied to the mean diagonal of a self-Gram.
JITTER_START = 1e-8
JITTER_MAX = 1e-4


def chol_pd(mat, label="matrix"):
    """Lower Cholesky factor of a symmetric PSD matrix, with jitter retries.

    The first attempt is jitter-free so that well-conditioned inputs
    factor exactly; only on failure does the ladder kick in. Raises
    NumericalError once the shift exceeds JITTER_MAX * mean(diag).
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise NumericalError(f"{label} is not square", shape=mat.shape)
    if n == 0:
        return np.zeros((0, 0))
    sym = 0.5 * (mat + mat.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        pass
    diag_scale = float(np.mean(np.diag(sym)))
    if not np.isfinite(diag_scale) or diag_scale <= 0.0:
        raise NumericalError(
            f"{label} has non-positive mean diagonal; cannot factor",
            label=label, shape=mat.shape, mean_diag=diag_scale,
        )
    rel = JITTER_START
    tried = []
    while rel <= JITTER_MAX * (1 + 1e-12):
        jitter = rel * diag_scale
        tried.append(jitter)
        try:
            return np.linalg.cholesky(sym + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise NumericalError(
        f"{label} is not positive definite after jitter escalation",
        label=label, shape=mat.shape, jitters=tried, mean_diag=diag_scale,
    )


def chol_solve(chol_lower, rhs):
    """Solve A x = rhs given the lower Cholesky factor of A."""
    if chol_lower.shape[0] == 0:
        rhs = np.asarray(rhs, dtype=float)
        return np.zeros_like(rhs)
    return sla.cho_solve((chol_lower, True), rhs, check_finite=False)


def chol_logdet(chol_lower):
    """log det A from its lower Cholesky factor."""
    if chol_lower.shape[0] == 0:
        return 0.0
    return 2.0 * float(np.sum(np.log(np.diag(chol_lower))))


def chol_inverse(chol_lower):
    """Dense inverse of A from its lower Cholesky factor."""
    n = chol_lower.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    inv = chol_solve(chol_lower, np.eye(n))
    return 0.5 * (inv + inv.T)


def solve_pd(mat, rhs, label="matrix"):
    """One-shot positive-definite solve with the jitter policy."""
    return chol_solve(chol_pd(mat, label=label), rhs)
