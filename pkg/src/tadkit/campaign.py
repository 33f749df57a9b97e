"""Campaign state machine for adaptive targeted sampling.

One campaign iterates: refit the surrogate, jointly optimize the candidate
target point and the next sample batch, validate the freshly measured
batch against its prediction, then either check convergence and absorb the
data (validation passed), retry from a perturbed initialization (first
failure), or grow the covariance model by one component and restart from
the pre-optimization geometry (second consecutive failure).

Convergence is declared as success when the uncertainty box at the target
point fits inside the tolerance box, and as failure when the expected
information gain of the proposed batch stays below a threshold for more
than a configured number of consecutive checked iterations.

Interactive campaigns split each step into ``propose`` (optimize, publish
the pending batch) and ``ingest`` (consume externally measured values);
``step`` fuses the two through a simulated oracle.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .acquisition import AcquisitionInputs, domain_penalty, expected_information_gain, \
    tad_acquisition
from .errors import (AwaitingObservationsError, CampaignFinishedError,
                     ContractViolationError, DimensionMismatchError,
                     NoPendingBatchError, NumericalError)
from .gp import Dataset, data_predictive, predictive_given_1
from .kernels import KernelModel, ScalarKernelParams, TaskMatrixParams
from .optim import maximize_gp_hyperparams, maximize_tad
from .validation import batch_validation

logger = logging.getLogger(__name__)

OUTCOME_RUNNING = "running"
OUTCOME_SUCCESS = "success"
OUTCOME_FAILURE = "failure"

# Batch points closer than this fraction of the widest domain side to an
# already-sampled point get nudged before acquisition.
DUPLICATE_TOL_FRACTION = 1e-6


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in control space."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ContractViolationError("domain box must have lower < upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n_dims(self):
        return self.lower.shape[0]

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.n_dims)
        return bool(np.all(pts >= self.lower) and np.all(pts <= self.upper))

    def clip(self, points):
        return np.clip(np.asarray(points, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class ProblemSpec:
    """Search domain, target design, and per-task tolerances."""

    domain: Box
    target_design: np.ndarray
    tolerance: np.ndarray

    def __post_init__(self):
        target = np.atleast_1d(np.asarray(self.target_design, dtype=float))
        tol = np.atleast_1d(np.asarray(self.tolerance, dtype=float))
        if tol.shape != target.shape:
            raise DimensionMismatchError("tolerance must match target dimension")
        if np.any(tol <= 0.0):
            raise ContractViolationError("tolerances must be strictly positive")
        object.__setattr__(self, "target_design", target)
        object.__setattr__(self, "tolerance", tol)

    @property
    def n_tasks(self):
        return self.target_design.shape[0]

    def ttr_intervals(self):
        """Tolerance intervals [target_i - tol_i, target_i + tol_i]."""
        return np.column_stack([self.target_design - self.tolerance,
                                self.target_design + self.tolerance])


@dataclass
class ConvergenceConfig:
    """Information-decay stopping rule: threshold, patience, live counter."""

    eig_threshold: float = 1e-3
    eig_patience: int = 50
    eig_counter: int = 0

    def __post_init__(self):
        if self.eig_threshold <= 0 or self.eig_patience < 1:
            raise ContractViolationError("threshold and patience must be positive")


@dataclass(frozen=True)
class InitializationPolicy:
    """Scales for the initial batch cluster and the per-iteration jitter."""

    cluster_scale: float = 0.25
    perturb_scale: float = 0.05

    def __post_init__(self):
        if self.cluster_scale <= 0 or self.perturb_scale <= 0:
            raise ContractViolationError("initialization scales must be positive")


@dataclass(frozen=True)
class UncertaintyBox:
    """Predictive mean at a point with one half-width per design component."""

    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "half_widths",
                           np.atleast_1d(np.asarray(self.half_widths, dtype=float)))
        if np.any(self.half_widths < 0):
            raise ContractViolationError("half-widths must be nonnegative")

    def fits_within(self, intervals):
        lo = self.center - self.half_widths
        hi = self.center + self.half_widths
        return bool(np.all(lo >= intervals[:, 0]) and np.all(hi <= intervals[:, 1]))


@dataclass
class ProposedBatch:
    """Points awaiting observation, plus the context needed to ingest them.

    ``kind`` is "initial" for the start-up cluster (batch points only) or
    "iteration" for a regular step (batch points followed by the candidate
    target point).
    """

    kind: str
    batch_points: np.ndarray
    target_point: Optional[np.ndarray] = None
    prev_target: Optional[np.ndarray] = None
    prev_batch: Optional[np.ndarray] = None
    breakdown: Optional[object] = None
    eig: Optional[float] = None
    penalty: Optional[float] = None
    opt_iters: int = 0
    opt_converged: bool = False
    opt_value: float = 0.0
    refit_performed: bool = False

    def all_points(self):
        if self.kind == "initial":
            return self.batch_points
        return np.vstack([self.batch_points, self.target_point[None, :]])

    @property
    def n_rows(self):
        return self.all_points().shape[0]


@dataclass
class IterationRecord:
    """Everything logged for one completed campaign iteration."""

    iteration: int
    step_index: int
    branch: str                      # accepted | alert | complexified
    target_point: np.ndarray
    batch_points: np.ndarray
    log_det_term: float
    data_fit_term: float
    trace_term: float
    total: float
    penalty: float
    eig: float
    statistic: float
    dof: int
    p_value: float
    n_components: int
    n_check: int
    eig_counter: int
    ub_center: np.ndarray
    ub_half_widths: np.ndarray
    ub_fits: bool
    n_acquired: int
    opt_iters: int
    opt_converged: bool
    opt_value: float
    outcome_after: str


@dataclass
class SampleRecord:
    stage: str
    point: np.ndarray
    observation: np.ndarray


@dataclass
class CampaignState:
    """Mutable state of one campaign; see module docstring for semantics."""

    spec: ProblemSpec
    conv: ConvergenceConfig
    policy: InitializationPolicy
    data: Dataset
    model: KernelModel
    target_point: np.ndarray
    batch: np.ndarray
    noise_variances: np.ndarray          # per-task, applied to every new point
    n_batch: int
    validation_threshold: float
    penalty_strength: float
    gp_optimizer: object
    tad_optimizer: object
    rng: np.random.Generator
    oracle_mode: str = "simulated"
    iteration: int = 0
    step_count: int = 0
    n_check: int = 0
    check_model: bool = False
    perturb: bool = True
    outcome: str = OUTCOME_RUNNING
    pending: Optional[ProposedBatch] = None
    batch_observations: Optional[np.ndarray] = None
    history: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    @property
    def converged(self):
        return self.outcome != OUTCOME_RUNNING

    @property
    def n_components(self):
        return self.model.n_components

    def eig_history(self):
        return [rec.eig for rec in self.history]

    def p_value_history(self):
        return [rec.p_value for rec in self.history]

    def latest_ub(self):
        if not self.history:
            return None
        rec = self.history[-1]
        return UncertaintyBox(rec.ub_center, rec.ub_half_widths)


def default_model(spec, init_observation_rows, n_components=2):
    """Starting hyperparameters sized from the initial design.

    Two components at coarse and fine lengthscale fractions of the domain
    width; task variance split evenly across components. The first fit
    replaces all of this, so only the order of magnitude matters.
    """
    rows = np.asarray(init_observation_rows, dtype=float)
    e = spec.n_tasks
    means = rows.mean(axis=0)
    task_var = np.maximum(rows.var(axis=0), 1e-2 * np.ones(e))
    widths = spec.domain.widths
    comps = []
    for idx in range(n_components):
        frac = 0.5 if idx == 0 else 0.5 / (2.0 ** idx)
        ls = np.maximum(frac * widths, 1e-3)
        chol = np.diag(np.sqrt(task_var / n_components))
        comps.append((ScalarKernelParams(1.0, ls), TaskMatrixParams(chol)))
    return KernelModel(means, tuple(comps))


def complexified(model, domain_widths):
    """Model with one extra low-amplitude, finer-lengthscale component.

    Confirmed validation failures usually mean unresolved structure, so the
    new component starts at half the geometric-mean lengthscale of the
    existing ones, floored at a fraction of the domain width: repeated
    complexifications must not spiral into near-delta kernels, which
    regenerate apparent information forever and stall every stopping rule.
    """
    scale = np.mean([sc.signal_variance * np.mean(np.diag(tm.matrix()))
                     for sc, tm in model.components])
    ls = 0.5 * np.exp(np.mean([np.log(sc.lengthscales)
                               for sc, _ in model.components], axis=0))
    floor = np.asarray(domain_widths, dtype=float) / 16.0
    chol = np.sqrt(max(0.05 * scale, 1e-4)) * np.eye(model.n_tasks)
    return model.with_component(ScalarKernelParams(1.0, np.maximum(ls, floor)),
                                TaskMatrixParams(chol))


def guard_duplicates(points, existing, domain, policy, rng):
    """Nudge points that collide with already-sampled locations.

    Redundant batch points make the batch predictive covariance singular in
    the low-noise regime; that is a numerical artifact, so colliding points
    get a small Gaussian nudge (and are kept inside the domain).
    """
    tol = DUPLICATE_TOL_FRACTION * float(np.max(domain.widths))
    guarded = np.asarray(points, dtype=float).copy().reshape(-1, domain.n_dims)
    taken = np.asarray(existing, dtype=float).reshape(-1, domain.n_dims)
    for i in range(guarded.shape[0]):
        for _ in range(20):
            others = np.vstack([taken, guarded[:i]]) if i else taken
            if others.shape[0] == 0:
                break
            dist = np.linalg.norm(others - guarded[i], axis=1)
            if float(dist.min()) > tol:
                break
            guarded[i] = domain.clip(
                guarded[i] + policy.perturb_scale * rng.standard_normal(domain.n_dims))
    return guarded


def initialize_campaign(spec, conv, init_points, init_observation_rows, x0,
                        policy, n_batch, noise_variances, validation_threshold,
                        penalty_strength, gp_optimizer, tad_optimizer, rng,
                        oracle=None, oracle_mode="simulated"):
    """Set up a campaign: initial design in, first batch cluster sampled.

    The first batch is drawn around ``x0`` with the policy's cluster scale,
    clipped into the domain and de-duplicated. In simulated mode its
    observations are acquired immediately from the oracle; in interactive
    mode they become the first pending batch.
    """
    init_points = np.asarray(init_points, dtype=float).reshape(-1, spec.domain.n_dims)
    if init_points.shape[0] < 1:
        raise ContractViolationError("initial design needs at least one point")
    rows = np.asarray(init_observation_rows, dtype=float).reshape(
        init_points.shape[0], spec.n_tasks)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not spec.domain.contains(x0):
        raise ContractViolationError("starting target point must lie in the domain")

    data = Dataset.from_rows(init_points, rows, noise_variances)
    model = default_model(spec, rows)
    cluster = x0[None, :] + policy.cluster_scale * rng.standard_normal(
        (n_batch, spec.domain.n_dims))
    cluster = spec.domain.clip(cluster)
    cluster = guard_duplicates(cluster, init_points, spec.domain, policy, rng)

    state = CampaignState(
        spec=spec, conv=conv, policy=policy, data=data, model=model,
        target_point=x0.copy(), batch=cluster, noise_variances=np.asarray(
            noise_variances, dtype=float),
        n_batch=n_batch, validation_threshold=validation_threshold,
        penalty_strength=penalty_strength, gp_optimizer=gp_optimizer,
        tad_optimizer=tad_optimizer, rng=rng, oracle_mode=oracle_mode,
    )
    for point, row in zip(init_points, rows):
        state.samples.append(SampleRecord("initial_design", point.copy(), row.copy()))
    if oracle_mode == "simulated":
        if oracle is None:
            raise ContractViolationError("simulated campaigns need an oracle")
        obs = np.asarray(oracle.observe(cluster), dtype=float)
        state.batch_observations = obs
        for point, row in zip(cluster, obs):
            state.samples.append(SampleRecord("initial_batch", point.copy(), row.copy()))
    else:
        state.pending = ProposedBatch(kind="initial", batch_points=cluster)
    return state


def perturbed_init(x_prev, batch_prev, perturb, policy, rng):
    """Initializer for the joint optimization, following the restart recipe.

    When perturbing: the target starts at a small jitter of its previous
    value, the first batch point likewise, and the remaining batch points
    are drawn with the empirical scatter of the previous batch about the
    previous target (plus a ridge), which elongates the proposal cloud
    along whatever direction the target has been leading it.
    """
    x_prev = np.atleast_1d(np.asarray(x_prev, dtype=float))
    batch_prev = np.asarray(batch_prev, dtype=float).reshape(-1, x_prev.shape[0])
    if batch_prev.shape[0] == 0:
        raise ContractViolationError("perturbed_init needs a nonempty batch")
    if not perturb:
        return x_prev.copy(), batch_prev.copy()
    d = x_prev.shape[0]
    eps = policy.perturb_scale
    diffs = batch_prev - x_prev[None, :]
    scatter = diffs.T @ diffs / batch_prev.shape[0] + (eps ** 2) * np.eye(d)
    chol = np.linalg.cholesky(scatter)
    x_init = x_prev + eps * rng.standard_normal(d)
    batch_init = np.empty_like(batch_prev)
    batch_init[0] = x_prev + eps * rng.standard_normal(d)
    for i in range(1, batch_prev.shape[0]):
        batch_init[i] = x_prev + chol @ rng.standard_normal(d)
    return x_init, batch_init


def compute_ub(state, x):
    """Uncertainty box at x: current mean, half-widths from the updated
    covariance that folds in the currently proposed batch geometry."""
    pred1 = predictive_given_1(state.model, state.data, x)
    inputs = AcquisitionInputs(state.model, state.data, state.batch, x,
                               state.spec.target_design, state.noise_variances)
    breakdown = tad_acquisition(inputs)
    variances = np.clip(np.diag(breakdown.cov_updated), 0.0, None)
    return UncertaintyBox(pred1.mean, np.sqrt(variances))


def check_convergence(state, ub=None, eig=None):
    """Convergence test: box fit means success; persistent sub-threshold
    information gain (consecutive checked iterations) means failure.

    Mutates the information-decay counter exactly once per call.
    """
    if ub is None:
        ub = compute_ub(state, state.target_point)
    if eig is None:
        inputs = AcquisitionInputs(state.model, state.data, state.batch,
                                   state.target_point, state.spec.target_design,
                                   state.noise_variances)
        eig = expected_information_gain(inputs)
    success = ub.fits_within(state.spec.ttr_intervals())
    if not success:
        if eig < state.conv.eig_threshold:
            state.conv.eig_counter += 1
        else:
            state.conv.eig_counter = 0
    if success:
        return OUTCOME_SUCCESS
    if state.conv.eig_counter > state.conv.eig_patience:
        return OUTCOME_FAILURE
    return OUTCOME_RUNNING


def propose(state):
    """Phase one of a step: refit (unless re-checking), optimize, publish.

    Idempotent while a batch is pending. Returns the pending batch.
    """
    if state.converged:
        raise CampaignFinishedError(f"campaign already ended: {state.outcome}")
    if state.pending is not None:
        return state.pending

    refit = not state.check_model
    if refit:
        state.iteration += 1
        state.model, fit_result = maximize_gp_hyperparams(
            state.data, state.model, state.gp_optimizer, rng=state.rng)
        logger.debug("hyperparameters refit",
                     extra={"iteration": state.iteration,
                            "value": fit_result.value,
                            "iters": fit_result.iters})

    prev_x = state.target_point.copy()
    prev_batch = state.batch.copy()
    x_init, batch_init = perturbed_init(prev_x, prev_batch, state.perturb,
                                        state.policy, state.rng)
    x_init = state.spec.domain.clip(x_init)
    batch_init = state.spec.domain.clip(batch_init)

    x_new, batch_new, _, opt_result = maximize_tad(
        state.model, state.data, state.spec.target_design, state.noise_variances,
        state.spec.domain, state.penalty_strength, x_init, batch_init,
        state.tad_optimizer, rng=state.rng)

    x_new = state.spec.domain.clip(x_new)
    batch_new = state.spec.domain.clip(batch_new)
    batch_new = guard_duplicates(batch_new, state.data.points, state.spec.domain,
                                 state.policy, state.rng)

    # Re-score at the final geometry so records, validation and convergence
    # all describe the points that will actually be measured. Clipping can
    # land points in numerically degenerate spots; nudge and retry.
    for attempt in range(4):
        try:
            inputs = AcquisitionInputs(state.model, state.data, batch_new, x_new,
                                       state.spec.target_design,
                                       state.noise_variances)
            breakdown = tad_acquisition(inputs)
            eig = expected_information_gain(inputs)
            break
        except NumericalError:
            if attempt == 3:
                raise
            nudge = state.policy.perturb_scale * (attempt + 1)
            batch_new = state.spec.domain.clip(
                batch_new + nudge * state.rng.standard_normal(batch_new.shape))
            batch_new = guard_duplicates(batch_new, state.data.points,
                                         state.spec.domain, state.policy, state.rng)
    penalty = domain_penalty(x_new, batch_new, state.spec.domain,
                             state.penalty_strength)

    state.target_point = x_new
    state.batch = batch_new
    state.pending = ProposedBatch(
        kind="iteration", batch_points=batch_new, target_point=x_new,
        prev_target=prev_x, prev_batch=prev_batch, breakdown=breakdown,
        eig=eig, penalty=penalty, opt_iters=opt_result.iters,
        opt_converged=opt_result.converged, opt_value=opt_result.value,
        refit_performed=refit,
    )
    return state.pending


def ingest(state, observation_rows):
    """Phase two of a step: validate the measured batch and branch.

    Returns the iteration record, or None when the rows filled the initial
    start-up cluster (which only seeds the optimizer geometry).
    """
    if state.converged:
        raise CampaignFinishedError(f"campaign already ended: {state.outcome}")
    if state.pending is None:
        raise NoPendingBatchError("no batch is awaiting observations")
    pending = state.pending
    e = state.spec.n_tasks
    rows = np.asarray(observation_rows, dtype=float)
    if rows.shape != (pending.n_rows, e):
        raise DimensionMismatchError(
            f"expected {pending.n_rows} rows of {e} values, got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ContractViolationError("observations must be finite numbers")

    if pending.kind == "initial":
        state.batch_observations = rows.copy()
        for point, row in zip(pending.batch_points, rows):
            state.samples.append(SampleRecord("initial_batch", point.copy(),
                                              row.copy()))
        state.pending = None
        return None

    n2 = pending.batch_points.shape[0]
    batch_rows = rows[:n2]
    target_row = rows[n2]
    stage = f"step-{state.step_count + 1}"

    pred21 = data_predictive(state.model, state.data, pending.batch_points,
                             state.noise_variances)
    report = batch_validation(pred21, batch_rows.reshape(-1))
    ub = compute_ub(state, pending.target_point)

    if report.p_value > state.validation_threshold:
        branch = "accepted"
        state.n_check = 0
        state.check_model = False
        outcome = check_convergence(state, ub=ub, eig=pending.eig)
        state.data = state.data.append(pending.batch_points, batch_rows,
                                       state.noise_variances)
        state.data = state.data.append(pending.target_point[None, :],
                                       target_row[None, :], state.noise_variances)
        for point, row in zip(pending.batch_points, batch_rows):
            state.samples.append(SampleRecord(stage, point.copy(), row.copy()))
        state.samples.append(SampleRecord(stage, pending.target_point.copy(),
                                          target_row.copy()))
        n_acquired = n2 + 1
        state.perturb = True
        state.outcome = outcome
    else:
        state.n_check += 1
        if state.n_check == 2:
            branch = "complexified"
            state.model = complexified(state.model, state.spec.domain.widths)
            state.data = state.data.append(pending.batch_points, batch_rows,
                                           state.noise_variances)
            for point, row in zip(pending.batch_points, batch_rows):
                state.samples.append(SampleRecord(stage, point.copy(), row.copy()))
            # The target row was measured with the batch but is not folded
            # into the dataset on a confirmed validation failure; keep it in
            # the audit log so replays can reproduce the full protocol.
            state.samples.append(SampleRecord(f"{stage}-unused",
                                              pending.target_point.copy(),
                                              target_row.copy()))
            n_acquired = n2
            # Restart next optimization from the pre-optimization geometry.
            state.target_point = pending.prev_target.copy()
            state.batch = pending.prev_batch.copy()
            state.perturb = False
            state.n_check = 0
            state.check_model = False
        else:
            branch = "alert"
            state.data = state.data.append(pending.batch_points, batch_rows,
                                           state.noise_variances)
            state.data = state.data.append(pending.target_point[None, :],
                                           target_row[None, :], state.noise_variances)
            for point, row in zip(pending.batch_points, batch_rows):
                state.samples.append(SampleRecord(stage, point.copy(), row.copy()))
            state.samples.append(SampleRecord(stage, pending.target_point.copy(),
                                              target_row.copy()))
            n_acquired = n2 + 1
            state.perturb = True
            state.check_model = True

    state.step_count += 1
    record = IterationRecord(
        iteration=state.iteration, step_index=state.step_count, branch=branch,
        target_point=pending.target_point.copy(),
        batch_points=pending.batch_points.copy(),
        log_det_term=pending.breakdown.log_det_term,
        data_fit_term=pending.breakdown.data_fit_term,
        trace_term=pending.breakdown.trace_term,
        total=pending.breakdown.total, penalty=pending.penalty,
        eig=pending.eig, statistic=report.statistic, dof=report.dof,
        p_value=report.p_value, n_components=state.n_components,
        n_check=state.n_check, eig_counter=state.conv.eig_counter,
        ub_center=ub.center, ub_half_widths=ub.half_widths,
        ub_fits=ub.fits_within(state.spec.ttr_intervals()),
        n_acquired=n_acquired, opt_iters=pending.opt_iters,
        opt_converged=pending.opt_converged, opt_value=pending.opt_value,
        outcome_after=state.outcome,
    )
    state.history.append(record)
    state.pending = None
    return record


def step(state, oracle=None):
    """One full iteration. With an oracle, proposes, measures, ingests.

    Without an oracle the call only advances to (or reports) the pending
    batch and raises AwaitingObservationsError; nothing else changes.
    """
    if state.converged:
        raise CampaignFinishedError(f"campaign already ended: {state.outcome}")
    if oracle is None:
        if state.pending is not None:
            raise AwaitingObservationsError("pending batch awaits observations")
        propose(state)
        raise AwaitingObservationsError("pending batch proposed; observations needed")
    pending = propose(state)
    rows = np.asarray(oracle.observe(pending.all_points()), dtype=float)
    return ingest(state, rows)


def run(state, oracle, max_iters):
    """Drive a simulated campaign until it converges or hits the budget.

    A budget exhaustion leaves the outcome at "running", which callers can
    distinguish from both convergence outcomes.
    """
    while state.outcome == OUTCOME_RUNNING and state.iteration < max_iters:
        step(state, oracle)
    return state
