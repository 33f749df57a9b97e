"""Campaign configuration: one JSON-friendly document drives everything.

Only the domain, target design, and tolerance are mandatory; every other
field has a default tuned for the built-in benchmark. ``build_session``
turns a config into a ready-to-step campaign plus (in simulated mode) its
oracle.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .campaign import (Box, ConvergenceConfig, InitializationPolicy, ProblemSpec,
                       guard_duplicates, initialize_campaign)
from .errors import ConfigError
from .optim import OptimizerConfig
from .testbed import SimulatedOracle, eval_test_function_batch

FORMAT_VERSION = 1

ORACLE_MODES = ("simulated", "interactive")


@dataclass
class CampaignConfig:
    domain_lower: list
    domain_upper: list
    target_design: list
    tolerance: list
    eig_threshold: float = 1e-3
    eig_patience: int = 50
    cluster_scale: float = 0.25
    perturb_scale: float = 0.05
    noise_std: list = field(default_factory=lambda: [0.002, 0.002])
    n_batch: int = 3
    oracle_mode: str = "simulated"
    seed: int = 0
    validation_threshold: float = 0.01
    x0: Optional[list] = None
    n_init: int = 4
    init_center: Optional[list] = None
    init_spread: float = 0.25
    init_points: Optional[list] = None
    init_observations: Optional[list] = None
    penalty_strength: Optional[float] = None
    max_iters: int = 100
    gp_optimizer: dict = field(default_factory=dict)
    tad_optimizer: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.domain_lower = [float(v) for v in self.domain_lower]
            self.domain_upper = [float(v) for v in self.domain_upper]
            self.target_design = [float(v) for v in self.target_design]
            self.tolerance = [float(v) for v in self.tolerance]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"domain/target/tolerance must be numeric lists: {exc}")
        if len(self.domain_lower) != len(self.domain_upper):
            raise ConfigError("domain bounds must have equal length")
        if len(self.target_design) != len(self.tolerance):
            raise ConfigError("tolerance must match target_design length")
        if isinstance(self.noise_std, (int, float)):
            self.noise_std = [float(self.noise_std)] * len(self.target_design)
        self.noise_std = [float(v) for v in self.noise_std]
        if len(self.noise_std) != len(self.target_design):
            raise ConfigError("noise_std needs one entry per design component")
        if any(v < 0 for v in self.noise_std):
            raise ConfigError("noise_std entries must be nonnegative")
        if self.oracle_mode not in ORACLE_MODES:
            raise ConfigError(f"oracle_mode must be one of {ORACLE_MODES}")
        if self.n_batch < 1:
            raise ConfigError("n_batch must be at least 1")
        if self.n_init < 1:
            raise ConfigError("n_init must be at least 1")
        if not (0.0 < self.validation_threshold < 1.0):
            raise ConfigError("validation_threshold must sit in (0, 1)")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.oracle_mode == "interactive" and (
                self.init_points is None or self.init_observations is None):
            raise ConfigError(
                "interactive campaigns require explicit init_points and "
                "init_observations (measure your starting design first)")
        if (self.init_points is None) != (self.init_observations is None):
            raise ConfigError("init_points and init_observations go together")

    @property
    def n_dims(self):
        return len(self.domain_lower)

    @property
    def n_tasks(self):
        return len(self.target_design)

    def problem_spec(self):
        return ProblemSpec(Box(np.array(self.domain_lower), np.array(self.domain_upper)),
                           np.array(self.target_design), np.array(self.tolerance))

    def convergence(self):
        return ConvergenceConfig(self.eig_threshold, self.eig_patience)

    def policy(self):
        return InitializationPolicy(self.cluster_scale, self.perturb_scale)

    def gp_optimizer_config(self):
        return _optimizer_config({"max_iters": 200, "restarts": 2,
                                  **self.gp_optimizer})

    def tad_optimizer_config(self):
        return _optimizer_config({"max_iters": 200, "restarts": 4,
                                  **self.tad_optimizer})

    def resolved_penalty_strength(self):
        if self.penalty_strength is not None:
            return float(self.penalty_strength)
        return 10.0 * self.n_tasks

    def to_dict(self):
        out = {
            "domain_lower": self.domain_lower,
            "domain_upper": self.domain_upper,
            "target_design": self.target_design,
            "tolerance": self.tolerance,
            "eig_threshold": self.eig_threshold,
            "eig_patience": self.eig_patience,
            "cluster_scale": self.cluster_scale,
            "perturb_scale": self.perturb_scale,
            "noise_std": self.noise_std,
            "n_batch": self.n_batch,
            "oracle_mode": self.oracle_mode,
            "seed": self.seed,
            "validation_threshold": self.validation_threshold,
            "x0": self.x0,
            "n_init": self.n_init,
            "init_center": self.init_center,
            "init_spread": self.init_spread,
            "init_points": self.init_points,
            "init_observations": self.init_observations,
            "penalty_strength": self.penalty_strength,
            "max_iters": self.max_iters,
            "gp_optimizer": dict(self.gp_optimizer),
            "tad_optimizer": dict(self.tad_optimizer),
        }
        return out

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config document must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"domain_lower", "domain_upper", "target_design", "tolerance"} - set(raw)
        if missing:
            raise ConfigError(f"missing required config fields: {sorted(missing)}")
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc))


def _optimizer_config(overrides):
    allowed = {"max_iters", "grad_tol", "step_tol", "restarts", "early_stop_p_band"}
    bad = set(overrides) - allowed
    if bad:
        raise ConfigError(f"unknown optimizer fields: {sorted(bad)}")
    if "early_stop_p_band" in overrides:
        overrides = dict(overrides)
        overrides["early_stop_p_band"] = tuple(overrides["early_stop_p_band"])
    try:
        return OptimizerConfig(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc))


def default_config():
    """Benchmark configuration targeting the built-in response surface."""
    return CampaignConfig(
        domain_lower=[-3.0, -3.0], domain_upper=[3.0, 3.0],
        target_design=[0.3380, 0.3502], tolerance=[0.01, 0.01],
        x0=[-2.0, 2.0], init_center=[1.5, -1.5], n_init=4,
    )


def build_session(config):
    """Construct (state, oracle) from a config.

    Simulated campaigns draw their initial design (unless given explicitly)
    and immediately observe it plus the starting cluster; interactive
    campaigns require pre-measured initial observations and leave the
    starting cluster pending.
    """
    spec = config.problem_spec()
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    campaign_rng = np.random.default_rng(seeds[0])
    oracle_rng = np.random.default_rng(seeds[1])
    design_rng = np.random.default_rng(seeds[2])

    oracle = None
    if config.oracle_mode == "simulated":
        oracle = SimulatedOracle(eval_test_function_batch, config.noise_std,
                                 rng=oracle_rng)

    if config.init_points is not None:
        init_points = np.asarray(config.init_points, dtype=float)
        init_rows = np.asarray(config.init_observations, dtype=float)
    else:
        center = np.asarray(config.init_center if config.init_center is not None
                            else spec.domain.center, dtype=float)
        raw = center[None, :] + config.init_spread * design_rng.standard_normal(
            (config.n_init, spec.domain.n_dims))
        init_points = guard_duplicates(spec.domain.clip(raw), np.zeros((0, spec.domain.n_dims)),
                                       spec.domain, config.policy(), design_rng)
        init_rows = np.asarray(oracle.observe(init_points), dtype=float)

    x0 = np.asarray(config.x0 if config.x0 is not None else spec.domain.center,
                    dtype=float)
    noise_var = np.asarray(config.noise_std, dtype=float) ** 2
    state = initialize_campaign(
        spec=spec, conv=config.convergence(), init_points=init_points,
        init_observation_rows=init_rows, x0=x0, policy=config.policy(),
        n_batch=config.n_batch, noise_variances=noise_var,
        validation_threshold=config.validation_threshold,
        penalty_strength=config.resolved_penalty_strength(),
        gp_optimizer=config.gp_optimizer_config(),
        tad_optimizer=config.tad_optimizer_config(),
        rng=campaign_rng, oracle=oracle, oracle_mode=config.oracle_mode,
    )
    return state, oracle
