"""Adaptive batch design of experiments against a vector-valued black box."""

from .acquisition import (AcquisitionBreakdown, AcquisitionInputs,
                          expected_information_gain, tad_acquisition)
from .campaign import (Box, CampaignState, ConvergenceConfig,
                       InitializationPolicy, ProblemSpec, UncertaintyBox,
                       ingest, initialize_campaign, propose, run, step)
from .config import CampaignConfig, build_session, default_config
from .gp import Dataset, NormalDist
from .kernels import KernelModel, ScalarKernelParams, TaskMatrixParams
from .optim import OptimizerConfig, OptResult
from .testbed import SimulatedOracle, eval_test_function
from .validation import ValidationReport, batch_validation, chi2_right_tail

__version__ = "0.1.0"

__all__ = [
    "AcquisitionBreakdown", "AcquisitionInputs", "Box", "CampaignConfig",
    "CampaignState", "ConvergenceConfig", "Dataset", "InitializationPolicy",
    "KernelModel", "NormalDist", "OptResult", "OptimizerConfig", "ProblemSpec",
    "ScalarKernelParams", "SimulatedOracle", "TaskMatrixParams",
    "UncertaintyBox", "ValidationReport", "batch_validation", "build_session",
    "chi2_right_tail", "default_config", "eval_test_function",
    "expected_information_gain", "ingest", "initialize_campaign", "propose",
    "run", "step", "tad_acquisition",
]
