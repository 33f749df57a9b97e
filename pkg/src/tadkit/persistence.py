"""Lossless campaign persistence and tabular export.

State files are JSON with every floating-point number encoded as a C99
hex-float string, so a save/load/continue cycle replays bit-identically.
Config documents keep plain JSON numbers (they are human-edited; Python's
repr round-trips them exactly anyway).
"""

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .campaign import (Box, CampaignState, ConvergenceConfig, InitializationPolicy,
                       IterationRecord, ProblemSpec, ProposedBatch, SampleRecord)
from .config import FORMAT_VERSION, CampaignConfig
from .errors import StateParseError, UnsupportedVersionError
from .gp import Dataset
from .kernels import KernelModel, ScalarKernelParams, TaskMatrixParams


# -- hex-float codecs --------------------------------------------------------


def encode_float(value):
    return float(value).hex()


def decode_float(text):
    return float.fromhex(text)


def encode_array(arr):
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "hex": [v.hex() for v in arr.reshape(-1).tolist()]}


def decode_array(doc):
    flat = np.array([float.fromhex(h) for h in doc["hex"]], dtype=float)
    return flat.reshape(doc["shape"])


def _encode_optional_array(arr):
    return None if arr is None else encode_array(arr)


def _decode_optional_array(doc):
    return None if doc is None else decode_array(doc)


# -- model / dataset ---------------------------------------------------------


def _encode_model(model):
    return {
        "task_means": encode_array(model.task_means),
        "components": [
            {"signal_variance": encode_float(sc.signal_variance),
             "lengthscales": encode_array(sc.lengthscales),
             "chol_factor": encode_array(tm.chol_factor)}
            for sc, tm in model.components
        ],
    }


def _decode_model(doc):
    comps = tuple(
        (ScalarKernelParams(decode_float(c["signal_variance"]),
                            decode_array(c["lengthscales"])),
         TaskMatrixParams(decode_array(c["chol_factor"])))
        for c in doc["components"]
    )
    return KernelModel(decode_array(doc["task_means"]), comps)


def _encode_dataset(data):
    return {"points": encode_array(data.points),
            "observations": encode_array(data.observations),
            "noise_variances": encode_array(data.noise_variances)}


def _decode_dataset(doc):
    return Dataset(decode_array(doc["points"]), decode_array(doc["observations"]),
                   decode_array(doc["noise_variances"]))


# -- records ------------------------------------------------------------------


def _encode_record(rec):
    return {
        "iteration": rec.iteration, "step_index": rec.step_index,
        "branch": rec.branch,
        "target_point": encode_array(rec.target_point),
        "batch_points": encode_array(rec.batch_points),
        "log_det_term": encode_float(rec.log_det_term),
        "data_fit_term": encode_float(rec.data_fit_term),
        "trace_term": encode_float(rec.trace_term),
        "total": encode_float(rec.total),
        "penalty": encode_float(rec.penalty),
        "eig": encode_float(rec.eig),
        "statistic": encode_float(rec.statistic),
        "dof": rec.dof,
        "p_value": encode_float(rec.p_value),
        "n_components": rec.n_components,
        "n_check": rec.n_check,
        "eig_counter": rec.eig_counter,
        "ub_center": encode_array(rec.ub_center),
        "ub_half_widths": encode_array(rec.ub_half_widths),
        "ub_fits": rec.ub_fits,
        "n_acquired": rec.n_acquired,
        "opt_iters": rec.opt_iters,
        "opt_converged": rec.opt_converged,
        "opt_value": encode_float(rec.opt_value),
        "outcome_after": rec.outcome_after,
    }


def _decode_record(doc):
    return IterationRecord(
        iteration=doc["iteration"], step_index=doc["step_index"],
        branch=doc["branch"],
        target_point=decode_array(doc["target_point"]),
        batch_points=decode_array(doc["batch_points"]),
        log_det_term=decode_float(doc["log_det_term"]),
        data_fit_term=decode_float(doc["data_fit_term"]),
        trace_term=decode_float(doc["trace_term"]),
        total=decode_float(doc["total"]),
        penalty=decode_float(doc["penalty"]),
        eig=decode_float(doc["eig"]),
        statistic=decode_float(doc["statistic"]),
        dof=doc["dof"],
        p_value=decode_float(doc["p_value"]),
        n_components=doc["n_components"],
        n_check=doc["n_check"],
        eig_counter=doc["eig_counter"],
        ub_center=decode_array(doc["ub_center"]),
        ub_half_widths=decode_array(doc["ub_half_widths"]),
        ub_fits=doc["ub_fits"],
        n_acquired=doc["n_acquired"],
        opt_iters=doc["opt_iters"],
        opt_converged=doc["opt_converged"],
        opt_value=decode_float(doc["opt_value"]),
        outcome_after=doc["outcome_after"],
    )


def _encode_pending(pending):
    if pending is None:
        return None
    doc = {
        "kind": pending.kind,
        "batch_points": encode_array(pending.batch_points),
        "target_point": _encode_optional_array(pending.target_point),
        "prev_target": _encode_optional_array(pending.prev_target),
        "prev_batch": _encode_optional_array(pending.prev_batch),
        "eig": None if pending.eig is None else encode_float(pending.eig),
        "penalty": None if pending.penalty is None else encode_float(pending.penalty),
        "opt_iters": pending.opt_iters,
        "opt_converged": pending.opt_converged,
        "opt_value": encode_float(pending.opt_value),
        "refit_performed": pending.refit_performed,
        "breakdown": None,
    }
    if pending.breakdown is not None:
        bd = pending.breakdown
        doc["breakdown"] = {
            "log_det_term": encode_float(bd.log_det_term),
            "data_fit_term": encode_float(bd.data_fit_term),
            "trace_term": encode_float(bd.trace_term),
            "total": encode_float(bd.total),
            "correction": encode_array(bd.correction),
            "cov_current": encode_array(bd.cov_current),
            "cov_updated": encode_array(bd.cov_updated),
            "eig_nats": encode_float(bd.eig_nats),
        }
    return doc


def _decode_pending(doc):
    if doc is None:
        return None
    breakdown = None
    if doc["breakdown"] is not None:
        from .acquisition import AcquisitionBreakdown
        b = doc["breakdown"]
        breakdown = AcquisitionBreakdown(
            log_det_term=decode_float(b["log_det_term"]),
            data_fit_term=decode_float(b["data_fit_term"]),
            trace_term=decode_float(b["trace_term"]),
            total=decode_float(b["total"]),
            correction=decode_array(b["correction"]),
            cov_current=decode_array(b["cov_current"]),
            cov_updated=decode_array(b["cov_updated"]),
            eig_nats=decode_float(b["eig_nats"]),
        )
    return ProposedBatch(
        kind=doc["kind"],
        batch_points=decode_array(doc["batch_points"]),
        target_point=_decode_optional_array(doc["target_point"]),
        prev_target=_decode_optional_array(doc["prev_target"]),
        prev_batch=_decode_optional_array(doc["prev_batch"]),
        breakdown=breakdown,
        eig=None if doc["eig"] is None else decode_float(doc["eig"]),
        penalty=None if doc["penalty"] is None else decode_float(doc["penalty"]),
        opt_iters=doc["opt_iters"],
        opt_converged=doc["opt_converged"],
        opt_value=decode_float(doc["opt_value"]),
        refit_performed=doc["refit_performed"],
    )


def encode_state(state):
    return {
        "spec": {
            "domain_lower": encode_array(state.spec.domain.lower),
            "domain_upper": encode_array(state.spec.domain.upper),
            "target_design": encode_array(state.spec.target_design),
            "tolerance": encode_array(state.spec.tolerance),
        },
        "conv": {
            "eig_threshold": encode_float(state.conv.eig_threshold),
            "eig_patience": state.conv.eig_patience,
            "eig_counter": state.conv.eig_counter,
        },
        "policy": {
            "cluster_scale": encode_float(state.policy.cluster_scale),
            "perturb_scale": encode_float(state.policy.perturb_scale),
        },
        "data": _encode_dataset(state.data),
        "model": _encode_model(state.model),
        "target_point": encode_array(state.target_point),
        "batch": encode_array(state.batch),
        "noise_variances": encode_array(state.noise_variances),
        "n_batch": state.n_batch,
        "validation_threshold": encode_float(state.validation_threshold),
        "penalty_strength": encode_float(state.penalty_strength),
        "gp_optimizer": _encode_optimizer(state.gp_optimizer),
        "tad_optimizer": _encode_optimizer(state.tad_optimizer),
        "rng_state": state.rng.bit_generator.state,
        "oracle_mode": state.oracle_mode,
        "iteration": state.iteration,
        "step_count": state.step_count,
        "n_check": state.n_check,
        "check_model": state.check_model,
        "perturb": state.perturb,
        "outcome": state.outcome,
        "pending": _encode_pending(state.pending),
        "batch_observations": _encode_optional_array(state.batch_observations),
        "history": [_encode_record(rec) for rec in state.history],
        "samples": [{"stage": s.stage, "point": encode_array(s.point),
                     "observation": encode_array(s.observation)}
                    for s in state.samples],
    }


def _encode_optimizer(cfg):
    return {"max_iters": cfg.max_iters, "grad_tol": encode_float(cfg.grad_tol),
            "step_tol": encode_float(cfg.step_tol), "restarts": cfg.restarts,
            "early_stop_p_band": [encode_float(v) for v in cfg.early_stop_p_band]}


def _decode_optimizer(doc):
    from .optim import OptimizerConfig
    return OptimizerConfig(
        max_iters=doc["max_iters"], grad_tol=decode_float(doc["grad_tol"]),
        step_tol=decode_float(doc["step_tol"]), restarts=doc["restarts"],
        early_stop_p_band=tuple(decode_float(v) for v in doc["early_stop_p_band"]))


def decode_state(doc):
    spec = ProblemSpec(
        Box(decode_array(doc["spec"]["domain_lower"]),
            decode_array(doc["spec"]["domain_upper"])),
        decode_array(doc["spec"]["target_design"]),
        decode_array(doc["spec"]["tolerance"]))
    conv = ConvergenceConfig(decode_float(doc["conv"]["eig_threshold"]),
                             doc["conv"]["eig_patience"],
                             doc["conv"]["eig_counter"])
    policy = InitializationPolicy(decode_float(doc["policy"]["cluster_scale"]),
                                  decode_float(doc["policy"]["perturb_scale"]))
    rng = np.random.default_rng(0)
    rng.bit_generator.state = doc["rng_state"]
    state = CampaignState(
        spec=spec, conv=conv, policy=policy,
        data=_decode_dataset(doc["data"]),
        model=_decode_model(doc["model"]),
        target_point=decode_array(doc["target_point"]),
        batch=decode_array(doc["batch"]),
        noise_variances=decode_array(doc["noise_variances"]),
        n_batch=doc["n_batch"],
        validation_threshold=decode_float(doc["validation_threshold"]),
        penalty_strength=decode_float(doc["penalty_strength"]),
        gp_optimizer=_decode_optimizer(doc["gp_optimizer"]),
        tad_optimizer=_decode_optimizer(doc["tad_optimizer"]),
        rng=rng,
        oracle_mode=doc["oracle_mode"],
        iteration=doc["iteration"],
        step_count=doc["step_count"],
        n_check=doc["n_check"],
        check_model=doc["check_model"],
        perturb=doc["perturb"],
        outcome=doc["outcome"],
        pending=_decode_pending(doc["pending"]),
        batch_observations=_decode_optional_array(doc["batch_observations"]),
        history=[_decode_record(r) for r in doc["history"]],
        samples=[SampleRecord(s["stage"], decode_array(s["point"]),
                              decode_array(s["observation"]))
                 for s in doc["samples"]],
    )
    return state


# -- persisted session --------------------------------------------------------


@dataclass
class PersistedState:
    format_version: int
    config: CampaignConfig
    state: CampaignState
    oracle_rng_state: Optional[dict] = None


def save_state(state, path, config=None, oracle=None):
    """Write a campaign (with its config and oracle stream) to a JSON file."""
    doc = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict() if config is not None else None,
        "state": encode_state(state),
        "oracle_rng_state": oracle.rng_state() if oracle is not None else None,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    os.replace(tmp, path)


def load_state(path):
    """Read a campaign file; raises on version mismatch or corruption."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateParseError(f"corrupt state file: {exc.msg} at byte {exc.pos}",
                              offset=exc.pos)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"state file declares format_version {version}; this build reads "
            f"{FORMAT_VERSION}")
    try:
        config = (CampaignConfig.from_dict(doc["config"])
                  if doc.get("config") else None)
        state = decode_state(doc["state"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StateParseError(f"corrupt state file: {exc}")
    return PersistedState(format_version=version, config=config, state=state,
                          oracle_rng_state=doc.get("oracle_rng_state"))


# -- CSV export ---------------------------------------------------------------

HISTORY_COLUMNS = [
    "iteration", "step_index", "branch", "log_det_term", "data_fit_term",
    "trace_term", "total", "penalty", "eig", "statistic", "dof", "p_value",
    "n_components", "n_check", "eig_counter", "ub_center", "ub_half_widths",
    "ub_fits", "n_acquired", "target_point", "outcome_after",
]


def export_history(state, out_dir):
    """Write history.csv (one row per iteration) and samples.csv.

    Vector columns are expanded per component with stable suffixes; the
    header layout is part of the tool's contract.
    """
    if not state.history:
        raise ValueError("cannot export a campaign with no completed iterations")
    os.makedirs(out_dir, exist_ok=True)
    e = state.spec.n_tasks
    d = state.spec.domain.n_dims
    history_path = os.path.join(out_dir, "history.csv")
    header = []
    for col in HISTORY_COLUMNS:
        if col in ("ub_center", "ub_half_widths"):
            header.extend(f"{col}_{i}" for i in range(e))
        elif col == "target_point":
            header.extend(f"{col}_{i}" for i in range(d))
        else:
            header.append(col)
    with open(history_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in state.history:
            row = []
            for col in HISTORY_COLUMNS:
                value = getattr(rec, col)
                if col in ("ub_center", "ub_half_widths", "target_point"):
                    row.extend(repr(float(v)) for v in value)
                elif isinstance(value, float):
                    row.append(repr(value))
                else:
                    row.append(value)
            writer.writerow(row)
    samples_path = os.path.join(out_dir, "samples.csv")
    with open(samples_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage"] + [f"x_{i}" for i in range(d)]
                        + [f"g_{i}" for i in range(e)])
        for s in state.samples:
            writer.writerow([s.stage] + [repr(float(v)) for v in s.point]
                            + [repr(float(v)) for v in s.observation])
    return history_path, samples_path
