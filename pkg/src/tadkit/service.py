"""HTTP service exposing campaigns to dashboards and remote clients.

Every campaign lives in an in-process registry. Mutations go through the
same propose/ingest/step operations the CLI uses, serialized per campaign
by a single-worker executor; reads snapshot the state under the campaign
lock. A ``step`` request returns a job handle immediately because the
optimization behind it can take seconds to minutes.
"""

import itertools
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import List

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import campaign as camp
from .config import CampaignConfig, build_session
from .errors import (CampaignFinishedError, ConfigError, DimensionMismatchError,
                     ContractViolationError, NoPendingBatchError)

API_PREFIX = "/api/v1"


class ObservationsRequest(BaseModel):
    observations: List[List[float]]


class StepResponse(BaseModel):
    job_id: str
    status: str


class CampaignSession:
    """One campaign plus its oracle, lock, and job bookkeeping."""

    def __init__(self, session_id, config, state, oracle):
        self.id = session_id
        self.config = config
        self.state = state
        self.oracle = oracle
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=1)
        self.jobs = {}
        self._job_counter = itertools.count(1)

    def snapshot(self):
        with self.lock:
            state = self.state
            ub = state.latest_ub()
            pending = state.pending
            return {
                "id": self.id,
                "outcome": state.outcome,
                "iteration": state.iteration,
                "step_count": state.step_count,
                "n_components": state.n_components,
                "n_check": state.n_check,
                "eig_counter": state.conv.eig_counter,
                "eig_patience": state.conv.eig_patience,
                "eig_threshold": state.conv.eig_threshold,
                "validation_threshold": state.validation_threshold,
                "oracle_mode": state.oracle_mode,
                "n_batch": state.n_batch,
                "seed": self.config.seed,
                "domain": {"lower": state.spec.domain.lower.tolist(),
                           "upper": state.spec.domain.upper.tolist()},
                "target_design": state.spec.target_design.tolist(),
                "tolerance": state.spec.tolerance.tolist(),
                "ttr": state.spec.ttr_intervals().tolist(),
                "target_point": state.target_point.tolist(),
                "batch": state.batch.tolist(),
                "ub": None if ub is None else {
                    "center": ub.center.tolist(),
                    "half_widths": ub.half_widths.tolist()},
                "pending": None if pending is None else {
                    "kind": pending.kind,
                    "points": pending.all_points().tolist(),
                    "n_rows": int(pending.n_rows)},
                "eig_history": state.eig_history(),
                "p_value_history": state.p_value_history(),
            }

    def history(self):
        with self.lock:
            return [_record_to_dict(rec) for rec in self.state.history]

    def samples(self):
        with self.lock:
            return [{"stage": s.stage, "point": s.point.tolist(),
                     "observation": s.observation.tolist()}
                    for s in self.state.samples]

    def submit_step(self):
        job_id = f"job-{next(self._job_counter)}"
        self.jobs[job_id] = {"job_id": job_id, "status": "queued", "error": None}

        def work():
            self.jobs[job_id]["status"] = "running"
            try:
                with self.lock:
                    if self.state.oracle_mode == "simulated":
                        camp.step(self.state, self.oracle)
                    else:
                        camp.propose(self.state)
                self.jobs[job_id]["status"] = "done"
            except Exception as exc:  # surfaced via the job handle
                self.jobs[job_id]["status"] = "error"
                self.jobs[job_id]["error"] = str(exc)

        self.executor.submit(work)
        return self.jobs[job_id]

    def ingest(self, rows):
        with self.lock:
            record = camp.ingest(self.state, rows)
        return record


def _record_to_dict(rec):
    return {
        "iteration": rec.iteration, "step_index": rec.step_index,
        "branch": rec.branch,
        "target_point": rec.target_point.tolist(),
        "batch_points": rec.batch_points.tolist(),
        "log_det_term": rec.log_det_term, "data_fit_term": rec.data_fit_term,
        "trace_term": rec.trace_term, "total": rec.total,
        "penalty": rec.penalty, "eig": rec.eig,
        "statistic": rec.statistic, "dof": rec.dof, "p_value": rec.p_value,
        "n_components": rec.n_components, "n_check": rec.n_check,
        "eig_counter": rec.eig_counter,
        "ub_center": rec.ub_center.tolist(),
        "ub_half_widths": rec.ub_half_widths.tolist(),
        "ub_fits": rec.ub_fits, "n_acquired": rec.n_acquired,
        "opt_iters": rec.opt_iters, "opt_converged": rec.opt_converged,
        "opt_value": rec.opt_value, "outcome_after": rec.outcome_after,
    }


class CampaignRegistry:
    def __init__(self):
        self._sessions = {}
        self._lock = threading.Lock()
        self._counter = itertools.count(1)

    def create(self, config):
        state, oracle = build_session(config)
        with self._lock:
            session_id = f"c{next(self._counter)}"
            session = CampaignSession(session_id, config, state, oracle)
            self._sessions[session_id] = session
        return session

    def add(self, config, state, oracle):
        with self._lock:
            session_id = f"c{next(self._counter)}"
            session = CampaignSession(session_id, config, state, oracle)
            self._sessions[session_id] = session
        return session

    def get(self, session_id):
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no campaign {session_id}")
        return session

    def ids(self):
        with self._lock:
            return sorted(self._sessions)


def create_app(registry=None):
    registry = registry if registry is not None else CampaignRegistry()
    app = FastAPI(title="tadkit campaign service")
    app.state.registry = registry

    @app.post(f"{API_PREFIX}/campaigns", status_code=201)
    def create_campaign(body: dict):
        try:
            config = CampaignConfig.from_dict(body)
            session = registry.create(config)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"id": session.id, "state": session.snapshot()}

    @app.get(f"{API_PREFIX}/campaigns")
    def list_campaigns():
        return {"campaigns": registry.ids()}

    @app.get(f"{API_PREFIX}/campaigns/{{cid}}/state")
    def get_state(cid: str):
        return registry.get(cid).snapshot()

    @app.get(f"{API_PREFIX}/campaigns/{{cid}}/history")
    def get_history(cid: str):
        return {"records": registry.get(cid).history()}

    @app.get(f"{API_PREFIX}/campaigns/{{cid}}/samples")
    def get_samples(cid: str):
        return {"samples": registry.get(cid).samples()}

    @app.post(f"{API_PREFIX}/campaigns/{{cid}}/step", status_code=202)
    def post_step(cid: str):
        session = registry.get(cid)
        with session.lock:
            if session.state.converged:
                raise HTTPException(status_code=409,
                                    detail=f"campaign ended: {session.state.outcome}")
            if (session.state.oracle_mode == "interactive"
                    and session.state.pending is not None):
                raise HTTPException(
                    status_code=409,
                    detail="a pending batch awaits observations; POST them first")
        job = session.submit_step()
        return StepResponse(job_id=job["job_id"], status=job["status"])

    @app.get(f"{API_PREFIX}/campaigns/{{cid}}/jobs/{{job_id}}")
    def get_job(cid: str, job_id: str):
        session = registry.get(cid)
        job = session.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no job {job_id}")
        return job

    @app.post(f"{API_PREFIX}/campaigns/{{cid}}/observations", status_code=202)
    def post_observations(cid: str, body: ObservationsRequest):
        session = registry.get(cid)
        rows = np.asarray(body.observations, dtype=float)
        try:
            record = session.ingest(rows)
        except NoPendingBatchError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except CampaignFinishedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (DimensionMismatchError, ContractViolationError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return JSONResponse(status_code=202, content={
            "accepted": True,
            "record": None if record is None else _record_to_dict(record),
        })

    return app


app = create_app()
