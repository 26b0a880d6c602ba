"""HTTP surface for the gateway service.

Thin adapter: request bodies are validated, the service method is called,
and domain errors are mapped to stable error codes. Worker-facing payloads
(assignment views, pair metadata) never include ground truth, race labels,
or gold flags.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .aggregate import report_to_dict
from .assignment import TaskAssignment, UnmappedWorker
from .corpus import GroundTruth, UnknownPair
from .errors import EngineError
from .gateway import (
    DuplicateVerdict,
    ExperimentClosed,
    ExperimentStillOpen,
    GatewayService,
    IneligibleWorker,
    PairNotAssigned,
    UnknownExperiment,
    UnknownWorker,
)

_ERROR_MAP: list[tuple[type, int, str]] = [
    (ExperimentClosed, 409, "experiment_closed"),
    (ExperimentStillOpen, 409, "experiment_still_open"),
    (DuplicateVerdict, 409, "duplicate_verdict"),
    (PairNotAssigned, 403, "pair_not_assigned"),
    (IneligibleWorker, 403, "ineligible_worker"),
    (UnmappedWorker, 400, "unmapped_worker"),
    (UnknownPair, 404, "unknown_pair"),
    (UnknownWorker, 404, "unknown_worker"),
    (UnknownExperiment, 404, "unknown_experiment"),
]


class RegisterRequest(BaseModel):
    self_identified_race: str
    prior_experience: bool = False


class ClaimRequest(BaseModel):
    worker_id: str
    experiment_id: str


class VerdictRequest(BaseModel):
    worker_id: str
    pair_id: str
    decision: str
    elapsed_ms: int = 0


def assignment_view(assignment: TaskAssignment) -> dict:
    """Worker-facing assignment payload: pair ids only, gold flags hidden."""
    return {
        "assignment_id": assignment.assignment_id,
        "worker_id": assignment.worker_id,
        "policy": assignment.policy.value,
        "pair_ids": list(assignment.pair_ids),
    }


def create_app(service: GatewayService) -> FastAPI:
    app = FastAPI(title="veriloop gateway", docs_url=None, redoc_url=None)

    @app.exception_handler(EngineError)
    async def engine_error_handler(_, exc: EngineError):
        for exc_type, status, code in _ERROR_MAP:
            if isinstance(exc, exc_type):
                return JSONResponse(
                    status_code=status, content={"error": code, "detail": str(exc)}
                )
        return JSONResponse(
            status_code=400, content={"error": "validation_error", "detail": str(exc)}
        )

    @app.post("/api/workers", status_code=201)
    def register_worker(body: RegisterRequest):
        profile = service.register_worker(body.self_identified_race, body.prior_experience)
        return {"worker_id": profile.worker_id, "condition": profile.condition.value}

    @app.post("/api/assignments/claim")
    def claim_assignment(body: ClaimRequest):
        assignment = service.claim_assignment(body.worker_id, body.experiment_id)
        return assignment_view(assignment)

    @app.get("/api/pairs/{pair_id}")
    def pair_metadata(pair_id: str):
        return service.pair_view(pair_id)

    @app.post("/api/verdicts", status_code=201)
    def submit_verdict(body: VerdictRequest):
        try:
            decision = GroundTruth.parse(body.decision)
        except ValueError as exc:
            return JSONResponse(
                status_code=422, content={"error": "bad_decision", "detail": str(exc)}
            )
        sequence = service.submit_verdict(
            body.worker_id, body.pair_id, decision, body.elapsed_ms
        )
        return {"sequence_number": sequence}

    @app.get("/api/experiments/{experiment_id}/report")
    def fetch_report(experiment_id: str):
        report = service.fetch_report(experiment_id)
        return report_to_dict(report)

    return app
