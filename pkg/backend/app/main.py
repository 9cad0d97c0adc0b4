"""
FastAPI application for fan intersection cohomology.
"""
import logging
from typing import Callable, List, Optional

from fastapi import Depends, FastAPI, HTTPException
from fastapi.encoders import jsonable_encoder
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel
from sqlalchemy.orm import Session

from . import fan_service
from .data import SAMPLE_FANS
from .database import get_db, init_db
from .db_service import create_run, finish_run, get_run, list_audit_events, list_runs, update_run
from .exceptions import FanIHError, HypothesisError, InputError
from .models import (
    AuditEventModel,
    BettiTable,
    CheckKind,
    CheckReport,
    FanSpec,
    LocalHReport,
    RunDetail,
    RunSummary,
    SubdivisionSpec,
    VerifyInput,
)

logger = logging.getLogger(__name__)

app = FastAPI(
    title="Fan IH API",
    description="Combinatorial intersection cohomology of polyhedral fans",
    version="1.0.0",
)


@app.on_event("startup")
def startup_event():
    try:
        init_db()
    except Exception as e:  # noqa: BLE001 - surface startup errors in server logs
        logger.error("Database init failed: %s", e)
        raise


app.add_middleware(
    CORSMiddleware,
    allow_origins=[
        "http://localhost:5173",
        "http://127.0.0.1:5173",
        "http://localhost:3000",
        "http://127.0.0.1:3000",
    ],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _status_code(exc: FanIHError) -> int:
    if isinstance(exc, InputError):
        return 400
    if isinstance(exc, HypothesisError):
        return 422
    return 500


def _recorded(db: Session, command: str, request: BaseModel, compute: Callable[[str], BaseModel]) -> BaseModel:
    """Run ``compute(run_id)`` inside a recorded run; library errors become HTTP errors."""
    run = create_run(db, command, request.model_dump(mode="json"))
    update_run(db, run.run_id, status="running")
    try:
        report = compute(run.run_id)
    except FanIHError as exc:
        finish_run(db, run.run_id, "error", exc.exit_code, {"error": type(exc).__name__, "detail": str(exc)})
        raise HTTPException(status_code=_status_code(exc), detail=f"{type(exc).__name__}: {exc}")
    passed = getattr(report, "passed", True)
    finish_run(db, run.run_id, "passed" if passed else "failed", 0 if passed else 1, jsonable_encoder(report))
    return report


@app.get("/api/ping")
def ping() -> dict[str, str]:
    """Basic readiness probe."""
    return {"status": "ok", "service": "Fan IH API", "version": "1.0.0"}


@app.get("/api/samples/{name}", response_model=FanSpec)
def sample(name: str) -> FanSpec:
    spec = SAMPLE_FANS.get(name)
    if spec is None:
        raise HTTPException(status_code=404, detail="Sample not found")
    return spec


@app.post("/api/ih", response_model=BettiTable)
def ih(spec: FanSpec, cap: Optional[int] = None, db: Session = Depends(get_db)) -> BettiTable:
    """Betti numbers of IH of a fan."""
    return _recorded(db, "ih", spec, lambda _: fan_service.betti_table(spec, cap))


@app.post("/api/local-h", response_model=LocalHReport)
def local_h(spec: SubdivisionSpec, cap: Optional[int] = None, db: Session = Depends(get_db)) -> LocalHReport:
    """Multiplicity spaces and perverse table of the pushforward of L."""
    return _recorded(db, "local-h", spec, lambda _: fan_service.local_h(spec, cap))


@app.post("/api/verify/{kind}", response_model=CheckReport)
def verify(kind: CheckKind, inputs: VerifyInput, db: Session = Depends(get_db)) -> CheckReport:
    """
    Run a verifier. A statement that does not hold is reported with passed=false;
    an uncertified hypothesis is a 422.
    """
    return _recorded(
        db, f"verify:{kind.value}", inputs, lambda run_id: fan_service.verify(kind, inputs, db=db, run_id=run_id)
    )


@app.get("/api/runs", response_model=List[RunSummary])
def runs(command: Optional[str] = None, skip: int = 0, limit: int = 100, db: Session = Depends(get_db)):
    """List recorded runs, newest first."""
    return [RunSummary.model_validate(r, from_attributes=True) for r in list_runs(db, command, skip, limit)]


@app.get("/api/runs/{run_id}", response_model=RunDetail)
def run_detail(run_id: str, db: Session = Depends(get_db)) -> RunDetail:
    run = get_run(db, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return RunDetail.model_validate(run, from_attributes=True)


@app.get("/api/runs/{run_id}/events", response_model=List[AuditEventModel])
def run_events(run_id: str, limit: int = 200, db: Session = Depends(get_db)):
    """Audit trail of the checks executed within a run."""
    if not get_run(db, run_id):
        raise HTTPException(status_code=404, detail="Run not found")
    return [AuditEventModel.model_validate(e, from_attributes=True) for e in list_audit_events(db, run_id, limit)]
