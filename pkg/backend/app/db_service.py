"""
Database service layer for runs and their audit events.
"""
from typing import Optional
from sqlalchemy.orm import Session
from datetime import datetime
import threading
import uuid

from fastapi.encoders import jsonable_encoder
from .database import RunDB, AuditEventDB

# Sessions are not thread-safe; check threads share the caller's session.
_lock = threading.Lock()


def _json(payload):
    """Ensure JSON-serializable payloads for DB storage."""
    return jsonable_encoder(payload)


def create_run(db: Session, command: str, request: dict | None = None) -> RunDB:
    """Open a run in the pending state."""
    run = RunDB(
        run_id=f"run-{uuid.uuid4().hex[:12]}",
        command=command,
        status="pending",
        request=_json(request) if request is not None else None,
        created_at=datetime.utcnow(),
    )
    db.add(run)
    db.commit()
    db.refresh(run)
    return run


def get_run(db: Session, run_id: str) -> Optional[RunDB]:
    """Get a run by ID."""
    return db.query(RunDB).filter(RunDB.run_id == run_id).first()


def update_run(db: Session, run_id: str, **fields) -> Optional[RunDB]:
    run = get_run(db, run_id)
    if not run:
        return None
    for k, v in fields.items():
        if k in ("report", "request") and isinstance(v, (dict, list)):
            v = _json(v)
        setattr(run, k, v)
    db.commit()
    db.refresh(run)
    return run


def finish_run(db: Session, run_id: str, status: str, exit_code: int, report: dict | None = None) -> Optional[RunDB]:
    return update_run(db, run_id, status=status, exit_code=exit_code, report=report, completed_at=datetime.utcnow())


def list_runs(db: Session, command: str | None = None, skip: int = 0, limit: int = 100):
    """List runs, newest first, optionally filtered by command."""
    q = db.query(RunDB)
    if command:
        q = q.filter(RunDB.command == command)
    return q.order_by(RunDB.created_at.desc()).offset(skip).limit(limit).all()


def add_audit_event(
    db: Session,
    event_id: str,
    run_id: str,
    action: str,
    details: dict | None,
) -> AuditEventDB:
    with _lock:
        db_event = AuditEventDB(
            event_id=event_id,
            run_id=run_id,
            action=action,
            details=_json(details) if details is not None else None,
            created_at=datetime.utcnow(),
        )
        db.add(db_event)
        db.commit()
        db.refresh(db_event)
        return db_event


def list_audit_events(db: Session, run_id: str, limit: int = 200):
    return (
        db.query(AuditEventDB)
        .filter(AuditEventDB.run_id == run_id)
        .order_by(AuditEventDB.created_at.asc())
        .limit(limit)
        .all()
    )
