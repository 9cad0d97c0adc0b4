"""
Database models and session management for recorded runs.
"""
from sqlalchemy import create_engine, Column, String, DateTime, JSON, Integer
from sqlalchemy.ext.declarative import declarative_base
from sqlalchemy.orm import sessionmaker, Session
from datetime import datetime
import os

from .config import settings

# SQLite by default; any SQLAlchemy URL works.
DATABASE_URL = settings.database_url


def _sqlite_dir(url: str) -> str:
    if not url.startswith("sqlite:////"):
        return ""
    return os.path.dirname(url[len("sqlite:///"):])


if _sqlite_dir(DATABASE_URL):
    os.makedirs(_sqlite_dir(DATABASE_URL), exist_ok=True)

# Check threads share the caller's connection.
_connect_args = {"check_same_thread": False} if DATABASE_URL.startswith("sqlite") else {}
engine = create_engine(DATABASE_URL, connect_args=_connect_args)

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
Base = declarative_base()


class RunDB(Base):
    """One batch job: a CLI invocation with --record or an HTTP request."""
    __tablename__ = "runs"

    run_id = Column(String, primary_key=True, index=True)
    command = Column(String, index=True)  # ih | local-h | decompose | verify:<kind> | ...
    status = Column(String, index=True)  # pending|running|passed|failed|error
    exit_code = Column(Integer, nullable=True)
    request = Column(JSON, nullable=True)
    report = Column(JSON, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow, index=True)
    completed_at = Column(DateTime, nullable=True)


class AuditEventDB(Base):
    """Append-only log of check events within a run."""
    __tablename__ = "audit_events"

    event_id = Column(String, primary_key=True, index=True)
    run_id = Column(String, index=True)
    action = Column(String)  # e.g. "check.started", "check.completed"
    details = Column(JSON, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow, index=True)


def get_db() -> Session:
    """Request-scoped session for FastAPI dependencies."""
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def init_db():
    """Create the runs and audit_events tables if missing."""
    Base.metadata.create_all(bind=engine)
