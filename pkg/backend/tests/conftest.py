import json
import os
import sys
import tempfile
from pathlib import Path

import pytest

BACKEND = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(BACKEND))

# Must be set before app.config is imported.
_DB_DIR = tempfile.mkdtemp(prefix="fan_ih_tests_")
os.environ["DATABASE_URL"] = f"sqlite:///{_DB_DIR}/runs.db"

from app.database import SessionLocal, init_db  # noqa: E402


@pytest.fixture
def db():
    init_db()
    session = SessionLocal()
    try:
        yield session
    finally:
        session.close()


@pytest.fixture
def write_json(tmp_path: Path):
    """Dump a model (or plain dict) into tmp_path and return the path as a string."""

    def write(name: str, payload) -> str:
        path = tmp_path / name
        if hasattr(payload, "model_dump_json"):
            text = payload.model_dump_json()
        else:
            text = json.dumps(payload)
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
