"""
Check runner.

Independent checks (one per cone, per degree or per verifier kind) run on a
thread pool; results are merged in submission order so reports do not depend
on scheduling. When a session and run id are given, every check leaves
audit events behind.
"""

from __future__ import annotations

import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from sqlalchemy.orm import Session

from .config import settings
from .db_service import add_audit_event

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _event_id() -> str:
    return f"evt-{uuid.uuid4().hex[:12]}"


def run_checks(
    jobs: Sequence[Tuple[str, Callable[[], T]]],
    db: Optional[Session] = None,
    run_id: Optional[str] = None,
    workers: Optional[int] = None,
) -> List[T]:
    """
    Run ``(name, fn)`` jobs and return their results in job order.

    The first failing job (in job order, not completion order) re-raises its
    exception once every job has finished.
    """
    record = db is not None and run_id is not None
    width = max(1, min(workers or settings.workers, len(jobs) or 1))
    results: List[T] = []
    failure: Optional[BaseException] = None

    with ThreadPoolExecutor(max_workers=width) as pool:
        futures = []
        for name, fn in jobs:
            if record:
                add_audit_event(db, _event_id(), run_id, "check.started", {"check": name})
            futures.append((name, pool.submit(fn)))

        for name, fut in futures:
            try:
                out = fut.result()
            except Exception as e:  # noqa: BLE001 - re-raised below
                logger.debug("check %s raised %s", name, e)
                if record:
                    add_audit_event(
                        db, _event_id(), run_id, "check.failed", {"check": name, "error": type(e).__name__}
                    )
                if failure is None:
                    failure = e
                results.append(None)
                continue
            if record:
                passed = getattr(out, "passed", None)
                add_audit_event(db, _event_id(), run_id, "check.completed", {"check": name, "passed": passed})
            results.append(out)

    if failure is not None:
        raise failure
    return results
