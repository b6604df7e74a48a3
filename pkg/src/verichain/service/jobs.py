"""Background job execution for the long-running endpoints.

Pipeline and evaluation runs can take hours against a live model, so the
service runs them on worker threads and exposes a poll-by-id status API.
Job state lives in process memory; artifacts land on the server
filesystem at the paths named in the request.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import InputError, VerichainError

logger = logging.getLogger(__name__)


@dataclass
class Job:
    id: str
    kind: str
    status: str = "queued"  # queued | running | succeeded | failed
    error: dict[str, str] | None = None
    result: dict[str, Any] | None = None


@dataclass
class JobRegistry:
    _jobs: dict[str, Job] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def submit(self, kind: str, fn: Callable[[], dict[str, Any]]) -> Job:
        job = Job(id=uuid.uuid4().hex, kind=kind)
        with self._lock:
            self._jobs[job.id] = job

        def worker() -> None:
            job.status = "running"
            try:
                job.result = fn()
                job.status = "succeeded"
            except VerichainError as exc:
                job.status = "failed"
                job.error = {
                    "category": "input" if isinstance(exc, InputError) else "pipeline",
                    "type": type(exc).__name__,
                    "message": str(exc),
                }
                logger.warning("job %s failed: %s", job.id, exc)
            except Exception as exc:  # pragma: no cover - defensive
                job.status = "failed"
                job.error = {"category": "internal", "type": type(exc).__name__, "message": str(exc)}
                logger.exception("job %s crashed", job.id)

        threading.Thread(target=worker, name=f"job-{kind}-{job.id[:8]}", daemon=True).start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)
