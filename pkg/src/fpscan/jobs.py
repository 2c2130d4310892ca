"""Asynchronous search jobs: immediate acknowledgement, observable progress.

Submission and computation are decoupled by an in-process FIFO queue and a
worker pool. Submitting returns a fresh job id at once; the scan runs when a
worker frees up, publishing per-shard progress that status polls read under
the same lock, so a snapshot can never mix numbers from two updates.

Jobs are ephemeral: completed jobs (and their results) are evicted after a
TTL, and nothing survives a restart. Searches are cheap to resubmit.
"""

from __future__ import annotations

import queue as queue_mod
import secrets
import threading
import time
from dataclasses import dataclass
from enum import Enum

from fpscan import scan
from fpscan.fingerprint import Fingerprint
from fpscan.libstore import ShardManifest
from fpscan.scan import ScanCancelled, SearchParams, TopK

DEFAULT_QUEUE_BOUND = 128
DEFAULT_RESULT_TTL = 3600.0


class JobState(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    CANCELLED = "cancelled"


TERMINAL_STATES = frozenset({JobState.DONE, JobState.FAILED, JobState.CANCELLED})


class JobError(Exception):
    pass


class InvalidRequest(JobError):
    def __init__(self, message: str, detail: dict | None = None):
        super().__init__(message)
        self.detail = detail or {}


class QueueFull(JobError):
    pass


class UnknownJob(JobError):
    def __init__(self, job_id: str):
        super().__init__(f"no job {job_id!r}")
        self.job_id = job_id


class NotFinished(JobError):
    def __init__(self, job_id: str, state: JobState):
        super().__init__(f"job {job_id} is {state.value}, results not available")
        self.state = state


class JobFailed(JobError):
    def __init__(self, job_id: str, state: JobState, error: str):
        super().__init__(f"job {job_id} {state.value}: {error}")
        self.state = state
        self.error = error


@dataclass(frozen=True)
class SearchRequest:
    queries: tuple[Fingerprint, ...]
    params: SearchParams

    def __post_init__(self):
        if not self.queries:
            raise InvalidRequest("request needs at least one query fingerprint")


@dataclass(frozen=True)
class ShardProgress:
    label: str
    records_done: int
    record_count: int


@dataclass(frozen=True)
class JobSnapshot:
    """Point-in-time view of a job, without the result payload."""

    id: str
    state: JobState
    shard_progress: tuple[ShardProgress, ...]
    submitted_at: float
    started_at: float | None
    finished_at: float | None
    error: str | None

    def progress_fraction(self) -> float:
        total = sum(p.record_count for p in self.shard_progress)
        if total == 0:
            return 1.0 if self.state in TERMINAL_STATES else 0.0
        return sum(p.records_done for p in self.shard_progress) / total


class _Job:
    def __init__(self, job_id: str, request: SearchRequest, manifest: ShardManifest, now: float):
        self.id = job_id
        self.request = request
        self.state = JobState.QUEUED
        self.submitted_at = now
        self.started_at: float | None = None
        self.finished_at: float | None = None
        self.error: str | None = None
        self.result: TopK | None = None
        self.cancel_event = threading.Event()
        self.labels = [s.dataset_label for s in manifest.shards]
        self.done_per_shard = {s.dataset_label: 0 for s in manifest.shards}
        self.totals = {s.dataset_label: s.record_count for s in manifest.shards}

    def snapshot(self) -> JobSnapshot:
        return JobSnapshot(
            id=self.id,
            state=self.state,
            shard_progress=tuple(
                ShardProgress(lbl, self.done_per_shard[lbl], self.totals[lbl])
                for lbl in self.labels
            ),
            submitted_at=self.submitted_at,
            started_at=self.started_at,
            finished_at=self.finished_at,
            error=self.error,
        )


class JobQueue:
    """FIFO search-job queue over one immutable library.

    submit/status/results/cancel are safe to call concurrently; state
    transitions and progress updates are atomic under one lock.
    """

    def __init__(
        self,
        manifest: ShardManifest,
        workers: int = 1,
        queue_bound: int = DEFAULT_QUEUE_BOUND,
        result_ttl: float = DEFAULT_RESULT_TTL,
        scan_parallelism: int | None = None,
    ):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.manifest = manifest
        # by default every shard scans concurrently so all progress bars advance
        self.scan_parallelism = scan_parallelism or max(1, len(manifest.shards))
        self.result_ttl = result_ttl
        self._lock = threading.Lock()
        self._jobs: dict[str, _Job] = {}
        self._queue: queue_mod.Queue[str] = queue_mod.Queue(maxsize=queue_bound)
        self._stop = threading.Event()
        self._workers = [
            threading.Thread(target=self._worker_loop, name=f"fpscan-worker-{i}", daemon=True)
            for i in range(workers)
        ]
        for t in self._workers:
            t.start()

    # ---- public API -------------------------------------------------------

    def submit(self, request: SearchRequest) -> str:
        self._sweep()
        job_id = secrets.token_hex(16)
        job = _Job(job_id, request, self.manifest, time.time())
        with self._lock:
            self._jobs[job_id] = job
        try:
            self._queue.put_nowait(job_id)
        except queue_mod.Full:
            with self._lock:
                del self._jobs[job_id]
            raise QueueFull(f"queue holds its maximum of {self._queue.maxsize} jobs") from None
        return job_id

    def status(self, job_id: str) -> JobSnapshot:
        self._sweep()
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(job_id)
            return job.snapshot()

    def results(self, job_id: str) -> TopK:
        self._sweep()
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(job_id)
            if job.state in (JobState.QUEUED, JobState.RUNNING):
                raise NotFinished(job_id, job.state)
            if job.state is JobState.FAILED:
                raise JobFailed(job_id, job.state, job.error or "unknown error")
            if job.state is JobState.CANCELLED:
                raise JobFailed(job_id, job.state, "job was cancelled")
            assert job.result is not None
            return job.result

    def cancel(self, job_id: str) -> JobState:
        """Cancel a job; terminal jobs are acknowledged unchanged (idempotent).

        A queued job is cancelled immediately and will never run. A running
        job observes the flag at its next scan block boundary; the returned
        state is still `running` until that happens.
        """
        self._sweep()
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise UnknownJob(job_id)
            if job.state is JobState.QUEUED:
                job.state = JobState.CANCELLED
                job.finished_at = time.time()
            elif job.state is JobState.RUNNING:
                job.cancel_event.set()
            return job.state

    def shutdown(self, timeout: float = 10.0) -> int:
        """Stop workers, cancelling running and queued jobs; returns how many were running."""
        self._stop.set()
        now = time.time()
        with self._lock:
            running = [j for j in self._jobs.values() if j.state is JobState.RUNNING]
            for job in running:
                job.cancel_event.set()
            for job in self._jobs.values():
                if job.state is JobState.QUEUED:
                    job.state = JobState.CANCELLED
                    job.finished_at = now
        for t in self._workers:
            t.join(timeout=timeout)
        return len(running)

    # ---- internals --------------------------------------------------------

    def _sweep(self) -> None:
        deadline = time.time() - self.result_ttl
        with self._lock:
            expired = [
                jid
                for jid, job in self._jobs.items()
                if job.state in TERMINAL_STATES
                and job.finished_at is not None
                and job.finished_at < deadline
            ]
            for jid in expired:
                del self._jobs[jid]

    def _worker_loop(self) -> None:
        while not self._stop.is_set():
            try:
                job_id = self._queue.get(timeout=0.2)
            except queue_mod.Empty:
                continue
            with self._lock:
                job = self._jobs.get(job_id)
                if job is None or job.state is not JobState.QUEUED:
                    continue  # cancelled while queued, or already evicted
                if self._stop.is_set():
                    job.state = JobState.CANCELLED
                    job.finished_at = time.time()
                    continue
                job.state = JobState.RUNNING
                job.started_at = time.time()
            self._run(job)

    def _run(self, job: _Job) -> None:
        def progress(label: str, done: int, total: int) -> None:
            with self._lock:
                job.done_per_shard[label] = done

        def cancelled() -> bool:
            return job.cancel_event.is_set() or self._stop.is_set()

        try:
            result = scan.batch_search(
                self.manifest,
                job.request.queries,
                job.request.params,
                progress=progress,
                cancel=cancelled,
            )
        except ScanCancelled:
            with self._lock:
                job.state = JobState.CANCELLED
                job.finished_at = time.time()
        except Exception as exc:
            with self._lock:
                job.state = JobState.FAILED
                job.error = str(exc)
                job.finished_at = time.time()
        else:
            with self._lock:
                job.state = JobState.DONE
                job.result = result
                job.finished_at = time.time()
