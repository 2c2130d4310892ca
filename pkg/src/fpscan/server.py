"""HTTP facade over the job queue and library: the surface the browser UI consumes.

Search over HTTP is async-only: POST returns 202 with a job id and the
client polls the job until done, mirroring the queue-decoupled design. Every
error body carries a code from the closed set {invalid_request, unknown_job,
not_finished, queue_full, internal}.

Endpoints (all JSON, UTF-8):
    POST   /api/v1/search                submit a search, 202 {job_id}
    GET    /api/v1/jobs/{id}             status + per-shard progress
    GET    /api/v1/jobs/{id}/results     hits once done
    GET    /api/v1/library               totals the UI shows under the box
    DELETE /api/v1/jobs/{id}             cancel (idempotent)
"""

from __future__ import annotations

import json
from datetime import datetime, timezone

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from fpscan import molfile
from fpscan.fingerprint import NUM_KEYS, Fingerprint, FingerprintError, parse_bitstring
from fpscan.jobs import (
    JobFailed,
    JobQueue,
    JobState,
    NotFinished,
    QueueFull,
    SearchRequest,
    UnknownJob,
)
from fpscan.libstore import ShardManifest
from fpscan.scan import SearchParams

DEFAULT_TOP_N = 30

UNSUPPORTED_KEYS = sorted(set(range(1, NUM_KEYS + 1)) - molfile.SUPPORTED_KEYS)


def _error(status: int, code: str, message: str, detail: dict | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if detail:
        body["detail"] = detail
    return JSONResponse(body, status_code=status)


def _invalid(message: str, detail: dict | None = None) -> JSONResponse:
    return _error(400, "invalid_request", message, detail)


def _iso(ts: float | None) -> str | None:
    if ts is None:
        return None
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def _parse_query_fp(body: dict) -> tuple[Fingerprint, dict | None] | JSONResponse:
    """Resolve body['query'] to a fingerprint; molfile queries add a coverage warning."""
    kind = body.get("query_kind", "bitstring")
    if kind not in ("bitstring", "molfile"):
        return _invalid(f"unknown query_kind {kind!r}", {"field": "query_kind"})
    query = body["query"]
    if not isinstance(query, str):
        return _invalid("query must be a string", {"field": "query"})
    if kind == "bitstring":
        try:
            return parse_bitstring(query.strip()), None
        except FingerprintError as exc:
            return _invalid(str(exc), {"field": "query"})
    try:
        mol = molfile.parse_molfile(query)
    except molfile.MolfileError as exc:
        return _invalid(f"molfile query: {exc}", {"field": "query"})
    coverage = molfile.compute_subset_keys(mol)
    warning = {
        "message": (
            f"molfile queries cover only {len(coverage.supported)} of {NUM_KEYS} keys; "
            "the remaining keys are treated as zero"
        ),
        "unsupported_keys": UNSUPPORTED_KEYS,
    }
    return coverage.computed, warning


def create_app(
    manifest: ShardManifest | None,
    queue: JobQueue | None,
    cors_origins: tuple[str, ...] = (),
) -> FastAPI:
    app = FastAPI(title="fpscan", docs_url=None, redoc_url=None)

    if cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception) -> JSONResponse:
        return _error(500, "internal", f"{type(exc).__name__}: {exc}")

    @app.post("/api/v1/search", status_code=202)
    async def submit_search(request: Request) -> Response:
        if manifest is None or queue is None:
            return _error(503, "internal", "no library is loaded")
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return _invalid(f"body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            return _invalid("body must be a JSON object")

        has_query = "query" in body
        has_batch = "batch" in body
        if has_query == has_batch:
            return _invalid("exactly one of `query` and `batch` must be present")

        n = body.get("n", DEFAULT_TOP_N)
        if type(n) is not int or n < 1:
            return _invalid("`n` must be a positive integer", {"field": "n"})

        warning = None
        if has_query:
            parsed = _parse_query_fp(body)
            if isinstance(parsed, JSONResponse):
                return parsed
            fp, warning = parsed
            queries = (fp,)
        else:
            batch = body["batch"]
            if body.get("query_kind", "bitstring") != "bitstring":
                return _invalid("batch entries must be bitstrings", {"field": "query_kind"})
            if not isinstance(batch, list) or not batch:
                return _invalid("`batch` must be a non-empty list of bitstrings", {"field": "batch"})
            parsed_batch = []
            for i, item in enumerate(batch):
                if not isinstance(item, str):
                    return _invalid(f"batch[{i}] must be a string", {"field": "batch", "index": i})
                try:
                    parsed_batch.append(parse_bitstring(item.strip()))
                except FingerprintError as exc:
                    return _invalid(f"batch[{i}]: {exc}", {"field": "batch", "index": i})
            queries = tuple(parsed_batch)

        params = SearchParams(n=n, parallelism=queue.scan_parallelism)
        try:
            job_id = queue.submit(SearchRequest(queries=queries, params=params))
        except QueueFull as exc:
            return _error(429, "queue_full", str(exc))
        payload = {"job_id": job_id}
        if warning is not None:
            payload["warning"] = warning
        return JSONResponse(payload, status_code=202, headers={"Location": f"/api/v1/jobs/{job_id}"})

    @app.get("/api/v1/jobs/{job_id}")
    async def job_status(job_id: str) -> Response:
        if queue is None:
            return _error(503, "internal", "no library is loaded")
        try:
            snap = queue.status(job_id)
        except UnknownJob as exc:
            return _error(404, "unknown_job", str(exc))
        body = {
            "state": snap.state.value,
            "progress": snap.progress_fraction(),
            "shards": [
                {"label": p.label, "done": p.records_done, "total": p.record_count}
                for p in snap.shard_progress
            ],
            "timestamps": {
                "submitted_at": _iso(snap.submitted_at),
                "started_at": _iso(snap.started_at),
                "finished_at": _iso(snap.finished_at),
            },
        }
        if snap.error is not None:
            body["error"] = snap.error
        return JSONResponse(body)

    @app.get("/api/v1/jobs/{job_id}/results")
    async def job_results(job_id: str) -> Response:
        if queue is None:
            return _error(503, "internal", "no library is loaded")
        try:
            top = queue.results(job_id)
        except UnknownJob as exc:
            return _error(404, "unknown_job", str(exc))
        except NotFinished as exc:
            return _error(409, "not_finished", str(exc), {"state": exc.state.value})
        except JobFailed as exc:
            if exc.state is JobState.CANCELLED:
                return _error(409, "not_finished", str(exc), {"state": exc.state.value})
            return _error(500, "internal", str(exc), {"state": exc.state.value})
        snap = queue.status(job_id)
        elapsed_ms = None
        if snap.started_at is not None and snap.finished_at is not None:
            elapsed_ms = (snap.finished_at - snap.started_at) * 1000.0
        return JSONResponse(
            {
                "hits": [{"cid": h.cid, "distance": h.distance} for h in top.hits],
                "n": top.capacity,
                "elapsed_ms": elapsed_ms,
            }
        )

    @app.get("/api/v1/library")
    async def library_info() -> Response:
        if manifest is None:
            return _error(503, "internal", "no library is loaded")
        return JSONResponse(
            {
                "total_records": manifest.total_records,
                "shards": [
                    {"label": s.dataset_label, "record_count": s.record_count}
                    for s in manifest.shards
                ],
                "format_version": manifest.format_version,
            }
        )

    @app.delete("/api/v1/jobs/{job_id}")
    async def job_cancel(job_id: str) -> Response:
        if queue is None:
            return _error(503, "internal", "no library is loaded")
        try:
            state = queue.cancel(job_id)
        except UnknownJob as exc:
            return _error(404, "unknown_job", str(exc))
        return JSONResponse({"state": state.value})

    return app
