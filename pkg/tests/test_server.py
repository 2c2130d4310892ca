import random
import time

import pytest
from fastapi.testclient import TestClient

from fpscan import synth
from fpscan.fingerprint import NUM_KEYS, to_bitstring
from fpscan.jobs import JobQueue
from fpscan.libstore import read_shard
from fpscan.scan import SearchParams, search
from fpscan.server import create_app

import molfixtures as fx

ERROR_CODES = {"invalid_request", "unknown_job", "not_finished", "queue_full", "internal"}


def random_bitstring(rng: random.Random) -> str:
    return "".join(rng.choice("01") for _ in range(NUM_KEYS))


def wait_done(client, job_id: str, timeout: float = 30.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/api/v1/jobs/{job_id}").json()
        if body["state"] in ("done", "failed", "cancelled"):
            return body
        time.sleep(0.005)
    raise TimeoutError(job_id)


def assert_error_body(response, status: int, code: str):
    assert response.status_code == status
    body = response.json()
    assert body["code"] == code
    assert body["code"] in ERROR_CODES
    assert isinstance(body["message"], str) and body["message"]


@pytest.fixture(scope="module")
def library(tmp_path_factory):
    manifest = synth.build_synthetic_library(
        tmp_path_factory.mktemp("apilib"), 10_000, seed=31, shard_count=3
    )
    return manifest


@pytest.fixture(scope="module")
def client(library):
    queue = JobQueue(library, workers=2)
    app = create_app(library, queue, cors_origins=("http://localhost:5173",))
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c
    queue.shutdown()


class TestSubmit:
    def test_valid_bitstring_202(self, client):
        rng = random.Random(1)
        r = client.post("/api/v1/search", json={"query": random_bitstring(rng)})
        assert r.status_code == 202
        body = r.json()
        assert "job_id" in body
        assert r.headers["location"] == f"/api/v1/jobs/{body['job_id']}"

    def test_query_and_batch_together_rejected(self, client):
        rng = random.Random(2)
        r = client.post(
            "/api/v1/search",
            json={"query": random_bitstring(rng), "batch": [random_bitstring(rng)]},
        )
        assert_error_body(r, 400, "invalid_request")

    def test_neither_query_nor_batch(self, client):
        assert_error_body(client.post("/api/v1/search", json={"n": 5}), 400, "invalid_request")

    def test_short_bitstring_names_length_rule(self, client):
        r = client.post("/api/v1/search", json={"query": "0" * 163})
        assert_error_body(r, 400, "invalid_request")
        assert "166" in r.json()["message"]

    def test_bad_n(self, client):
        rng = random.Random(3)
        q = random_bitstring(rng)
        for n in (0, -3, "five", 1.5, True):
            assert_error_body(
                client.post("/api/v1/search", json={"query": q, "n": n}), 400, "invalid_request"
            )

    def test_malformed_json(self, client):
        r = client.post(
            "/api/v1/search", content=b"{nope", headers={"content-type": "application/json"}
        )
        assert_error_body(r, 400, "invalid_request")

    def test_molfile_query_carries_coverage_warning(self, client):
        r = client.post(
            "/api/v1/search", json={"query": fx.CYCLOPROPANE, "query_kind": "molfile"}
        )
        assert r.status_code == 202
        warning = r.json()["warning"]
        assert len(warning["unsupported_keys"]) == NUM_KEYS - 17
        assert 8 in warning["unsupported_keys"]
        assert 22 not in warning["unsupported_keys"]

    def test_bad_molfile_query(self, client):
        r = client.post("/api/v1/search", json={"query": "garbage", "query_kind": "molfile"})
        assert_error_body(r, 400, "invalid_request")

    def test_batch_submission(self, client):
        rng = random.Random(4)
        r = client.post("/api/v1/search", json={"batch": [random_bitstring(rng) for _ in range(3)]})
        assert r.status_code == 202

    def test_batch_entry_error_names_index(self, client):
        rng = random.Random(5)
        r = client.post(
            "/api/v1/search", json={"batch": [random_bitstring(rng), "xyz"]}
        )
        assert_error_body(r, 400, "invalid_request")
        assert r.json()["detail"]["index"] == 1

    def test_queue_full_429(self, tmp_path):
        manifest = synth.build_synthetic_library(tmp_path, 400_000, seed=32, shard_count=1)
        queue = JobQueue(manifest, workers=1, queue_bound=1)
        app = create_app(manifest, queue)
        rng = random.Random(6)
        try:
            with TestClient(app) as c:
                statuses = [
                    c.post("/api/v1/search", json={"query": random_bitstring(rng)}).status_code
                    for _ in range(6)
                ]
            assert 429 in statuses
            assert statuses[0] == 202
        finally:
            queue.shutdown()


class TestStatus:
    def test_three_shard_labels(self, client):
        rng = random.Random(7)
        job_id = client.post("/api/v1/search", json={"query": random_bitstring(rng)}).json()["job_id"]
        body = wait_done(client, job_id)
        assert [s["label"] for s in body["shards"]] == ["A", "B", "C"]
        assert body["progress"] == 1.0
        assert body["state"] == "done"
        for s in body["shards"]:
            assert s["done"] == s["total"]
        assert body["timestamps"]["finished_at"] is not None

    def test_unknown_job_404(self, client):
        assert_error_body(client.get("/api/v1/jobs/" + "ab" * 16), 404, "unknown_job")

    def test_poll_progress_never_regresses(self, client):
        rng = random.Random(8)
        job_id = client.post("/api/v1/search", json={"query": random_bitstring(rng)}).json()["job_id"]
        last = -1.0
        while True:
            body = client.get(f"/api/v1/jobs/{job_id}").json()
            assert body["progress"] >= last
            last = body["progress"]
            if body["state"] in ("done", "failed", "cancelled"):
                break


class TestResults:
    def test_hits_match_library_scan(self, client, library):
        rng = random.Random(9)
        bits = random_bitstring(rng)
        job_id = client.post("/api/v1/search", json={"query": bits, "n": 30}).json()["job_id"]
        wait_done(client, job_id)
        r = client.get(f"/api/v1/jobs/{job_id}/results")
        assert r.status_code == 200
        body = r.json()
        assert body["n"] == 30
        assert isinstance(body["elapsed_ms"], float)
        from fpscan.fingerprint import parse_bitstring

        direct = search(library, parse_bitstring(bits), SearchParams(n=30))
        assert body["hits"] == [{"cid": h.cid, "distance": h.distance} for h in direct.hits]

    def test_results_sorted_by_distance_then_cid(self, client):
        rng = random.Random(10)
        job_id = client.post("/api/v1/search", json={"query": random_bitstring(rng), "n": 100}).json()[
            "job_id"
        ]
        wait_done(client, job_id)
        hits = client.get(f"/api/v1/jobs/{job_id}/results").json()["hits"]
        keys = [(h["distance"], h["cid"]) for h in hits]
        assert keys == sorted(keys)

    def test_self_retrieval_distance_zero(self, client, library):
        record = next(read_shard(library.shards[0]))
        job_id = client.post(
            "/api/v1/search", json={"query": to_bitstring(record.fp)}
        ).json()["job_id"]
        wait_done(client, job_id)
        first = client.get(f"/api/v1/jobs/{job_id}/results").json()["hits"][0]
        assert first["distance"] == 0

    def test_results_idempotent(self, client):
        rng = random.Random(11)
        job_id = client.post("/api/v1/search", json={"query": random_bitstring(rng)}).json()["job_id"]
        wait_done(client, job_id)
        a = client.get(f"/api/v1/jobs/{job_id}/results")
        b = client.get(f"/api/v1/jobs/{job_id}/results")
        assert a.json() == b.json()

    def test_unknown_job_404(self, client):
        assert_error_body(client.get("/api/v1/jobs/" + "cd" * 16 + "/results"), 404, "unknown_job")

    def test_failed_job_maps_to_internal(self, tmp_path):
        manifest = synth.build_synthetic_library(tmp_path, 1000, seed=33, shard_count=1)
        queue = JobQueue(manifest, workers=1)
        app = create_app(manifest, queue)
        rng = random.Random(12)
        try:
            manifest.shards[0].path.unlink()
            with TestClient(app) as c:
                job_id = c.post("/api/v1/search", json={"query": random_bitstring(rng)}).json()[
                    "job_id"
                ]
                body = wait_done(c, job_id)
                assert body["state"] == "failed"
                assert "error" in body
                assert_error_body(c.get(f"/api/v1/jobs/{job_id}/results"), 500, "internal")
        finally:
            queue.shutdown()


class TestLibraryEndpoint:
    def test_totals_match_manifest(self, client, library):
        body = client.get("/api/v1/library").json()
        assert body["total_records"] == 10_000
        assert body["format_version"] == 1
        assert sum(s["record_count"] for s in body["shards"]) == body["total_records"]
        assert [s["label"] for s in body["shards"]] == ["A", "B", "C"]

    def test_no_library_503(self):
        app = create_app(None, None)
        with TestClient(app) as c:
            assert_error_body(c.get("/api/v1/library"), 503, "internal")
            assert_error_body(c.post("/api/v1/search", json={"query": "0"}), 503, "internal")


class TestCancelEndpoint:
    def test_delete_done_job_is_noop(self, client):
        rng = random.Random(13)
        job_id = client.post("/api/v1/search", json={"query": random_bitstring(rng)}).json()["job_id"]
        wait_done(client, job_id)
        first = client.delete(f"/api/v1/jobs/{job_id}")
        second = client.delete(f"/api/v1/jobs/{job_id}")
        assert first.status_code == second.status_code == 200
        assert first.json() == second.json() == {"state": "done"}

    def test_delete_queued_job_cancels(self, tmp_path):
        manifest = synth.build_synthetic_library(tmp_path, 400_000, seed=34, shard_count=1)
        queue = JobQueue(manifest, workers=1)
        app = create_app(manifest, queue)
        rng = random.Random(14)
        try:
            with TestClient(app) as c:
                c.post("/api/v1/search", json={"query": random_bitstring(rng)})  # occupies worker
                victim = c.post("/api/v1/search", json={"query": random_bitstring(rng)}).json()[
                    "job_id"
                ]
                r = c.delete(f"/api/v1/jobs/{victim}")
                assert r.status_code == 200
                assert r.json()["state"] in ("cancelled", "running")
                body = wait_done(c, victim, timeout=10)
                assert body["state"] == "cancelled"
                assert_error_body(c.get(f"/api/v1/jobs/{victim}/results"), 409, "not_finished")
        finally:
            queue.shutdown()

    def test_delete_unknown_404(self, client):
        assert_error_body(client.delete("/api/v1/jobs/" + "ef" * 16), 404, "unknown_job")


class TestCors:
    def test_cors_headers_for_configured_origin(self, client):
        r = client.get("/api/v1/library", headers={"origin": "http://localhost:5173"})
        assert r.headers.get("access-control-allow-origin") == "http://localhost:5173"
