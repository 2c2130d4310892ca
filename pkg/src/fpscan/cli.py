"""Command-line entry point.

Exit codes: 0 success, 1 environment or data error, 2 usage error. Data goes
to stdout, diagnostics to stderr, so output can be piped.
"""

from __future__ import annotations

import json
import socket
import time
from pathlib import Path

import click

from fpscan import libstore, molfile, scan, synth
from fpscan.fingerprint import (
    NUM_KEYS,
    Fingerprint,
    FingerprintError,
    parse_bitstring,
    to_bitstring,
)
from fpscan.libstore import LibstoreError, load_manifest, validate_manifest
from fpscan.scan import SearchParams

PAPER_LIBRARY_SIZE = 95_417_114
PAPER_SCAN_SECONDS = 3600.0  # full-corpus scan "within one hour"


def _load_library(library_dir: str) -> libstore.ShardManifest:
    try:
        return load_manifest(library_dir)
    except LibstoreError as exc:
        raise click.ClickException(str(exc)) from exc


def _resolve_query(query: str) -> Fingerprint:
    if query.startswith("@"):
        try:
            text = Path(query[1:]).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise click.ClickException(f"cannot read query file: {exc}") from exc
    else:
        text = query.strip()
    try:
        return parse_bitstring(text)
    except FingerprintError as exc:
        raise click.UsageError(f"invalid query bitstring: {exc}") from exc


@click.group(context_settings={"auto_envvar_prefix": "FPSCAN"})
@click.version_option()
def main() -> None:
    """Similarity search over massive molecular fingerprint libraries.

    Every flag can also come from the environment as FPSCAN_<COMMAND>_<FLAG>,
    e.g. FPSCAN_SERVE_LISTEN=0.0.0.0:8080.
    """


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--shards", default=3, show_default=True, type=click.IntRange(min=1))
def build(input_path: str, out_dir: str, shards: int) -> None:
    """Pack a text library (CID<TAB>bitstring lines) into binary shards."""
    try:
        with open(input_path, encoding="utf-8") as f:
            manifest = libstore.build_shards(f, shards, out_dir)
    except (LibstoreError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{manifest.total_records} records in {len(manifest.shards)} shards -> {out_dir}")


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--query", required=True, help="166-char bitstring, or @file containing one.")
@click.option("--n", default=30, show_default=True, type=click.IntRange(min=1))
@click.option("--parallel", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--kernel", default="packed", show_default=True,
              type=click.Choice(["packed", "reference"]))
@click.option("--format", "fmt", default="text", show_default=True,
              type=click.Choice(["text", "json"]))
def search(library_dir: str, query: str, n: int, parallel: int, kernel: str, fmt: str) -> None:
    """Synchronous top-N search; prints `rank cid distance` lines."""
    manifest = _load_library(library_dir)
    fp = _resolve_query(query)
    params = SearchParams(n=n, parallelism=parallel, kernel=kernel)
    started = time.perf_counter()
    try:
        top = scan.search(manifest, fp, params)
    except (scan.ScanError, LibstoreError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    if fmt == "json":
        click.echo(json.dumps({
            "hits": [{"rank": i, "cid": h.cid, "distance": h.distance}
                     for i, h in enumerate(top.hits, start=1)],
            "n": n,
            "elapsed_ms": elapsed_ms,
        }))
    else:
        for i, hit in enumerate(top.hits, start=1):
            click.echo(f"{i} {hit.cid} {hit.distance}")


@main.command()
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--count", required=True, type=click.IntRange(min=0))
@click.option("--seed", default=0, show_default=True, type=int)
def gen(out_path: str, count: int, seed: int) -> None:
    """Generate a synthetic text library: CIDs 1..count, keys set with p=0.25."""
    try:
        written = synth.write_text_library(out_path, count, seed)
    except OSError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {written} records to {out_path}", err=True)


@main.command("ingest-sdf")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--cid-prop", default="PUBCHEM_COMPOUND_CID", show_default=True,
              help="SDF data item holding the CID; records without it get sequential CIDs.")
def ingest_sdf(input_path: str, out_path: str, cid_prop: str) -> None:
    """Convert an SDF file to library lines using the connectivity-decidable keys."""
    supported = sorted(molfile.SUPPORTED_KEYS)
    click.echo(
        f"note: only {len(supported)} of {NUM_KEYS} keys are computed from structure "
        f"({', '.join(map(str, supported))}); all pattern keys stay zero",
        err=True,
    )
    written = skipped = 0
    try:
        text = Path(input_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.ClickException(str(exc)) from exc
    with open(out_path, "w", encoding="utf-8", newline="\n") as out:
        for index, (record_text, _) in enumerate(molfile.split_sdf(text), start=1):
            try:
                mol = molfile.parse_molfile(record_text)
                coverage = molfile.compute_subset_keys(mol)
                props = molfile.sdf_properties(record_text)
                raw_cid = props.get(cid_prop)
                if raw_cid is not None:
                    if not (raw_cid.isascii() and raw_cid.isdigit()) or int(raw_cid) == 0:
                        raise libstore.BadCid(raw_cid)
                    cid = int(raw_cid)
                else:
                    cid = index
                out.write(f"{cid}\t{to_bitstring(coverage.computed)}\n")
                written += 1
            except (molfile.MolfileError, LibstoreError) as exc:
                skipped += 1
                click.echo(f"record {index}: {exc}; skipped", err=True)
    click.echo(f"{written} records written, {skipped} skipped", err=True)


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--queries", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--parallel", default=4, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--format", "fmt", default="text", show_default=True,
              type=click.Choice(["text", "json"]))
def bench(library_dir: str, queries: int, parallel: int, seed: int, fmt: str) -> None:
    """Measure scan throughput per kernel and worker count."""
    import numpy as np

    manifest = _load_library(library_dir)
    rng = np.random.default_rng(seed)
    fps = [
        Fingerprint.from_keys(np.flatnonzero(rng.integers(0, 4, NUM_KEYS) == 0) + 1)
        for _ in range(queries)
    ]
    baseline = PAPER_LIBRARY_SIZE / PAPER_SCAN_SECONDS
    worker_counts = [1] if parallel == 1 else [1, parallel]
    results = []
    total_wall = 0.0
    for kernel in ("packed", "reference"):
        for workers in worker_counts:
            params = SearchParams(n=30, parallelism=workers, kernel=kernel)
            started = time.perf_counter()
            for fp in fps:
                scan.search(manifest, fp, params)
            wall = time.perf_counter() - started
            total_wall += wall
            rate = manifest.total_records * queries / wall
            results.append(
                {"kernel": kernel, "workers": workers, "records_per_s": round(rate, 1),
                 "wall_s": round(wall, 4)}
            )
            if fmt == "text":
                click.echo(
                    f"kernel={kernel} workers={workers}: {rate:,.0f} records/s "
                    f"({wall:.2f}s for {queries} queries x {manifest.total_records:,} records)"
                )
    if fmt == "text":
        click.echo(
            f"comparison baseline: {PAPER_LIBRARY_SIZE:,} records/hour "
            f"= {baseline:,.0f} records/s"
        )
    summary = {
        "total_records": manifest.total_records,
        "queries": queries,
        "results": results,
        "baseline_records_per_s": round(baseline, 1),
        "total_wall_s": round(total_wall, 4),
    }
    click.echo(json.dumps(summary))


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--listen", default="127.0.0.1:8080", show_default=True)
@click.option("--workers", default=2, show_default=True, type=click.IntRange(min=1),
              help="Concurrent jobs.")
@click.option("--scan-parallel", default=None, type=click.IntRange(min=1),
              help="Worker threads per scan; defaults to the shard count.")
@click.option("--queue-bound", default=128, show_default=True, type=click.IntRange(min=1))
@click.option("--result-ttl", default=3600.0, show_default=True, type=float)
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Origin allowed to call the API; repeatable.")
def serve(library_dir: str, listen: str, workers: int, scan_parallel: int | None,
          queue_bound: int, result_ttl: float, cors_origins: tuple[str, ...]) -> None:
    """Serve the HTTP API until interrupted; shutdown cancels running jobs."""
    import uvicorn

    from fpscan.jobs import JobQueue
    from fpscan.server import create_app

    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--listen must be HOST:PORT, got {listen!r}")
    port = int(port_text)

    manifest = _load_library(library_dir)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {listen}: {exc}") from exc
    finally:
        probe.close()

    queue = JobQueue(
        manifest,
        workers=workers,
        queue_bound=queue_bound,
        result_ttl=result_ttl,
        scan_parallelism=scan_parallel,
    )
    app = create_app(manifest, queue, cors_origins=cors_origins)
    click.echo(
        f"serving {manifest.total_records:,} records on http://{listen} "
        f"({len(manifest.shards)} shards)",
        err=True,
    )
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        cancelled = queue.shutdown()
        click.echo(f"shutdown: cancelled {cancelled} running job(s)", err=True)


@main.command()
@click.option("--library", "library_dir", required=True, type=click.Path(exists=True, file_okay=False))
def validate(library_dir: str) -> None:
    """Check shard files against the manifest; exit 0 only if clean."""
    manifest = _load_library(library_dir)
    violations = validate_manifest(manifest)
    for v in violations:
        click.echo(str(v))
    if violations:
        raise SystemExit(1)
    click.echo(f"ok: {manifest.total_records} records in {len(manifest.shards)} shards")


if __name__ == "__main__":
    main()
