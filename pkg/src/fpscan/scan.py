"""The search engine: parallel shard scanning, bounded top-K, deterministic merge.

Records are processed in fixed blocks of 65,536 so progress reporting and
cancellation checks amortize to nothing; the block size is deliberately a
constant, not a knob. Within a block the selected kernel computes all
distances vectorized, then only candidates that can still displace the
current worst hit are pushed through the bounded heap, so the Python-level
work per block collapses once the heap has warmed up.

Hits are totally ordered by (distance ascending, cid ascending), which makes
the result a pure function of (library bytes, query, n) regardless of worker
count or shard completion order.
"""

from __future__ import annotations

import heapq
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Literal, Sequence

import numpy as np

from fpscan import libstore
from fpscan.fingerprint import NUM_KEYS, PACKED_BYTES, Fingerprint, unpack_query
from fpscan.libstore import Shard, ShardManifest, TruncatedFile

BLOCK_RECORDS = 65536

ShardProgressFn = Callable[[int], None]  # cumulative records done within one shard
SearchProgressFn = Callable[[str, int, int], None]  # (shard label, done, total)
CancelFn = Callable[[], bool]

Kernel = Literal["packed", "reference"]


class ScanError(Exception):
    """A shard scan failed; message names the shard file."""


class DuplicateCid(ScanError):
    """Two merged parts contained the same CID, which means sharding is broken."""


class ScanCancelled(Exception):
    """Raised inside a scan when the cancellation signal is observed."""


@dataclass(frozen=True)
class SearchHit:
    cid: int
    distance: int

    def sort_key(self) -> tuple[int, int]:
        return (self.distance, self.cid)


@dataclass(frozen=True)
class TopK:
    """The K smallest hits of a stream under (distance, cid) order."""

    capacity: int
    hits: tuple[SearchHit, ...]

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if len(self.hits) > self.capacity:
            raise ValueError(f"{len(self.hits)} hits exceed capacity {self.capacity}")
        keys = [h.sort_key() for h in self.hits]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ValueError("hits must be strictly increasing under (distance, cid)")


@dataclass(frozen=True)
class SearchParams:
    n: int = 30
    parallelism: int = 1
    kernel: Kernel = "packed"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.kernel not in ("packed", "reference"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


class TopKAccumulator:
    """Bounded max-heap keyed by (distance, cid); the worst hit is evictable in O(log n).

    Stored entries are (-distance, -cid) so the heap root is the current
    worst hit under the ascending total order.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._heap: list[tuple[int, int]] = []

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def full(self) -> bool:
        return len(self._heap) >= self.capacity

    def worst(self) -> tuple[int, int]:
        """(distance, cid) of the evictable hit; only valid when non-empty."""
        d, c = self._heap[0]
        return (-d, -c)

    def offer(self, cid: int, distance: int) -> None:
        entry = (-distance, -cid)
        if len(self._heap) < self.capacity:
            heapq.heappush(self._heap, entry)
        elif entry > self._heap[0]:
            heapq.heapreplace(self._heap, entry)

    def result(self) -> TopK:
        ordered = sorted((-d, -c) for d, c in self._heap)
        return TopK(
            capacity=self.capacity,
            hits=tuple(SearchHit(cid=c, distance=d) for d, c in ordered),
        )


def _query_words(queries: Sequence[Fingerprint]) -> np.ndarray:
    return np.array([q.words for q in queries], dtype=np.uint64)


def _query_bits(queries: Sequence[Fingerprint]) -> np.ndarray:
    return np.stack([unpack_query(q) for q in queries]).astype(np.int16)


def _distances_packed(words: np.ndarray, qwords: np.ndarray) -> np.ndarray:
    """Min over queries of popcount(record XOR query), one value per record."""
    out: np.ndarray | None = None
    for q in qwords:
        d = np.bitwise_count(words ^ q).sum(axis=1, dtype=np.uint16)
        out = d if out is None else np.minimum(out, d, out=out)
    return out


def _distances_reference(words: np.ndarray, qbits: np.ndarray) -> np.ndarray:
    """Same result via the broadcast formulation: C = A - b, K = sum|C| per row."""
    raw = np.ascontiguousarray(words).view(np.uint8).reshape(len(words), 24)
    A = np.unpackbits(raw[:, :PACKED_BYTES], axis=1, bitorder="little")[:, :NUM_KEYS]
    A = A.astype(np.int16)
    out: np.ndarray | None = None
    for b in qbits:
        K = np.abs(A - b).sum(axis=1, dtype=np.uint16)
        out = K if out is None else np.minimum(out, K, out=out)
    return out


def _iter_blocks(shard: Shard) -> Iterator[np.ndarray]:
    """Yield (n, 4) little-endian uint64 views: column 0 is the CID, 1..3 the fingerprint."""
    with open(shard.path, "rb") as f:
        count = libstore.read_shard_header(f, shard.path)
        remaining = count
        while remaining > 0:
            n = min(remaining, BLOCK_RECORDS)
            buf = f.read(n * libstore.RECORD_SIZE)
            if len(buf) < n * libstore.RECORD_SIZE:
                got = count - remaining + len(buf) // libstore.RECORD_SIZE
                raise TruncatedFile(shard.path, f"holds {got} records, header declares {count}")
            yield np.frombuffer(buf, dtype="<u8").reshape(n, 4)
            remaining -= n


def _scan_shard(
    shard: Shard,
    queries: Sequence[Fingerprint],
    params: SearchParams,
    progress: ShardProgressFn | None = None,
    cancel: CancelFn | None = None,
) -> TopK:
    if params.kernel == "packed":
        qdata = _query_words(queries)
        kernel = _distances_packed
    else:
        qdata = _query_bits(queries)
        kernel = _distances_reference

    acc = TopKAccumulator(params.n)
    done = 0
    for block in _iter_blocks(shard):
        if cancel is not None and cancel():
            raise ScanCancelled(str(shard.path))
        cids = block[:, 0]
        distances = kernel(block[:, 1:4], qdata)
        if not acc.full:
            for i in np.lexsort((cids, distances))[: params.n]:
                acc.offer(int(cids[i]), int(distances[i]))
        else:
            worst_d, worst_c = acc.worst()
            candidates = np.flatnonzero(
                (distances < worst_d) | ((distances == worst_d) & (cids < worst_c))
            )
            for i in candidates:
                acc.offer(int(cids[i]), int(distances[i]))
        done += len(block)
        if progress is not None:
            progress(done)
    if done == 0 and progress is not None:
        progress(0)
    return acc.result()


def scan_shard(
    shard: Shard,
    query: Fingerprint,
    params: SearchParams,
    progress: ShardProgressFn | None = None,
    cancel: CancelFn | None = None,
) -> TopK:
    """Top-K over one shard. Progress fires at least once per 65,536 records
    and once at completion with the final count; both kernels return the
    identical TopK."""
    return _scan_shard(shard, (query,), params, progress, cancel)


def merge_topk(parts: Sequence[TopK], n: int) -> TopK:
    """The n smallest hits of the union; associative, commutative, duplicate-checking."""
    seen: set[int] = set()
    merged: list[tuple[int, int]] = []
    for part in parts:
        for hit in part.hits:
            if hit.cid in seen:
                raise DuplicateCid(f"cid {hit.cid} appears in more than one part")
            seen.add(hit.cid)
            merged.append((hit.distance, hit.cid))
    merged.sort()
    return TopK(capacity=n, hits=tuple(SearchHit(cid=c, distance=d) for d, c in merged[:n]))


def _search_multi(
    manifest: ShardManifest,
    queries: Sequence[Fingerprint],
    params: SearchParams,
    progress: SearchProgressFn | None = None,
    cancel: CancelFn | None = None,
) -> TopK:
    def run_shard(shard: Shard, cancel_fn: CancelFn | None) -> TopK:
        shard_progress = None
        if progress is not None:
            shard_progress = lambda done: progress(shard.dataset_label, done, shard.record_count)
        return _scan_shard(shard, queries, params, shard_progress, cancel_fn)

    shards = manifest.shards
    if not shards:
        return TopK(capacity=params.n, hits=())

    if params.parallelism == 1 or len(shards) == 1:
        parts = [run_shard(s, cancel) for s in shards]
        return merge_topk(parts, params.n)

    abort = threading.Event()

    def cancel_or_abort() -> bool:
        return abort.is_set() or (cancel is not None and cancel())

    with ThreadPoolExecutor(max_workers=min(params.parallelism, len(shards))) as pool:
        futures = [pool.submit(run_shard, s, cancel_or_abort) for s in shards]
        parts = []
        first_error: Exception | None = None
        error_shard: Shard | None = None
        cancelled: ScanCancelled | None = None
        for shard, fut in zip(shards, futures):
            try:
                parts.append(fut.result())
            except ScanCancelled as exc:
                cancelled = cancelled or exc
                abort.set()
            except Exception as exc:
                # futures are visited in shard order, so the first caught
                # exception belongs to the earliest failing shard
                if first_error is None:
                    first_error, error_shard = exc, shard
                abort.set()
    if first_error is not None:
        raise ScanError(f"shard {error_shard.path}: {first_error}") from first_error
    if cancelled is not None:
        raise cancelled
    return merge_topk(parts, params.n)


def search(
    manifest: ShardManifest,
    query: Fingerprint,
    params: SearchParams,
    progress: SearchProgressFn | None = None,
    cancel: CancelFn | None = None,
) -> TopK:
    """Search the whole library; equal to merge_topk over per-shard scans.

    The output does not depend on params.parallelism or shard completion
    order. The first shard error aborts the search and is reported with the
    shard path.
    """
    return _search_multi(manifest, (query,), params, progress, cancel)


def batch_search(
    manifest: ShardManifest,
    queries: Sequence[Fingerprint],
    params: SearchParams,
    progress: SearchProgressFn | None = None,
    cancel: CancelFn | None = None,
) -> TopK:
    """Nearest-to-query-set search: each record scores min over queries of its
    distance, then the usual (distance, cid) top-K. A singleton batch is
    exactly `search`."""
    if not queries:
        raise ValueError("batch_search requires at least one query")
    return _search_multi(manifest, tuple(queries), params, progress, cancel)
