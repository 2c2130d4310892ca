"""Synthetic fingerprint corpora for benchmarks and tests.

The record stream is a pure function of (seed, count): CIDs run 1..count and
each of the 166 keys is set with probability 0.25. Generation always happens
in fixed 65,536-record chunks so the stream does not depend on how callers
consume it; the text writer and the direct shard builder therefore produce
bit-identical libraries for the same seed.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from fpscan import libstore
from fpscan.fingerprint import NUM_KEYS, PACKED_BYTES
from fpscan.libstore import Shard, ShardManifest, shard_label, split_sizes

CHUNK_RECORDS = 65536
KEY_DENSITY = 0.25

_RECORD_DTYPE = np.dtype([("cid", "<u8"), ("fp", "u1", (PACKED_BYTES,)), ("pad", "u1", (3,))])
assert _RECORD_DTYPE.itemsize == libstore.RECORD_SIZE


def _chunks(count: int, seed: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (cids, packed_fp) arrays in fixed-size chunks; cids start at 1."""
    rng = np.random.default_rng(seed)
    done = 0
    while done < count:
        n = min(CHUNK_RECORDS, count - done)
        # integers in 0..3, exactly one of four values hits: P(key set) = 0.25
        bits = (rng.integers(0, 4, size=(n, NUM_KEYS), dtype=np.uint8) == 0).astype(np.uint8)
        packed = np.packbits(bits, axis=1, bitorder="little")
        cids = np.arange(done + 1, done + n + 1, dtype=np.uint64)
        yield cids, packed
        done += n


def write_text_library(path, count: int, seed: int) -> int:
    """Write `count` synthetic library lines; identical seed gives identical bytes."""
    path = Path(path)
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for cids, packed in _chunks(count, seed):
            bits = np.unpackbits(packed, axis=1, bitorder="little")[:, :NUM_KEYS]
            blob = (bits + ord("0")).astype(np.uint8).tobytes()
            f.writelines(
                f"{cid}\t{blob[i * NUM_KEYS:(i + 1) * NUM_KEYS].decode('ascii')}\n"
                for i, cid in enumerate(cids)
            )
            written += len(cids)
    return written


def build_synthetic_library(out_dir, count: int, seed: int, shard_count: int) -> ShardManifest:
    """Build the sharded binary library for (seed, count) without a text detour.

    Produces exactly the shards `write_text_library` piped through
    `libstore.build_shards` would, but packs records straight from the
    generator, which keeps a 10M-record build to seconds.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sizes = split_sizes(count, shard_count)

    shards = []
    chunk_iter = _chunks(count, seed)
    leftover: np.ndarray | None = None  # packed records spilling into the next shard
    for i, size in enumerate(sizes):
        path = out_dir / f"shard-{i:03d}.fps"
        checksum = libstore.FNV64_OFFSET
        with open(path, "wb") as f:
            f.write(libstore.pack_header(size))
            need = size
            while need > 0:
                if leftover is None:
                    cids, packed = next(chunk_iter)
                    leftover = np.zeros(len(cids), dtype=_RECORD_DTYPE)
                    leftover["cid"] = cids
                    leftover["fp"] = packed
                take = min(need, len(leftover))
                payload = leftover[:take].tobytes()
                checksum = libstore.fnv1a_64(payload, checksum)
                f.write(payload)
                leftover = leftover[take:] if take < len(leftover) else None
                need -= take
        shards.append(
            Shard(path=path, record_count=size, dataset_label=shard_label(i), checksum=checksum)
        )
    manifest = ShardManifest(shards=tuple(shards), total_records=count)
    libstore.save_manifest(manifest, out_dir)
    return manifest
