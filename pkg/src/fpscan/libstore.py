"""Library persistence: text interchange lines, packed binary shards, manifests.

Text form: one record per line, `<decimal CID><TAB><166-char bitstring>`.

Binary shard layout (bit-exact, little-endian throughout):
    header, 16 bytes:  magic "FPS1" | u16 format_version (=1) | 2 zero bytes
                       | u64 record_count
    records, 32 bytes each:  u64 CID | 21 fingerprint bytes
                             (key j at byte (j-1)//8, bit (j-1)%8, final two
                             bits of byte 21 zero) | 3 zero pad bytes

The 32-byte record gives aligned scanning; the whole record region is
checksummed with 64-bit FNV-1a, stored in the manifest. The manifest is a
JSON document `manifest.json` next to the shard files, with shard paths
relative to it.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from fpscan.fingerprint import Fingerprint, FingerprintError, parse_bitstring, to_bitstring

MAGIC = b"FPS1"
FORMAT_VERSION = 1
HEADER_SIZE = 16
RECORD_SIZE = 32
CID_MAX = (1 << 64) - 1

_HEADER = struct.Struct("<4sHHQ")
_RECORD = struct.Struct("<Q21s3x")

FNV64_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


class LibstoreError(Exception):
    """Base class for library storage failures."""


class LineFormatError(LibstoreError):
    """A text library line is malformed; carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


class MissingTab(LineFormatError):
    def __init__(self, line_number: int | None = None):
        super().__init__("expected `<CID>\\t<bitstring>`, no tab found", line_number)


class BadCid(LineFormatError):
    def __init__(self, raw: str, line_number: int | None = None):
        super().__init__(f"bad CID {raw!r}: must be a decimal integer in 1..2^64-1", line_number)


class ShardFileError(LibstoreError):
    """A shard file failed structural validation; carries the offending path."""

    def __init__(self, path, message: str):
        self.path = Path(path)
        super().__init__(f"{path}: {message}")


class BadMagic(ShardFileError):
    pass


class VersionMismatch(ShardFileError):
    pass


class ChecksumMismatch(ShardFileError):
    pass


class TruncatedFile(ShardFileError):
    pass


class IoFailure(LibstoreError):
    pass


def fnv1a_64(data: bytes, value: int = FNV64_OFFSET) -> int:
    """64-bit FNV-1a over `data`, resumable by passing a prior result as `value`."""
    h = value
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class LibraryRecord:
    cid: int
    fp: Fingerprint

    def __post_init__(self):
        if not 1 <= self.cid <= CID_MAX:
            raise BadCid(str(self.cid))


@dataclass(frozen=True)
class Shard:
    path: Path
    record_count: int
    dataset_label: str
    checksum: int


@dataclass(frozen=True)
class ShardManifest:
    shards: tuple[Shard, ...]
    total_records: int
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.total_records != sum(s.record_count for s in self.shards):
            raise LibstoreError(
                f"total_records {self.total_records} != sum of shard counts "
                f"{sum(s.record_count for s in self.shards)}"
            )
        paths = [str(s.path) for s in self.shards]
        if len(set(paths)) != len(paths):
            raise LibstoreError("shard paths are not unique")


def parse_library_line(line: str, line_number: int | None = None) -> LibraryRecord:
    """Parse one `<CID><TAB><bitstring>` line; a trailing newline is tolerated."""
    line = line.rstrip("\r\n")
    cid_text, sep, bits = line.partition("\t")
    if not sep:
        raise MissingTab(line_number)
    if not (cid_text.isascii() and cid_text.isdigit()):
        raise BadCid(cid_text, line_number)
    cid = int(cid_text)
    if cid == 0 or cid > CID_MAX:
        raise BadCid(cid_text, line_number)
    try:
        fp = parse_bitstring(bits)
    except FingerprintError as exc:
        raise LineFormatError(str(exc), line_number) from exc
    return LibraryRecord(cid=cid, fp=fp)


def write_library_line(record: LibraryRecord) -> str:
    return f"{record.cid}\t{to_bitstring(record.fp)}"


def pack_record(record: LibraryRecord) -> bytes:
    return _RECORD.pack(record.cid, record.fp.to_packed())


def unpack_record(data: bytes) -> LibraryRecord:
    cid, packed = _RECORD.unpack(data)
    return LibraryRecord(cid=cid, fp=Fingerprint.from_packed(packed))


def shard_label(index: int) -> str:
    """Labels A, B, ... Z, then A1, B1, ... Z1, A2, ..."""
    letter = chr(ord("A") + index % 26)
    cycle = index // 26
    return letter if cycle == 0 else f"{letter}{cycle}"


def split_sizes(total: int, shard_count: int) -> list[int]:
    """Contiguous split into shard_count parts whose sizes differ by at most 1."""
    if shard_count < 1:
        raise ValueError("shard_count must be >= 1")
    base, extra = divmod(total, shard_count)
    return [base + (1 if i < extra else 0) for i in range(shard_count)]


def pack_header(record_count: int) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, 0, record_count)


def write_shard_file(path: Path, payload: bytes, record_count: int) -> int:
    """Write header + record region, return the region's FNV-1a checksum."""
    if len(payload) != record_count * RECORD_SIZE:
        raise LibstoreError(
            f"payload is {len(payload)} bytes, expected {record_count * RECORD_SIZE}"
        )
    checksum = fnv1a_64(payload)
    try:
        with open(path, "wb") as f:
            f.write(pack_header(record_count))
            f.write(payload)
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc
    return checksum


def read_shard_header(f: IO[bytes], path: Path) -> int:
    """Validate the 16-byte header and return the record count it declares."""
    raw = f.read(HEADER_SIZE)
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(path, f"header is {len(raw)} bytes, expected {HEADER_SIZE}")
    magic, version, _, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BadMagic(path, f"magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(path, f"format version {version}, expected {FORMAT_VERSION}")
    return count


def read_shard(shard: Shard, verify_checksum: bool = True) -> Iterator[LibraryRecord]:
    """Stream records from a shard file in stored order with bounded memory.

    The checksum is accumulated while streaming and verified after the last
    record, so a ChecksumMismatch surfaces only once the stream is exhausted.
    """
    with open(shard.path, "rb") as f:
        count = read_shard_header(f, shard.path)
        checksum = FNV64_OFFSET
        remaining = count
        while remaining > 0:
            n = min(remaining, 8192)
            buf = f.read(n * RECORD_SIZE)
            if len(buf) < n * RECORD_SIZE:
                got = count - remaining + len(buf) // RECORD_SIZE
                raise TruncatedFile(shard.path, f"holds {got} records, header declares {count}")
            if verify_checksum:
                checksum = fnv1a_64(buf, checksum)
            for off in range(0, len(buf), RECORD_SIZE):
                yield unpack_record(buf[off : off + RECORD_SIZE])
            remaining -= n
        if verify_checksum and checksum != shard.checksum:
            raise ChecksumMismatch(
                shard.path,
                f"record region hashes to {checksum:#018x}, manifest says {shard.checksum:#018x}",
            )


def build_shards(lines: Iterable[str], shard_count: int, out_dir) -> ShardManifest:
    """Pack text library lines into `shard_count` balanced binary shards.

    Records keep input order and are split contiguously. Parse errors carry
    the 1-based input line number and abort before any file is written.
    """
    out_dir = Path(out_dir)
    payload = bytearray()
    total = 0
    for lineno, line in enumerate(lines, start=1):
        if line.strip() == "":
            continue
        payload += pack_record(parse_library_line(line, lineno))
        total += 1

    out_dir.mkdir(parents=True, exist_ok=True)
    shards = []
    offset = 0
    for i, size in enumerate(split_sizes(total, shard_count)):
        name = f"shard-{i:03d}.fps"
        path = out_dir / name
        region = bytes(payload[offset * RECORD_SIZE : (offset + size) * RECORD_SIZE])
        checksum = write_shard_file(path, region, size)
        shards.append(
            Shard(path=path, record_count=size, dataset_label=shard_label(i), checksum=checksum)
        )
        offset += size
    manifest = ShardManifest(shards=tuple(shards), total_records=total)
    save_manifest(manifest, out_dir)
    return manifest


def manifest_path(library_dir) -> Path:
    return Path(library_dir) / "manifest.json"


def save_manifest(manifest: ShardManifest, library_dir) -> Path:
    """Write manifest.json; shard paths are stored relative to the library dir."""
    library_dir = Path(library_dir)
    doc = {
        "format_version": manifest.format_version,
        "total_records": manifest.total_records,
        "shards": [
            {
                "path": s.path.name,
                "dataset_label": s.dataset_label,
                "record_count": s.record_count,
                "checksum": f"{s.checksum:016x}",
            }
            for s in manifest.shards
        ],
    }
    path = manifest_path(library_dir)
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc
    return path


def load_manifest(library_dir) -> ShardManifest:
    """Load manifest.json from a library directory, resolving shard paths."""
    library_dir = Path(library_dir)
    path = manifest_path(library_dir)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise IoFailure(f"no manifest at {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"reading {path}: {exc}") from exc
    shards = tuple(
        Shard(
            path=library_dir / s["path"],
            record_count=int(s["record_count"]),
            dataset_label=s["dataset_label"],
            checksum=int(s["checksum"], 16),
        )
        for s in doc["shards"]
    )
    return ShardManifest(
        shards=shards,
        total_records=int(doc["total_records"]),
        format_version=int(doc["format_version"]),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.path}: {self.message}"


def validate_manifest(manifest: ShardManifest) -> list[Violation]:
    """Check every shard against the manifest; violations are data, not exceptions."""
    violations: list[Violation] = []
    declared_total = sum(s.record_count for s in manifest.shards)
    if manifest.total_records != declared_total:
        violations.append(
            Violation(
                "sum-mismatch",
                "manifest",
                f"total_records {manifest.total_records} != shard sum {declared_total}",
            )
        )
    seen: set[str] = set()
    for shard in manifest.shards:
        spath = str(shard.path)
        if spath in seen:
            violations.append(Violation("duplicate-path", spath, "shard path repeated"))
        seen.add(spath)
        if not shard.path.exists():
            violations.append(Violation("missing-file", spath, "shard file does not exist"))
            continue
        try:
            with open(shard.path, "rb") as f:
                header_count = read_shard_header(f, shard.path)
        except ShardFileError as exc:
            violations.append(Violation("bad-header", spath, str(exc)))
            continue
        if header_count != shard.record_count:
            violations.append(
                Violation(
                    "count-mismatch",
                    spath,
                    f"header declares {header_count} records, manifest says {shard.record_count}",
                )
            )
            continue
        size = shard.path.stat().st_size
        expected = HEADER_SIZE + shard.record_count * RECORD_SIZE
        if size != expected:
            violations.append(
                Violation("size-mismatch", spath, f"file is {size} bytes, expected {expected}")
            )
            continue
        with open(shard.path, "rb") as f:
            f.seek(HEADER_SIZE)
            checksum = FNV64_OFFSET
            while True:
                chunk = f.read(1 << 20)
                if not chunk:
                    break
                checksum = fnv1a_64(chunk, checksum)
        if checksum != shard.checksum:
            violations.append(
                Violation(
                    "checksum-mismatch",
                    spath,
                    f"record region hashes to {checksum:016x}, manifest says {shard.checksum:016x}",
                )
            )
    return violations
