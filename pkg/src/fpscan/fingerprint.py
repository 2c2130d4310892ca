"""166-key structural fingerprints and the Manhattan distance kernels over them.

A fingerprint holds 166 binary keys bit-packed into three 64-bit words:
key j (1-based) lives at word (j-1) // 64, bit (j-1) % 64. The 26 bits
above key 166 are always zero, which lets the packed distance kernel XOR
whole words without masking.

Distances are plain ints in 0..166. On 0/1 vectors the Manhattan sum
equals the Hamming distance, so the fast kernel is popcount-of-XOR; the
naive per-key sum is kept as the ground-truth oracle for it.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Iterable

import numpy as np

NUM_KEYS = 166
WORD_COUNT = 3
PACKED_BYTES = 21  # ceil(166 / 8)

_WORD_MASK = (1 << 64) - 1
# Bits 166..191 of the three-word layout (bits 38..63 of word 2) must stay clear.
_LAST_WORD_MASK = (1 << (NUM_KEYS - 128)) - 1


class FingerprintError(ValueError):
    """Base class for fingerprint parsing and validation failures."""


class WrongLength(FingerprintError):
    def __init__(self, length: int):
        super().__init__(f"bitstring must be {NUM_KEYS} or {NUM_KEYS + 1} characters, got {length}")
        self.length = length


class InvalidCharacter(FingerprintError):
    def __init__(self, char: str, position: int):
        super().__init__(f"invalid character {char!r} at position {position}; only '0'/'1' allowed")
        self.char = char
        self.position = position


@dataclass(frozen=True)
class Fingerprint:
    """Immutable 166-key fingerprint packed into three little-endian 64-bit words."""

    words: tuple[int, int, int]

    def __post_init__(self):
        if len(self.words) != WORD_COUNT:
            raise FingerprintError(f"expected {WORD_COUNT} words, got {len(self.words)}")
        w0, w1, w2 = self.words
        for i, w in enumerate((w0, w1, w2)):
            if not 0 <= w <= _WORD_MASK:
                raise FingerprintError(f"word {i} out of 64-bit range: {w:#x}")
        if w2 & ~_LAST_WORD_MASK:
            raise FingerprintError("padding bits above key 166 must be zero")

    @classmethod
    def zero(cls) -> "Fingerprint":
        return cls((0, 0, 0))

    @classmethod
    def from_keys(cls, keys: Iterable[int]) -> "Fingerprint":
        """Build a fingerprint with the given 1-based key indices set."""
        words = [0, 0, 0]
        for j in keys:
            j = operator.index(j)  # numpy ints would overflow the shift below
            if not 1 <= j <= NUM_KEYS:
                raise FingerprintError(f"key index {j} outside 1..{NUM_KEYS}")
            words[(j - 1) // 64] |= 1 << ((j - 1) % 64)
        return cls(tuple(words))

    @classmethod
    def from_packed(cls, data: bytes) -> "Fingerprint":
        """Decode the 21-byte packed form (key j at byte (j-1)//8, bit (j-1)%8)."""
        if len(data) != PACKED_BYTES:
            raise FingerprintError(f"packed fingerprint must be {PACKED_BYTES} bytes, got {len(data)}")
        w0 = int.from_bytes(data[0:8], "little")
        w1 = int.from_bytes(data[8:16], "little")
        w2 = int.from_bytes(data[16:21], "little")
        return cls((w0, w1, w2))

    def to_packed(self) -> bytes:
        w0, w1, w2 = self.words
        return w0.to_bytes(8, "little") + w1.to_bytes(8, "little") + w2.to_bytes(5, "little")

    def key(self, j: int) -> bool:
        """True iff key j (1-based) is set."""
        if not 1 <= j <= NUM_KEYS:
            raise FingerprintError(f"key index {j} outside 1..{NUM_KEYS}")
        return bool(self.words[(j - 1) // 64] >> ((j - 1) % 64) & 1)

    def keys(self) -> frozenset[int]:
        """The set of 1-based indices of all set keys."""
        return frozenset(j for j in range(1, NUM_KEYS + 1) if self.key(j))

    def popcount(self) -> int:
        return sum(w.bit_count() for w in self.words)

    def unpacked(self) -> list[int]:
        """The 166 key values as a list of 0/1 ints, key 1 first."""
        w0, w1, w2 = self.words
        value = w0 | (w1 << 64) | (w2 << 128)
        return [(value >> i) & 1 for i in range(NUM_KEYS)]


def parse_bitstring(text: str) -> Fingerprint:
    """Parse a 166- or 167-character '0'/'1' string into a Fingerprint.

    166 characters: character i sets key i+1. 167 characters: the leading
    character is discarded (the common 167-bit convention leaves bit 0
    unused) and character i sets key i.

    Raises WrongLength or InvalidCharacter (with the offending position).
    """
    if len(text) == NUM_KEYS + 1:
        for i, c in enumerate(text):
            if c not in "01":
                raise InvalidCharacter(c, i)
        text = text[1:]
    elif len(text) == NUM_KEYS:
        for i, c in enumerate(text):
            if c not in "01":
                raise InvalidCharacter(c, i)
    else:
        raise WrongLength(len(text))
    value = int(text[::-1], 2)
    return Fingerprint((value & _WORD_MASK, (value >> 64) & _WORD_MASK, value >> 128))


def to_bitstring(fp: Fingerprint) -> str:
    """Render the canonical 166-character form; exact inverse of parse_bitstring."""
    w0, w1, w2 = fp.words
    value = w0 | (w1 << 64) | (w2 << 128)
    return format(value, f"0{NUM_KEYS}b")[::-1]


def manhattan_reference(a: Fingerprint, b: Fingerprint) -> int:
    """Sum of |a_j - b_j| over all 166 keys, computed key by key on unpacked values.

    Deliberately naive: this is the oracle the packed kernel is checked against.
    """
    return sum(abs(x - y) for x, y in zip(a.unpacked(), b.unpacked()))


def distance_packed(a: Fingerprint, b: Fingerprint) -> int:
    """Popcount of XOR over the three words; equals manhattan_reference on valid inputs."""
    aw, bw = a.words, b.words
    return (
        (aw[0] ^ bw[0]).bit_count()
        + (aw[1] ^ bw[1]).bit_count()
        + (aw[2] ^ bw[2]).bit_count()
    )


@dataclass(frozen=True)
class FingerprintMatrix:
    """A stack of fingerprints with their compound ids, one row per molecule."""

    rows: tuple[Fingerprint, ...]
    row_cids: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.row_cids):
            raise FingerprintError(
                f"rows ({len(self.rows)}) and row_cids ({len(self.row_cids)}) differ in length"
            )

    def __len__(self) -> int:
        return len(self.rows)

    def to_unpacked_array(self) -> np.ndarray:
        """The rows as an (n, 166) uint8 array of 0/1 key values."""
        if not self.rows:
            return np.zeros((0, NUM_KEYS), dtype=np.uint8)
        packed = np.frombuffer(b"".join(fp.to_packed() for fp in self.rows), dtype=np.uint8)
        bits = np.unpackbits(packed.reshape(len(self.rows), PACKED_BYTES), axis=1, bitorder="little")
        return bits[:, :NUM_KEYS]


def unpack_query(b: Fingerprint) -> np.ndarray:
    """The query as a (166,) uint8 vector of 0/1 key values."""
    packed = np.frombuffer(b.to_packed(), dtype=np.uint8)
    return np.unpackbits(packed, bitorder="little")[:NUM_KEYS]


def broadcast_distances(A: FingerprintMatrix, b: Fingerprint) -> list[int]:
    """Distance of every row of A to b via matrix-vector broadcasting.

    Materializes C[i, j] = A[i, j] - b[j] and reduces K[i] = sum_j |C[i, j]|,
    so K[i] == manhattan_reference(A.rows[i], b) for every row.
    """
    if not A.rows:
        return []
    C = A.to_unpacked_array().astype(np.int16) - unpack_query(b).astype(np.int16)
    K = np.abs(C).sum(axis=1)
    return [int(k) for k in K]
