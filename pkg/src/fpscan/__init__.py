"""fpscan: similarity search over massive MACCS-166 fingerprint libraries."""

from fpscan.fingerprint import (
    NUM_KEYS,
    Fingerprint,
    FingerprintMatrix,
    broadcast_distances,
    distance_packed,
    manhattan_reference,
    parse_bitstring,
    to_bitstring,
)

__all__ = [
    "NUM_KEYS",
    "Fingerprint",
    "FingerprintMatrix",
    "broadcast_distances",
    "distance_packed",
    "manhattan_reference",
    "parse_bitstring",
    "to_bitstring",
]

__version__ = "0.1.0"
