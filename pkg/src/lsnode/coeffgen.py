"""Deterministic coefficient streams keyed by (node id, block height).

Every node derives the coefficients of its linear combinations from a
SHA-256 counter stream, so any peer can regenerate the exact matrix a node
used without talking to it. The construction is wire-normative (see
PROTOCOL.md) and must stay bit-identical across implementations:

    seed_bytes = node_id as 8-byte big-endian || height as 8-byte big-endian
    byte[t]    = SHA256(seed_bytes || (t // 32) as 8-byte big-endian)[t % 32]

Coefficient row u for fragment count k is the stream slice
``[u*k, (u+1)*k)``. The stream is prefix-stable: longer requests extend
shorter ones byte for byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_DIGEST_SIZE = 32
_U64 = 1 << 64


@dataclass(frozen=True)
class CoefficientSeed:
    """Identity of one node's combinations for one block."""

    node_id: int
    block_height: int

    def __post_init__(self):
        if not 0 <= self.node_id < _U64:
            raise ValueError(f"node_id out of u64 range: {self.node_id}")
        if not 0 <= self.block_height < _U64:
            raise ValueError(f"block_height out of u64 range: {self.block_height}")

    def to_bytes(self) -> bytes:
        return self.node_id.to_bytes(8, "big") + self.block_height.to_bytes(8, "big")


def _stream_slice(seed: CoefficientSeed, start: int, stop: int) -> bytes:
    if stop <= start:
        return b""
    prefix = seed.to_bytes()
    first = start // _DIGEST_SIZE
    last = (stop - 1) // _DIGEST_SIZE
    chunks = [
        hashlib.sha256(prefix + ctr.to_bytes(8, "big")).digest()
        for ctr in range(first, last + 1)
    ]
    blob = b"".join(chunks)
    offset = first * _DIGEST_SIZE
    return blob[start - offset : stop - offset]


def coefficient_stream(seed: CoefficientSeed, count: int) -> bytes:
    """First ``count`` bytes of the coefficient stream for ``seed``."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return _stream_slice(seed, 0, count)


def coefficient_row(seed: CoefficientSeed, k: int, row_index: int) -> np.ndarray:
    """Coefficient row ``row_index``: k field elements as a uint8 vector."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if row_index < 0:
        raise ValueError("row_index must be >= 0")
    raw = _stream_slice(seed, row_index * k, (row_index + 1) * k)
    return np.frombuffer(raw, dtype=np.uint8)


def coefficient_matrix(
    seed: CoefficientSeed, k: int, rows: Iterable[int] | Sequence[int]
) -> np.ndarray:
    """Stack of coefficient rows for the given row indices, in given order."""
    indices = list(rows)
    if len(set(indices)) != len(indices):
        raise ValueError("row indices must be distinct")
    if not indices:
        return np.zeros((0, k), dtype=np.uint8)
    return np.vstack([coefficient_row(seed, k, u) for u in indices])
