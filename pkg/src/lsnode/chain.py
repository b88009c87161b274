"""Minimal hash-linked chain used as the fixture and verification substrate.

Blocks are variable-size payloads tied together by SHA-256: each header
commits to its height, the previous header's hash, and the payload hash.
There is no consensus layer here on purpose; storage and recovery operate
on blocks independently, so a bare hash chain exercises everything.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

HASH_SIZE = 32
GENESIS_PREV = bytes(HASH_SIZE)

LSBC_MAGIC = b"LSBC"
LSBC_VERSION = 1
_FILE_HEADER = struct.Struct(">4sBQ")
_RECORD_HEADER = struct.Struct(">Q32s32sI")


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: bytes
    payload_hash: bytes

    def hash(self) -> bytes:
        return hashlib.sha256(
            self.height.to_bytes(8, "big") + self.prev_hash + self.payload_hash
        ).digest()


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    payload: bytes

    @property
    def height(self) -> int:
        return self.header.height


def block_from_payload(height: int, prev_hash: bytes, payload: bytes) -> Block:
    header = BlockHeader(
        height=height,
        prev_hash=prev_hash,
        payload_hash=hashlib.sha256(payload).digest(),
    )
    return Block(header=header, payload=payload)


def build_chain(
    seed: int, length: int, min_payload: int = 64, max_payload: int = 1024
) -> list[Block]:
    """Deterministic pseudo-random chain; same seed, same bytes."""
    if length < 0:
        raise ValueError("length must be >= 0")
    if not 0 <= min_payload <= max_payload:
        raise ValueError("need 0 <= min_payload <= max_payload")
    rng = random.Random(seed)
    blocks: list[Block] = []
    prev = GENESIS_PREV
    for height in range(length):
        payload = rng.randbytes(rng.randint(min_payload, max_payload))
        block = block_from_payload(height, prev, payload)
        blocks.append(block)
        prev = block.header.hash()
    return blocks


def validate_block(block: Block, prev_header: BlockHeader | None, height: int) -> bool:
    """One link of the chain check: height, linkage, payload commitment."""
    if block.header.height != height:
        return False
    expected_prev = GENESIS_PREV if prev_header is None else prev_header.hash()
    if block.header.prev_hash != expected_prev:
        return False
    return block.header.payload_hash == hashlib.sha256(block.payload).digest()


def validate_chain(blocks: Iterable[Block]) -> tuple[bool, int | None]:
    """Full-chain check; returns (ok, first bad height or None)."""
    prev: BlockHeader | None = None
    height = 0
    for block in blocks:
        if not validate_block(block, prev, height):
            return False, height
        prev = block.header
        height += 1
    return True, None


# ---------------------------------------------------------------------------
# chain stream format (LSBC, see PROTOCOL.md)


def write_chain(path: str | Path, blocks: list[Block]) -> None:
    """Serialize a chain to the LSBC length-prefixed stream format."""
    with open(path, "wb") as fh:
        fh.write(_FILE_HEADER.pack(LSBC_MAGIC, LSBC_VERSION, len(blocks)))
        for block in blocks:
            fh.write(
                _RECORD_HEADER.pack(
                    block.header.height,
                    block.header.prev_hash,
                    block.header.payload_hash,
                    len(block.payload),
                )
            )
            fh.write(block.payload)


def iter_chain(path: str | Path) -> Iterator[Block]:
    """Stream blocks from an LSBC file one at a time, without validating.

    Records are read lazily so a bootstrap can ingest a chain much larger
    than memory. Corrupt framing raises ``ValueError``.
    """
    with open(path, "rb") as fh:
        head = fh.read(_FILE_HEADER.size)
        if len(head) != _FILE_HEADER.size:
            raise ValueError("truncated chain file header")
        magic, version, count = _FILE_HEADER.unpack(head)
        if magic != LSBC_MAGIC:
            raise ValueError(f"bad chain magic {magic!r}")
        if version != LSBC_VERSION:
            raise ValueError(f"unsupported chain version {version}")
        for _ in range(count):
            rec = fh.read(_RECORD_HEADER.size)
            if len(rec) != _RECORD_HEADER.size:
                raise ValueError("truncated block record")
            height, prev_hash, payload_hash, size = _RECORD_HEADER.unpack(rec)
            payload = fh.read(size)
            if len(payload) != size:
                raise ValueError("truncated block payload")
            yield Block(
                header=BlockHeader(
                    height=height, prev_hash=prev_hash, payload_hash=payload_hash
                ),
                payload=payload,
            )


def read_chain(path: str | Path) -> list[Block]:
    return list(iter_chain(path))
