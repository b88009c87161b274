"""Block fragmentation, seeded encoding, and rank-based decoding.

A block payload is framed as an 8-byte big-endian length, the payload, and
zero padding up to the protocol-wide maximum block size, then cut into k
equal fragments. A node turns those into r coded fragments, each a GF(256)
linear combination whose coefficient row is regenerable from the node's
(node_id, block_height) seed. Decoding accepts any mix of coded and plain
fragments whose stacked coefficient rows reach rank k: it inverts a
full-rank k x k subsystem, rebuilds the plain fragments, and strips the
framing.

Uncoded (plain) fragments take part in decoding as trivial rows: a 1 at
the fragment's position and 0 elsewhere.

Everything here is pure; ``DecodingSet`` instances are single-threaded
while being filled.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .coeffgen import CoefficientSeed, coefficient_row
from .gf256 import independent_rows, mat_invert, mat_mul

#: Bytes reserved at the start of the padded block for the payload length.
LENGTH_PREFIX = 8

#: Highest fragment count the one-byte field can reasonably support; above
#: half the field size the chance of dependent random rows starts to bite.
MAX_K = 128

LSBF_MAGIC = b"LSBF"
LSBF_VERSION = 1
PLAIN_SENTINEL = 0xFFFF

# magic, version, node_id, block_height, row_index, flags, plain_index, k, s_B
_LSBF_HEADER = struct.Struct(">4sBQQHBHHI")
_FLAG_PLAIN = 0x01


class BlockTooLargeError(ValueError):
    """Payload plus length prefix exceeds the protocol block size."""


class DuplicateFragmentError(ValueError):
    """Two fragments with the same identity were offered for decoding."""


class InsufficientRankError(Exception):
    """Gathered coefficient rows do not span the full fragment space."""

    def __init__(self, rank: int):
        super().__init__(f"coefficient rows reach rank {rank} only")
        self.rank = rank


class CorruptDecodeError(Exception):
    """Decoded framing is implausible (length prefix out of range)."""


class WireFormatError(ValueError):
    """A serialized fragment record failed to parse."""


@dataclass(frozen=True)
class CodecParams:
    """Protocol-wide constants every node must agree on.

    ``max_block_size`` is the padded size of every block on the wire, so
    all fragments of all blocks share one size: ``max_block_size // k``.
    """

    k: int
    max_block_size: int

    def __post_init__(self):
        if not 1 <= self.k <= MAX_K:
            raise ValueError(f"k must be in 1..{MAX_K}, got {self.k}")
        if self.max_block_size % self.k != 0:
            raise ValueError(
                f"max_block_size {self.max_block_size} not divisible by k={self.k}"
            )
        if self.fragment_size < LENGTH_PREFIX + 1:
            raise ValueError(
                f"fragment size {self.fragment_size} too small for the length prefix"
            )

    @property
    def fragment_size(self) -> int:
        return self.max_block_size // self.k

    @property
    def max_payload(self) -> int:
        return self.max_block_size - LENGTH_PREFIX


@dataclass(frozen=True)
class CodedFragment:
    """One linear combination of a block's fragments.

    ``(node_id, block_height, row_index)`` fully determines the coefficient
    row of a coded fragment. A plain fragment (``is_plain``) is original
    slice ``plain_index`` of the padded block and decodes as a unit row.
    """

    node_id: int
    block_height: int
    row_index: int
    data: bytes
    is_plain: bool = False
    plain_index: int | None = None

    def __post_init__(self):
        if self.is_plain != (self.plain_index is not None):
            raise ValueError("plain_index must be set exactly when is_plain")
        if self.row_index < 0:
            raise ValueError("row_index must be >= 0")
        if self.plain_index is not None and not 0 <= self.plain_index < PLAIN_SENTINEL:
            raise ValueError("plain_index out of range")

    @property
    def key(self) -> tuple:
        return (self.node_id, self.row_index, self.is_plain, self.plain_index)

    def seed(self) -> CoefficientSeed:
        return CoefficientSeed(self.node_id, self.block_height)


def fragment_block(params: CodecParams, payload: bytes) -> np.ndarray:
    """Frame, pad, and split a payload into k fragments (k x size array)."""
    if LENGTH_PREFIX + len(payload) > params.max_block_size:
        raise BlockTooLargeError(
            f"payload of {len(payload)} bytes exceeds "
            f"{params.max_payload} (block size {params.max_block_size})"
        )
    framed = np.zeros(params.max_block_size, dtype=np.uint8)
    framed[:LENGTH_PREFIX] = np.frombuffer(
        len(payload).to_bytes(LENGTH_PREFIX, "big"), dtype=np.uint8
    )
    framed[LENGTH_PREFIX : LENGTH_PREFIX + len(payload)] = np.frombuffer(
        payload, dtype=np.uint8
    )
    return framed.reshape(params.k, params.fragment_size)


def encode_fragments(
    params: CodecParams, seed: CoefficientSeed, payload: bytes, r: int
) -> list[CodedFragment]:
    """Produce rows 0..r-1 of the node's coded fragments for one block."""
    if r < 1:
        raise ValueError("a node stores at least one coded fragment per block")
    plain = fragment_block(params, payload)
    coeffs = np.vstack(
        [coefficient_row(seed, params.k, u) for u in range(r)]
    )
    data = mat_mul(coeffs, plain)
    return [
        CodedFragment(
            node_id=seed.node_id,
            block_height=seed.block_height,
            row_index=u,
            data=data[u].tobytes(),
        )
        for u in range(r)
    ]


def plain_fragments(
    params: CodecParams, block_height: int, payload: bytes, node_id: int = 0
) -> list[CodedFragment]:
    """The k original slices, wrapped as trivially-coded fragments."""
    plain = fragment_block(params, payload)
    return [
        CodedFragment(
            node_id=node_id,
            block_height=block_height,
            row_index=i,
            data=plain[i].tobytes(),
            is_plain=True,
            plain_index=i,
        )
        for i in range(params.k)
    ]


@dataclass
class DecodingSet:
    """Fragments gathered for one block, deduplicated by identity."""

    block_height: int
    fragments: list[CodedFragment] = field(default_factory=list)

    def __post_init__(self):
        frags, self.fragments = list(self.fragments), []
        self._keys: set[tuple] = set()
        for f in frags:
            self.add(f)

    def add(self, fragment: CodedFragment) -> None:
        if fragment.block_height != self.block_height:
            raise ValueError(
                f"fragment for height {fragment.block_height} offered to a "
                f"set for height {self.block_height}"
            )
        if self.fragments and len(fragment.data) != len(self.fragments[0].data):
            raise ValueError("fragments of mixed sizes in one decoding set")
        if fragment.key in self._keys:
            raise DuplicateFragmentError(f"duplicate fragment {fragment.key}")
        self._keys.add(fragment.key)
        self.fragments.append(fragment)

    def __len__(self) -> int:
        return len(self.fragments)

    def coefficient_rows(self, k: int) -> np.ndarray:
        """Stacked coefficient rows, regenerated or unit, one per fragment."""
        rows = np.zeros((len(self.fragments), k), dtype=np.uint8)
        for i, f in enumerate(self.fragments):
            if f.is_plain:
                if f.plain_index >= k:
                    raise ValueError(f"plain index {f.plain_index} >= k={k}")
                rows[i, f.plain_index] = 1
            else:
                rows[i] = coefficient_row(f.seed(), k, f.row_index)
        return rows


def can_decode(params: CodecParams, decoding_set: DecodingSet) -> tuple[bool, int]:
    """Whether the set spans the fragment space; returns (ok, achieved rank)."""
    if not decoding_set.fragments:
        return False, 0
    rows = decoding_set.coefficient_rows(params.k)
    rank = len(independent_rows(rows))
    return rank == params.k, rank


def solve_fragments(
    params: CodecParams, decoding_set: DecodingSet
) -> tuple[bytes, list[CodedFragment]]:
    """Decode the payload and report which fragments the subsystem used."""
    frags = decoding_set.fragments
    if not frags:
        raise InsufficientRankError(0)
    size = len(frags[0].data)
    if size != params.fragment_size:
        raise ValueError(
            f"fragment size {size} does not match params ({params.fragment_size})"
        )
    rows = decoding_set.coefficient_rows(params.k)
    chosen = independent_rows(rows)
    if len(chosen) < params.k:
        raise InsufficientRankError(int(len(chosen)))
    subsystem = rows[chosen]
    data = np.vstack(
        [np.frombuffer(frags[i].data, dtype=np.uint8) for i in chosen]
    )
    plain = mat_mul(mat_invert(subsystem), data)
    blob = plain.tobytes()
    length = int.from_bytes(blob[:LENGTH_PREFIX], "big")
    if length > params.max_payload:
        raise CorruptDecodeError(
            f"decoded length prefix {length} exceeds {params.max_payload}"
        )
    return blob[LENGTH_PREFIX : LENGTH_PREFIX + length], [frags[i] for i in chosen]


def decode_block(params: CodecParams, decoding_set: DecodingSet) -> bytes:
    """Recover the original payload from a rank-k set of fragments."""
    payload, _ = solve_fragments(params, decoding_set)
    return payload


def verify_decoded(payload: bytes, expected_hash: bytes) -> bool:
    """Check a decoded payload against the block's recorded SHA-256."""
    return hashlib.sha256(payload).digest() == expected_hash


# ---------------------------------------------------------------------------
# LSBF fragment records (normative wire/file format, see PROTOCOL.md)


def lsbf_record_size(params: CodecParams) -> int:
    return _LSBF_HEADER.size + params.fragment_size


def pack_fragment(fragment: CodedFragment, params: CodecParams) -> bytes:
    """Serialize one fragment to an LSBF record."""
    if len(fragment.data) != params.fragment_size:
        raise WireFormatError(
            f"fragment data is {len(fragment.data)} bytes, "
            f"params say {params.fragment_size}"
        )
    flags = _FLAG_PLAIN if fragment.is_plain else 0
    plain_index = (
        fragment.plain_index if fragment.plain_index is not None else PLAIN_SENTINEL
    )
    header = _LSBF_HEADER.pack(
        LSBF_MAGIC,
        LSBF_VERSION,
        fragment.node_id,
        fragment.block_height,
        fragment.row_index,
        flags,
        plain_index,
        params.k,
        params.max_block_size,
    )
    return header + fragment.data


def unpack_records(body: bytes, count: int) -> tuple[list[CodedFragment], CodecParams | None]:
    """Parse ``count`` consecutive LSBF records sharing one set of params."""
    fragments: list[CodedFragment] = []
    params: CodecParams | None = None
    offset = 0
    for _ in range(count):
        head = body[offset : offset + _LSBF_HEADER.size]
        if len(head) < _LSBF_HEADER.size:
            raise WireFormatError("truncated fragment record")
        k = int.from_bytes(head[26:28], "big")
        max_block_size = int.from_bytes(head[28:32], "big")
        if k == 0 or max_block_size == 0 or max_block_size % k:
            raise WireFormatError("implausible record geometry")
        size = _LSBF_HEADER.size + max_block_size // k
        fragment, p = unpack_fragment(body[offset : offset + size])
        if params is None:
            params = p
        elif p != params:
            raise WireFormatError("mixed codec params in one record stream")
        fragments.append(fragment)
        offset += size
    if offset != len(body):
        raise WireFormatError("trailing bytes after fragment records")
    return fragments, params


def unpack_fragment(record: bytes) -> tuple[CodedFragment, CodecParams]:
    """Parse an LSBF record back into a fragment and its codec parameters."""
    if len(record) < _LSBF_HEADER.size:
        raise WireFormatError("record shorter than the LSBF header")
    (
        magic,
        version,
        node_id,
        block_height,
        row_index,
        flags,
        plain_index,
        k,
        max_block_size,
    ) = _LSBF_HEADER.unpack_from(record)
    if magic != LSBF_MAGIC:
        raise WireFormatError(f"bad magic {magic!r}")
    if version != LSBF_VERSION:
        raise WireFormatError(f"unsupported version {version}")
    try:
        params = CodecParams(k=k, max_block_size=max_block_size)
    except ValueError as exc:
        raise WireFormatError(str(exc)) from exc
    data = record[_LSBF_HEADER.size :]
    if len(data) != params.fragment_size:
        raise WireFormatError(
            f"record carries {len(data)} data bytes, expected {params.fragment_size}"
        )
    is_plain = bool(flags & _FLAG_PLAIN)
    if is_plain and plain_index == PLAIN_SENTINEL:
        raise WireFormatError("plain fragment without a plain index")
    if not is_plain and plain_index != PLAIN_SENTINEL:
        raise WireFormatError("coded fragment carries a plain index")
    fragment = CodedFragment(
        node_id=node_id,
        block_height=block_height,
        row_index=row_index,
        data=data,
        is_plain=is_plain,
        plain_index=plain_index if is_plain else None,
    )
    return fragment, params
