"""Peer message framing and the in-process transport endpoints.

The byte framing is normative (PROTOCOL.md) so a socket transport can be
added without touching stores or recovery. The simulator drives it through
``PeerEndpoint`` (server side, answers raw request bytes against a
``FragmentStore``) and ``RemoteSource`` (client side, exposes the
fragment-source interface used by recovery while counting traffic).

Messages, big-endian throughout:

    GET_FRAGMENTS  0x01 | height u64 | max u16
    FRAGMENTS      0x02 | count u16  | count LSBF records
    GET_HEADER     0x03 | height u64
    HEADER         0x04 | height u64 | prev_hash 32 | payload_hash 32
    ERROR          0x7F | code u8
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .chain import BlockHeader
from .codec import (
    CodecParams,
    CodedFragment,
    WireFormatError,
    lsbf_record_size,
    pack_fragment,
    unpack_records,
)
from .node import FragmentStore, UnknownBlockError

OP_GET_FRAGMENTS = 0x01
OP_FRAGMENTS = 0x02
OP_GET_HEADER = 0x03
OP_HEADER = 0x04
OP_ERROR = 0x7F

ERR_UNKNOWN_BLOCK = 1
ERR_BAD_REQUEST = 2

_GET_FRAGMENTS = struct.Struct(">BQH")
_FRAGMENTS_HEAD = struct.Struct(">BH")
_GET_HEADER = struct.Struct(">BQ")
_HEADER = struct.Struct(">BQ32s32s")
_ERROR = struct.Struct(">BB")


class ProtocolError(ValueError):
    """Malformed peer message."""


@dataclass(frozen=True)
class GetFragments:
    height: int
    max_count: int


@dataclass(frozen=True)
class Fragments:
    fragments: tuple[CodedFragment, ...]
    params: CodecParams | None  # None when the reply carries no records


@dataclass(frozen=True)
class GetHeader:
    height: int


@dataclass(frozen=True)
class HeaderRecord:
    height: int
    prev_hash: bytes
    payload_hash: bytes

    def to_header(self) -> BlockHeader:
        return BlockHeader(self.height, self.prev_hash, self.payload_hash)


@dataclass(frozen=True)
class ErrorReply:
    code: int


Message = GetFragments | Fragments | GetHeader | HeaderRecord | ErrorReply


def pack_message(msg: Message) -> bytes:
    if isinstance(msg, GetFragments):
        return _GET_FRAGMENTS.pack(OP_GET_FRAGMENTS, msg.height, msg.max_count)
    if isinstance(msg, Fragments):
        body = b"".join(pack_fragment(f, msg.params) for f in msg.fragments)
        return _FRAGMENTS_HEAD.pack(OP_FRAGMENTS, len(msg.fragments)) + body
    if isinstance(msg, GetHeader):
        return _GET_HEADER.pack(OP_GET_HEADER, msg.height)
    if isinstance(msg, HeaderRecord):
        return _HEADER.pack(OP_HEADER, msg.height, msg.prev_hash, msg.payload_hash)
    if isinstance(msg, ErrorReply):
        return _ERROR.pack(OP_ERROR, msg.code)
    raise TypeError(f"not a protocol message: {msg!r}")


def unpack_message(buf: bytes) -> Message:
    if not buf:
        raise ProtocolError("empty message")
    op = buf[0]
    if op == OP_GET_FRAGMENTS:
        if len(buf) != _GET_FRAGMENTS.size:
            raise ProtocolError("bad GET_FRAGMENTS length")
        _, height, max_count = _GET_FRAGMENTS.unpack(buf)
        return GetFragments(height, max_count)
    if op == OP_FRAGMENTS:
        if len(buf) < _FRAGMENTS_HEAD.size:
            raise ProtocolError("truncated FRAGMENTS head")
        _, count = _FRAGMENTS_HEAD.unpack_from(buf)
        body = buf[_FRAGMENTS_HEAD.size :]
        try:
            frags, params = unpack_records(body, count)
        except WireFormatError as exc:
            raise ProtocolError(str(exc)) from exc
        return Fragments(tuple(frags), params)
    if op == OP_GET_HEADER:
        if len(buf) != _GET_HEADER.size:
            raise ProtocolError("bad GET_HEADER length")
        _, height = _GET_HEADER.unpack(buf)
        return GetHeader(height)
    if op == OP_HEADER:
        if len(buf) != _HEADER.size:
            raise ProtocolError("bad HEADER length")
        _, height, prev_hash, payload_hash = _HEADER.unpack(buf)
        return HeaderRecord(height, prev_hash, payload_hash)
    if op == OP_ERROR:
        if len(buf) != _ERROR.size:
            raise ProtocolError("bad ERROR length")
        _, code = _ERROR.unpack(buf)
        return ErrorReply(code)
    raise ProtocolError(f"unknown opcode {op:#x}")


class PeerEndpoint:
    """Answers framed requests against one node's fragment store."""

    def __init__(self, store: FragmentStore):
        self.store = store

    def _lookup(self, height: int, max_count: int) -> list[CodedFragment]:
        return self.store.serve_fragments(height, max_count)

    def handle(self, request: bytes) -> bytes:
        try:
            msg = unpack_message(request)
        except ProtocolError:
            return pack_message(ErrorReply(ERR_BAD_REQUEST))
        if isinstance(msg, GetFragments):
            try:
                frags = self._lookup(msg.height, msg.max_count)
            except UnknownBlockError:
                return pack_message(ErrorReply(ERR_UNKNOWN_BLOCK))
            return pack_message(Fragments(tuple(frags), self.store.params))
        if isinstance(msg, GetHeader):
            try:
                header = self.store.header(msg.height)
            except UnknownBlockError:
                return pack_message(ErrorReply(ERR_UNKNOWN_BLOCK))
            return pack_message(
                HeaderRecord(header.height, header.prev_hash, header.payload_hash)
            )
        return pack_message(ErrorReply(ERR_BAD_REQUEST))


class RemoteSource:
    """Fragment source speaking the wire protocol, with traffic counters."""

    def __init__(self, endpoint: PeerEndpoint):
        self.endpoint = endpoint
        self.requests = 0
        self.fragments_received = 0
        self.record_bytes = 0

    def get_fragments(self, height: int, max_count: int) -> list[CodedFragment]:
        self.requests += 1
        reply = unpack_message(
            self.endpoint.handle(pack_message(GetFragments(height, max_count)))
        )
        if isinstance(reply, ErrorReply):
            if reply.code == ERR_UNKNOWN_BLOCK:
                return []
            raise ProtocolError(f"peer error {reply.code}")
        if not isinstance(reply, Fragments):
            raise ProtocolError("unexpected reply to GET_FRAGMENTS")
        if reply.params is not None:
            self.fragments_received += len(reply.fragments)
            self.record_bytes += len(reply.fragments) * lsbf_record_size(reply.params)
        return list(reply.fragments)

    def get_header(self, height: int) -> BlockHeader | None:
        self.requests += 1
        reply = unpack_message(
            self.endpoint.handle(pack_message(GetHeader(height)))
        )
        if isinstance(reply, ErrorReply):
            return None
        if not isinstance(reply, HeaderRecord):
            raise ProtocolError("unexpected reply to GET_HEADER")
        return reply.to_header()
