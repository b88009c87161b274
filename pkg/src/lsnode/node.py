"""Low-storage node: bootstrap, fragment store, serving, recovery, pruning.

A low-storage node never keeps old block payloads. Joining the network, it
streams the chain block by block: validate against the predecessor, encode
its own coded fragments, persist them with the header, and drop the
plaintext before asking for the next block. Afterwards, any block can be
rebuilt by downloading enough fragments (its own plus peers') and solving
the linear system, with the stored payload hash as the integrity check.

``FragmentStore`` is directory-backed: one subdirectory per height holding
``header.json`` plus one LSBF file per stored row, and a ``store.json``
with the codec parameters at the root. Single writer, any readers;
``bootstrap`` and ``prune`` need exclusive access.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .chain import Block, BlockHeader, validate_block
from .codec import (
    CodecParams,
    CodedFragment,
    CorruptDecodeError,
    DecodingSet,
    InsufficientRankError,
    encode_fragments,
    fragment_block,
    pack_fragment,
    solve_fragments,
    unpack_fragment,
    verify_decoded,
)
from .coeffgen import CoefficientSeed, coefficient_row
from .gf256 import independent_rows, mat_mul


class UnknownBlockError(KeyError):
    """The store holds nothing for the requested height."""


class MinimumOneFragmentError(ValueError):
    """Pruning below one fragment per block is not allowed."""


class BootstrapRejectedError(Exception):
    """Chain validation failed during bootstrap; store kept up to height-1."""

    def __init__(self, height: int):
        super().__init__(f"block at height {height} failed validation")
        self.height = height


class UnrecoverableError(Exception):
    """Not enough independent equations reachable to rebuild the block."""

    def __init__(self, rank: int):
        super().__init__(f"only rank {rank} reachable")
        self.rank = rank


class TamperDetectedError(Exception):
    """Decoded payload contradicts the recorded hash; carries suspects."""

    def __init__(self, height: int, suspects: frozenset[int], contributors: frozenset[int]):
        super().__init__(
            f"block {height} failed verification; suspects {sorted(suspects)}"
        )
        self.height = height
        self.suspects = suspects
        self.contributors = contributors


@dataclass
class NodeConfig:
    """Per-node identity and policy.

    ``r_policy`` maps a block height to the number of coded fragments to
    keep for it; a bare int means the same count for every height.
    ``retry_budget`` caps how many extra fragments recovery fetches when a
    gathered system turns out rank-deficient.
    """

    node_id: int
    params: CodecParams
    r_policy: int | Callable[[int], int] = 1
    retry_budget: int = 8

    def r_for(self, height: int) -> int:
        r = self.r_policy if isinstance(self.r_policy, int) else self.r_policy(height)
        if r < 1:
            raise ValueError(f"r_policy must give >= 1 fragment, got {r} at {height}")
        return r


class FragmentStore:
    """Durable per-height records: header, r, and the coded fragments."""

    def __init__(
        self,
        root: str | Path,
        params: CodecParams | None = None,
        node_id: int | None = None,
    ):
        self.root = Path(root)
        meta_path = self.root / "store.json"
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            self.params = CodecParams(k=meta["k"], max_block_size=meta["max_block_size"])
            self.node_id = meta["node_id"]
            if params is not None and params != self.params:
                raise ValueError("store on disk was created with different params")
            if node_id is not None and node_id != self.node_id:
                raise ValueError("store on disk belongs to a different node")
        else:
            if params is None or node_id is None:
                raise ValueError("a new store needs params and node_id")
            self.params = params
            self.node_id = node_id
            self.root.mkdir(parents=True, exist_ok=True)
            meta_path.write_text(
                json.dumps(
                    {
                        "k": params.k,
                        "max_block_size": params.max_block_size,
                        "node_id": node_id,
                    }
                )
            )
        self._headers: dict[int, BlockHeader] = {}
        self._counts: dict[int, int] = {}
        self._cache: dict[int, list[CodedFragment]] = {}
        for sub in self.root.iterdir():
            if not sub.is_dir() or not sub.name.isdigit():
                continue
            height = int(sub.name)
            rec = json.loads((sub / "header.json").read_text())
            self._headers[height] = BlockHeader(
                height=rec["height"],
                prev_hash=bytes.fromhex(rec["prev_hash"]),
                payload_hash=bytes.fromhex(rec["payload_hash"]),
            )
            self._counts[height] = rec["r"]

    def _height_dir(self, height: int) -> Path:
        return self.root / str(height)

    def heights(self) -> list[int]:
        return sorted(self._headers)

    def __contains__(self, height: int) -> bool:
        return height in self._headers

    def header(self, height: int) -> BlockHeader:
        if height not in self._headers:
            raise UnknownBlockError(height)
        return self._headers[height]

    def fragment_count(self, height: int) -> int:
        if height not in self._counts:
            raise UnknownBlockError(height)
        return self._counts[height]

    def put(self, header: BlockHeader, fragments: Sequence[CodedFragment]) -> None:
        """Persist one block's header and this node's coded fragments."""
        if header.height in self._headers:
            raise ValueError(f"height {header.height} already stored")
        if not fragments:
            raise MinimumOneFragmentError("a block needs at least one fragment")
        for i, frag in enumerate(fragments):
            if frag.is_plain:
                raise ValueError("a low-storage store holds coded fragments only")
            if frag.node_id != self.node_id or frag.block_height != header.height:
                raise ValueError("fragment identity does not match the store")
            if frag.row_index != i:
                raise ValueError("fragments must be rows 0..r-1 in order")
        subdir = self._height_dir(header.height)
        subdir.mkdir(parents=True)
        for frag in fragments:
            path = subdir / f"fragment_{frag.row_index:04d}.lsbf"
            path.write_bytes(pack_fragment(frag, self.params))
        (subdir / "header.json").write_text(
            json.dumps(
                {
                    "height": header.height,
                    "prev_hash": header.prev_hash.hex(),
                    "payload_hash": header.payload_hash.hex(),
                    "r": len(fragments),
                }
            )
        )
        self._headers[header.height] = header
        self._counts[header.height] = len(fragments)
        self._cache[header.height] = list(fragments)

    def fragments(self, height: int) -> list[CodedFragment]:
        if height not in self._headers:
            raise UnknownBlockError(height)
        if height not in self._cache:
            loaded = []
            for path in sorted(self._height_dir(height).glob("fragment_*.lsbf")):
                frag, params = unpack_fragment(path.read_bytes())
                if params != self.params:
                    raise ValueError(f"foreign fragment record in store: {path}")
                loaded.append(frag)
            self._cache[height] = loaded
        return self._cache[height]

    def serve_fragments(self, height: int, want: int) -> list[CodedFragment]:
        """Up to ``want`` stored fragments with distinct rows, lowest first."""
        if height not in self._headers:
            raise UnknownBlockError(height)
        if want <= 0:
            return []
        return self.fragments(height)[:want]

    def get_fragments(self, height: int, max_count: int) -> list[CodedFragment]:
        # Source-protocol variant: unknown heights are just empty.
        try:
            return self.serve_fragments(height, max_count)
        except UnknownBlockError:
            return []

    def prune(self, height: int, new_r: int) -> None:
        """Drop stored rows above ``new_r``; nothing is recomputed."""
        current = self.fragment_count(height)
        if new_r == 0:
            raise MinimumOneFragmentError(
                "every block must keep at least one coded fragment"
            )
        if not 1 <= new_r <= current:
            raise ValueError(f"new_r must be in 1..{current}, got {new_r}")
        if new_r == current:
            return
        subdir = self._height_dir(height)
        for row in range(new_r, current):
            (subdir / f"fragment_{row:04d}.lsbf").unlink()
        rec = json.loads((subdir / "header.json").read_text())
        rec["r"] = new_r
        (subdir / "header.json").write_text(json.dumps(rec))
        self._counts[height] = new_r
        if height in self._cache:
            self._cache[height] = self._cache[height][:new_r]

    def storage_bytes(self) -> int:
        """Fragment payload bytes held (excludes fixed per-height metadata)."""
        return sum(self._counts.values()) * self.params.fragment_size


def bootstrap(
    config: NodeConfig, source: Iterable[Block], store_root: str | Path
) -> FragmentStore:
    """Ingest a chain stream: validate, encode, persist, discard.

    Exactly one block payload is alive at a time; the previous block is
    released before the next one is pulled from ``source``. On a validation
    failure at height h the store keeps heights 0..h-1 on disk and
    ``BootstrapRejectedError(h)`` is raised.
    """
    store = FragmentStore(store_root, params=config.params, node_id=config.node_id)
    prev_header: BlockHeader | None = None
    height = 0
    iterator = iter(source)
    while True:
        try:
            block = next(iterator)
        except StopIteration:
            break
        if not validate_block(block, prev_header, height):
            raise BootstrapRejectedError(height)
        seed = CoefficientSeed(config.node_id, height)
        fragments = encode_fragments(
            config.params, seed, block.payload, config.r_for(height)
        )
        store.put(block.header, fragments)
        prev_header = block.header
        del block  # keep plaintext residency at one block while pulling the next
        height += 1
    return store


# ---------------------------------------------------------------------------
# recovery


class _Gatherer:
    """Round-robin fragment collection over a shuffled list of sources."""

    def __init__(self, sources: Sequence, height: int, rng: random.Random):
        self.height = height
        self.sources = list(sources)
        rng.shuffle(self.sources)
        self.have = [0] * len(self.sources)
        self.exhausted = [False] * len(self.sources)
        self.contacted: set[int] = set()
        self.fragments: list[CodedFragment] = []
        self._keys: set[tuple] = set()
        self._by_source: list[list[CodedFragment]] = [[] for _ in self.sources]
        self._cursor = 0

    def _fetch_one(self, i: int) -> CodedFragment | None:
        """Ask source i for its next fragment; None when nothing new came."""
        if self.exhausted[i]:
            return None
        self.contacted.add(i)
        got = self.sources[i].get_fragments(self.height, self.have[i] + 1)
        if len(got) <= self.have[i]:
            self.exhausted[i] = True
            return None
        frag = got[self.have[i]]
        self.have[i] += 1
        if frag.key in self._keys:
            return None  # duplicate identity from another source; drop it
        self._keys.add(frag.key)
        self.fragments.append(frag)
        self._by_source[i].append(frag)
        return frag

    def gather(self, target: int, exclude: frozenset[int] = frozenset()) -> int:
        """Fetch round-robin until ``target`` usable fragments or exhaustion.

        ``exclude`` skips sources whose fragments carry those node ids,
        and ``target`` counts only non-excluded fragments.
        """
        count = sum(1 for f in self.fragments if f.node_id not in exclude)
        while count < target:
            progress = False
            for step in range(len(self.sources)):
                i = (self._cursor + step) % len(self.sources)
                if self.exhausted[i]:
                    continue
                src_frags = self._by_source[i]
                if src_frags and src_frags[0].node_id in exclude:
                    continue
                frag = self._fetch_one(i)
                if not self.exhausted[i]:
                    progress = True  # the source advanced even on a duplicate
                if frag is not None and frag.node_id not in exclude:
                    count += 1
                    if count >= target:
                        self._cursor = (i + 1) % len(self.sources)
                        return count
            if not progress:
                break
        return count

    def selection(self, exclude: frozenset[int] = frozenset()) -> list[CodedFragment]:
        return [f for f in self.fragments if f.node_id not in exclude]


def _try_decode(
    params: CodecParams,
    height: int,
    fragments: list[CodedFragment],
    expected_hash: bytes,
) -> bytes | None:
    """Best-effort decode returning a hash-verified payload, else None."""
    decoding = DecodingSet(height)
    for f in fragments:
        decoding.add(f)
    try:
        payload, _ = solve_fragments(params, decoding)
    except (InsufficientRankError, CorruptDecodeError):
        return None
    return payload if verify_decoded(payload, expected_hash) else None


def _mismatching_sources(
    params: CodecParams,
    height: int,
    payload: bytes,
    fragments: list[CodedFragment],
) -> frozenset[int]:
    """Node ids whose served fragments differ from an honest encoding."""
    plain = fragment_block(params, payload)
    by_node: dict[int, list[CodedFragment]] = {}
    for f in fragments:
        by_node.setdefault(f.node_id, []).append(f)
    suspects = set()
    for node_id, frags in by_node.items():
        for f in frags:
            if f.is_plain:
                honest = plain[f.plain_index].tobytes()
            else:
                row = coefficient_row(CoefficientSeed(node_id, height), params.k, f.row_index)
                honest = mat_mul(row.reshape(1, -1), plain)[0].tobytes()
            if f.data != honest:
                suspects.add(node_id)
                break
    return frozenset(suspects)


def _identify_tampering(
    config: NodeConfig,
    height: int,
    gatherer: _Gatherer,
    expected_hash: bytes,
    used: list[CodedFragment],
    rng: random.Random,
) -> TamperDetectedError:
    """Isolate which sources served bad fragments after a failed verify.

    Re-decodes with one contributing source excluded at a time; when a
    single exclusion is not enough (several corrupt sources at once),
    falls back to excluding random halves of the contributors. Once any
    verified payload is obtained, each gathered fragment is compared with
    its honest re-encoding, which names every misbehaving source exactly.
    """
    params = config.params
    contributors = sorted({f.node_id for f in used})
    truth: bytes | None = None

    candidates: list[frozenset[int]] = [frozenset({s}) for s in contributors]
    for _ in range(64):
        half = rng.sample(contributors, max(1, len(contributors) // 2))
        candidates.append(frozenset(half))

    for exclude in candidates:
        if gatherer.gather(params.k, exclude) < params.k:
            continue
        truth = _try_decode(params, height, gatherer.selection(exclude), expected_hash)
        if truth is not None:
            break

    if truth is None:
        # Could not isolate; accuse every contributor to the failed decode.
        suspects = frozenset(contributors)
    else:
        suspects = _mismatching_sources(params, height, truth, gatherer.fragments)
    return TamperDetectedError(height, suspects, frozenset(contributors))


def recover_block(
    config: NodeConfig,
    height: int,
    sources: Sequence,
    expected_hash: bytes | None = None,
) -> bytes:
    """Rebuild one block from fragment sources, verifying the payload hash.

    Sources are visited round-robin in a seeded random order, one fragment
    per visit, until k equations are gathered; on a rank-deficient system
    up to ``config.retry_budget`` extra fragments are fetched. Raises
    ``UnrecoverableError`` when the reachable equations cannot span the
    block, and ``TamperDetectedError`` when the decoded payload contradicts
    ``expected_hash``.
    """
    if not sources:
        raise UnrecoverableError(0)
    params = config.params
    rng = random.Random((config.node_id << 64) | height)
    gatherer = _Gatherer(sources, height, rng)

    gathered = gatherer.gather(params.k)
    rows = DecodingSet(height, gatherer.fragments).coefficient_rows(params.k)
    rank = int(len(independent_rows(rows)))
    if gathered < params.k:
        raise UnrecoverableError(rank)

    extras = 0
    while rank < params.k:
        if extras >= config.retry_budget:
            raise UnrecoverableError(rank)
        target = len(gatherer.fragments) + 1
        if gatherer.gather(target) < target:
            raise UnrecoverableError(rank)
        extras += 1
        rows = DecodingSet(height, gatherer.fragments).coefficient_rows(params.k)
        rank = int(len(independent_rows(rows)))

    decoding = DecodingSet(height, gatherer.fragments)
    try:
        payload, used = solve_fragments(params, decoding)
    except CorruptDecodeError:
        # Corrupt framing has the same cause as a hash mismatch: some
        # gathered fragment was not an honest combination.
        if expected_hash is None:
            raise
        raise _identify_tampering(
            config, height, gatherer, expected_hash, list(decoding.fragments), rng
        ) from None

    if expected_hash is not None and not verify_decoded(payload, expected_hash):
        raise _identify_tampering(config, height, gatherer, expected_hash, used, rng)
    return payload
