import gc
import weakref

import pytest

from lsnode.chain import Block, build_chain
from lsnode.codec import CodecParams, encode_fragments
from lsnode.coeffgen import CoefficientSeed
from lsnode.node import (
    BootstrapRejectedError,
    FragmentStore,
    MinimumOneFragmentError,
    NodeConfig,
    TamperDetectedError,
    UnknownBlockError,
    UnrecoverableError,
    bootstrap,
    recover_block,
)

PARAMS = CodecParams(k=4, max_block_size=64)


def make_config(node_id, r=2, **kw):
    return NodeConfig(node_id=node_id, params=PARAMS, r_policy=r, **kw)


class TestFragmentStore:
    def test_bootstrap_store_contents(self, tmp_path):
        blocks = build_chain(1, 10, min_payload=10, max_payload=PARAMS.max_payload)
        config = NodeConfig(node_id=3, params=PARAMS, r_policy=5)
        store = bootstrap(config, iter(blocks), tmp_path / "store")
        assert store.heights() == list(range(10))
        assert sum(store.fragment_count(h) for h in store.heights()) == 50
        for h in range(10):
            assert store.header(h) == blocks[h].header
        # nothing but fragment records and header metadata on disk
        files = sorted(p.name for p in (tmp_path / "store").rglob("*") if p.is_file())
        assert all(
            name.endswith(".lsbf") or name in ("header.json", "store.json")
            for name in files
        )
        # compression: fragment bytes are r/k of the padded block size
        assert store.storage_bytes() == 10 * 5 * PARAMS.fragment_size

    def test_store_survives_reopen(self, tmp_path):
        blocks = build_chain(2, 4, min_payload=10, max_payload=PARAMS.max_payload)
        store = bootstrap(make_config(1), iter(blocks), tmp_path / "s")
        again = FragmentStore(tmp_path / "s")
        assert again.heights() == store.heights()
        assert again.params == PARAMS and again.node_id == 1
        assert again.fragments(2) == store.fragments(2)

    def test_serve_clamps_and_orders(self, tmp_path):
        blocks = build_chain(3, 1, min_payload=5, max_payload=20)
        store = bootstrap(make_config(1, r=5), iter(blocks), tmp_path / "s")
        got = store.serve_fragments(0, 3)
        assert [f.row_index for f in got] == [0, 1, 2]
        assert len(store.serve_fragments(0, 10)) == 5
        assert store.serve_fragments(0, 0) == []

    def test_serve_unknown_height(self, tmp_path):
        blocks = build_chain(3, 1, min_payload=5, max_payload=20)
        store = bootstrap(make_config(1), iter(blocks), tmp_path / "s")
        with pytest.raises(UnknownBlockError):
            store.serve_fragments(7, 1)
        assert store.get_fragments(7, 1) == []

    def test_prune_keeps_lowest_rows(self, tmp_path):
        blocks = build_chain(4, 1, min_payload=5, max_payload=20)
        store = bootstrap(make_config(1, r=5), iter(blocks), tmp_path / "s")
        store.prune(0, 2)
        assert store.fragment_count(0) == 2
        assert [f.row_index for f in store.fragments(0)] == [0, 1]
        # persisted: reopen sees the pruned state
        assert FragmentStore(tmp_path / "s").fragment_count(0) == 2

    @pytest.mark.parametrize("new_r", [1, 2, 4])
    def test_prune_is_idempotent(self, tmp_path, new_r):
        blocks = build_chain(4, 1, min_payload=5, max_payload=20)
        store = bootstrap(make_config(1, r=5), iter(blocks), tmp_path / "s")
        store.prune(0, new_r)
        store.prune(0, new_r)
        assert store.fragment_count(0) == new_r
        assert [f.row_index for f in store.fragments(0)] == list(range(new_r))

    def test_prune_noop_and_errors(self, tmp_path):
        blocks = build_chain(4, 1, min_payload=5, max_payload=20)
        store = bootstrap(make_config(1, r=5), iter(blocks), tmp_path / "s")
        store.prune(0, 5)
        assert store.fragment_count(0) == 5
        with pytest.raises(MinimumOneFragmentError):
            store.prune(0, 0)
        with pytest.raises(ValueError):
            store.prune(0, 6)

    def test_put_rejects_plaintext_and_foreign(self, tmp_path):
        blocks = build_chain(5, 1, min_payload=5, max_payload=20)
        store = bootstrap(make_config(1), iter(blocks), tmp_path / "s")
        from lsnode.codec import plain_fragments

        with pytest.raises(ValueError):
            store.put(blocks[0].header, plain_fragments(PARAMS, 1, b"x", node_id=1))
        foreign = encode_fragments(PARAMS, CoefficientSeed(2, 1), b"x", 1)
        with pytest.raises(ValueError):
            store.put(blocks[0].header, foreign)


class TestBootstrap:
    def test_empty_chain(self, tmp_path):
        store = bootstrap(make_config(1), iter([]), tmp_path / "s")
        assert store.heights() == []

    def test_tampered_chain_rejected_midway(self, tmp_path):
        blocks = build_chain(6, 8, min_payload=10, max_payload=PARAMS.max_payload)
        tampered = bytearray(blocks[4].payload)
        tampered[0] ^= 0xFF
        blocks[4] = Block(header=blocks[4].header, payload=bytes(tampered))
        with pytest.raises(BootstrapRejectedError) as exc:
            bootstrap(make_config(1), iter(blocks), tmp_path / "s")
        assert exc.value.height == 4
        store = FragmentStore(tmp_path / "s")
        assert store.heights() == [0, 1, 2, 3]

    def test_r_policy_by_height(self, tmp_path):
        blocks = build_chain(7, 6, min_payload=5, max_payload=20)
        # older blocks (small heights) keep fewer fragments
        config = NodeConfig(
            node_id=1, params=PARAMS, r_policy=lambda h: 1 if h < 3 else 4
        )
        store = bootstrap(config, iter(blocks), tmp_path / "s")
        assert [store.fragment_count(h) for h in range(6)] == [1, 1, 1, 4, 4, 4]

    def test_streaming_residency_is_one_block(self, tmp_path):
        # The source tracks which yielded blocks are still referenced.
        # Measured just before each yield, only the fresh block may be
        # alive: bootstrap must have released all earlier ones.
        blocks = build_chain(8, 30, min_payload=10, max_payload=PARAMS.max_payload)
        alive: list[weakref.ref] = []
        peak = 0

        def source():
            nonlocal peak
            for b in blocks:
                clone = Block(header=b.header, payload=bytes(b.payload))
                alive.append(weakref.ref(clone))
                gc.collect()
                peak = max(peak, sum(1 for r in alive if r() is not None))
                yield clone
                del clone

        bootstrap(make_config(1), source(), tmp_path / "s")
        assert peak == 1


class TestRecovery:
    def build_network(self, tmp_path, n=5, r=2, length=4):
        blocks = build_chain(11, length, min_payload=10, max_payload=PARAMS.max_payload)
        configs = [make_config(i + 1, r=r) for i in range(n)]
        stores = [
            bootstrap(c, iter(blocks), tmp_path / f"n{c.node_id}") for c in configs
        ]
        return blocks, configs, stores

    def test_roundtrips_every_block(self, tmp_path):
        blocks, configs, stores = self.build_network(tmp_path)
        for height in range(len(blocks)):
            payload = recover_block(
                configs[0], height, stores, stores[0].header(height).payload_hash
            )
            assert payload == blocks[height].payload

    def test_unrecoverable_reports_reachable_rank(self, tmp_path):
        blocks, configs, stores = self.build_network(tmp_path, n=1, r=2)
        # single node with 2 of the 4 needed equations
        with pytest.raises(UnrecoverableError) as exc:
            recover_block(configs[0], 0, stores[:1], stores[0].header(0).payload_hash)
        assert exc.value.rank == 2

    def test_no_sources(self, tmp_path):
        with pytest.raises(UnrecoverableError):
            recover_block(make_config(1), 0, [], b"\x00" * 32)

    def test_skips_unknown_heights_on_some_peers(self, tmp_path):
        blocks, configs, stores = self.build_network(tmp_path, n=3, r=2, length=2)
        short = build_chain(11, 1, min_payload=10, max_payload=PARAMS.max_payload)
        extra = bootstrap(make_config(9, r=2), iter(short), tmp_path / "n9")
        payload = recover_block(
            configs[0], 1, stores + [extra], stores[0].header(1).payload_hash
        )
        assert payload == blocks[1].payload

    def test_tampered_serving_node_is_identified(self, tmp_path):
        # Enough honest redundancy exists (3 nodes x r=2 > k) that the
        # identification can decode cleanly without the liar and then name
        # it exactly.
        blocks, configs, stores = self.build_network(tmp_path, n=3, r=2, length=1)
        # Node 9 encodes a *different* payload for height 0 but presents the
        # real header: the behaviour of a node that skipped verification.
        liar = FragmentStore(tmp_path / "liar", params=PARAMS, node_id=9)
        fake = b"this block never existed"
        liar.put(
            blocks[0].header, encode_fragments(PARAMS, CoefficientSeed(9, 0), fake, 2)
        )
        with pytest.raises(TamperDetectedError) as exc:
            recover_block(
                configs[0], 0, stores + [liar], stores[0].header(0).payload_hash
            )
        assert 9 in exc.value.suspects
        assert not exc.value.suspects - {9}  # honest peers are not accused

    def test_essential_tampered_node_still_detected(self, tmp_path):
        # With no honest redundancy the liar cannot be isolated, but the
        # tampering is still detected and the payload never accepted.
        blocks, configs, stores = self.build_network(tmp_path, n=3, r=1, length=1)
        liar = FragmentStore(tmp_path / "liar", params=PARAMS, node_id=9)
        fake = b"this block never existed"
        liar.put(
            blocks[0].header, encode_fragments(PARAMS, CoefficientSeed(9, 0), fake, 2)
        )
        with pytest.raises(TamperDetectedError) as exc:
            recover_block(
                configs[0], 0, stores + [liar], stores[0].header(0).payload_hash
            )
        assert 9 in exc.value.suspects

    def test_recovery_succeeds_without_byzantine_fragments_in_use(self, tmp_path):
        blocks, configs, stores = self.build_network(tmp_path, n=6, r=4, length=1)
        payload = recover_block(
            configs[2], 0, stores, stores[2].header(0).payload_hash
        )
        assert payload == blocks[0].payload


class TestNodeConfig:
    def test_r_for_validation(self):
        cfg = NodeConfig(node_id=1, params=PARAMS, r_policy=lambda h: 0)
        with pytest.raises(ValueError):
            cfg.r_for(0)
        assert make_config(1, r=3).r_for(99) == 3
