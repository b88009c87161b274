"""Command-line front end.

Subcommands map onto the library layers: ``encode``/``decode``/``bench``
drive the codec on files, ``chain`` builds and checks fixture chains,
``node`` runs a single store through bootstrap/serve/recover, ``analyze``
evaluates the closed-form availability models, and ``sim`` runs the
deterministic network scenarios from a key=value config file.

Exit codes, one per error family:

    0  success
    1  unexpected error (I/O and similar)
    2  usage error
    3  payload too large for the block size
    4  not enough independent fragments (insufficient rank, unrecoverable)
    5  corrupt decode (implausible framing)
    6  integrity failure (hash mismatch, tampering detected)
    7  malformed fragment/chain file or inconsistent parameters
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, bench, simnet
from .chain import build_chain, read_chain, validate_chain, write_chain
from .codec import (
    BlockTooLargeError,
    CodecParams,
    CorruptDecodeError,
    DecodingSet,
    DuplicateFragmentError,
    InsufficientRankError,
    WireFormatError,
    decode_block,
    encode_fragments,
    pack_fragment,
    unpack_fragment,
    verify_decoded,
)
from .coeffgen import CoefficientSeed
from .node import (
    BootstrapRejectedError,
    FragmentStore,
    NodeConfig,
    TamperDetectedError,
    UnknownBlockError,
    UnrecoverableError,
    bootstrap,
    recover_block,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_TOO_LARGE = 3
EXIT_RANK = 4
EXIT_CORRUPT = 5
EXIT_INTEGRITY = 6
EXIT_FORMAT = 7


class _CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fail(code: int, message: str) -> _CliFailure:
    return _CliFailure(code, message)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _default_block_size(payload_len: int, k: int) -> int:
    framed = payload_len + 8
    return ((framed + k - 1) // k) * k


# ---------------------------------------------------------------------------
# codec commands


def _cmd_encode(args) -> int:
    payload = Path(args.infile).read_bytes()
    sb = args.sb if args.sb else _default_block_size(len(payload), args.k)
    try:
        params = CodecParams(k=args.k, max_block_size=sb)
    except ValueError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    seed = CoefficientSeed(args.node_id, args.height)
    try:
        fragments = encode_fragments(params, seed, payload, args.r)
    except BlockTooLargeError as exc:
        raise _fail(EXIT_TOO_LARGE, str(exc))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for frag in fragments:
        name = f"frag_{args.node_id}_{args.height}_{frag.row_index:04d}.lsbf"
        (out_dir / name).write_bytes(pack_fragment(frag, params))
    print(f"wrote {len(fragments)} fragments of {params.fragment_size} bytes to {out_dir}")
    return EXIT_OK


def _cmd_decode(args) -> int:
    fragments = []
    params = None
    height = None
    for path in args.fragments:
        try:
            frag, p = unpack_fragment(Path(path).read_bytes())
        except WireFormatError as exc:
            raise _fail(EXIT_FORMAT, f"{path}: {exc}")
        if params is None:
            params, height = p, frag.block_height
        elif p != params:
            raise _fail(EXIT_FORMAT, f"{path}: codec parameters differ between files")
        elif frag.block_height != height:
            raise _fail(EXIT_FORMAT, f"{path}: block height differs between files")
        fragments.append(frag)
    if params is None:
        raise _fail(EXIT_USAGE, "no fragment files given")
    try:
        decoding = DecodingSet(height, fragments)
    except DuplicateFragmentError as exc:
        raise _fail(EXIT_FORMAT, str(exc))
    try:
        payload = decode_block(params, decoding)
    except InsufficientRankError as exc:
        raise _fail(EXIT_RANK, f"need rank {params.k}, reached {exc.rank}")
    except CorruptDecodeError as exc:
        raise _fail(EXIT_CORRUPT, str(exc))
    if args.expected_hash:
        if not verify_decoded(payload, bytes.fromhex(args.expected_hash)):
            raise _fail(EXIT_INTEGRITY, "decoded payload does not match expected hash")
    Path(args.out).write_bytes(payload)
    print(f"decoded {len(payload)} bytes to {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    report = bench.run_benchmarks(
        k_values=args.k,
        r_values=args.r,
        block_size=args.block_size,
        repetitions=args.reps,
        decode_k_values=args.decode_k,
    )
    text = bench.format_report(report)
    lines = [text]
    if len(args.r) >= 2:
        hi, lo = max(args.r), min(args.r)
        for k in args.k:
            lines.append(
                f"encode ratio r={hi} vs r={lo} at k={k}: "
                f"{report.encode_ratio(k, hi, lo):.3f}"
            )
    decode_ks = sorted(args.decode_k if args.decode_k is not None else args.k)
    if len(decode_ks) >= 2:
        lines.append(
            f"decode ratio k={decode_ks[-1]} vs k={decode_ks[0]}: "
            f"{report.decode_ratio(decode_ks[-1], decode_ks[0]):.3f}"
        )
    out_text = "\n".join(lines)
    print(out_text)
    if args.out:
        Path(args.out).write_text(out_text + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# chain commands


def _cmd_chain_build(args) -> int:
    blocks = build_chain(args.seed, args.length, args.min_size, args.max_size)
    write_chain(args.out, blocks)
    print(f"wrote {len(blocks)} blocks to {args.out}")
    return EXIT_OK


def _cmd_chain_validate(args) -> int:
    try:
        blocks = read_chain(args.chain)
    except ValueError as exc:
        raise _fail(EXIT_FORMAT, str(exc))
    ok, bad = validate_chain(blocks)
    if not ok:
        raise _fail(EXIT_INTEGRITY, f"chain invalid at height {bad}")
    print(f"chain of {len(blocks)} blocks is valid")
    return EXIT_OK


# ---------------------------------------------------------------------------
# node commands


def _cmd_node_bootstrap(args) -> int:
    try:
        params = CodecParams(k=args.k, max_block_size=args.sb)
    except ValueError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    config = NodeConfig(node_id=args.node_id, params=params, r_policy=args.r)
    from .chain import iter_chain

    try:
        store = bootstrap(config, iter_chain(args.chain), args.store)
    except BootstrapRejectedError as exc:
        raise _fail(EXIT_INTEGRITY, f"chain rejected at height {exc.height}")
    except BlockTooLargeError as exc:
        raise _fail(EXIT_TOO_LARGE, str(exc))
    except ValueError as exc:
        raise _fail(EXIT_FORMAT, str(exc))
    print(
        f"bootstrapped {len(store.heights())} blocks, "
        f"{store.storage_bytes()} fragment bytes in {args.store}"
    )
    return EXIT_OK


def _cmd_node_serve(args) -> int:
    store = FragmentStore(args.store)
    try:
        fragments = store.serve_fragments(args.height, args.want)
    except UnknownBlockError:
        raise _fail(EXIT_RANK, f"no fragments stored for height {args.height}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for frag in fragments:
        name = f"frag_{store.node_id}_{args.height}_{frag.row_index:04d}.lsbf"
        (out_dir / name).write_bytes(pack_fragment(frag, store.params))
    print(f"served {len(fragments)} fragments to {out_dir}")
    return EXIT_OK


def _cmd_node_recover(args) -> int:
    own = FragmentStore(args.store)
    sources = [own] + [FragmentStore(p) for p in _split_paths(args.peers)]
    config = NodeConfig(node_id=own.node_id, params=own.params)
    expected = None
    if not args.no_verify:
        try:
            expected = own.header(args.height).payload_hash
        except UnknownBlockError:
            raise _fail(EXIT_FORMAT, f"own store has no header for height {args.height}")
    try:
        payload = recover_block(config, args.height, sources, expected)
    except UnrecoverableError as exc:
        raise _fail(EXIT_RANK, f"unrecoverable, rank {exc.rank}")
    except CorruptDecodeError as exc:
        raise _fail(EXIT_CORRUPT, str(exc))
    except TamperDetectedError as exc:
        raise _fail(
            EXIT_INTEGRITY,
            f"tampering detected, suspect nodes {sorted(exc.suspects)}",
        )
    Path(args.out).write_bytes(payload)
    print(f"recovered {len(payload)} bytes to {args.out}")
    return EXIT_OK


def _split_paths(text: str) -> list[str]:
    return [p for p in text.split(",") if p]


# ---------------------------------------------------------------------------
# analyze commands


def _cmd_analyze_coded(args) -> int:
    try:
        n = analysis.min_nodes_for_threshold(
            "coded", k=args.k, p=args.p, threshold=args.threshold
        )
    except ValueError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    value = analysis.irrecoverability_coded(
        analysis.Distribution.geometric(args.p), n, args.k
    )
    print(f"min nodes: {n} (irrecoverability {value:.6g} < {args.threshold:g})")
    return EXIT_OK


def _cmd_analyze_replicated(args) -> int:
    try:
        n = analysis.min_nodes_for_threshold(
            "replicated", c=args.c, threshold=args.threshold
        )
    except ValueError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    value = analysis.irrecoverability_replicated(args.c, n)
    print(f"min nodes: {n} (irrecoverability {value:.6g} < {args.threshold:g})")
    return EXIT_OK


def _cmd_analyze_curves(args) -> int:
    try:
        rows = analysis.emit_curves(
            args.model, args.out, n_max=args.n_max, k=args.k, p=args.p, c=args.c
        )
    except ValueError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_analyze_netload(args) -> int:
    try:
        report = analysis.network_load(
            full_nodes=args.full_nodes,
            light_nodes=args.light_nodes,
            per_node_rate_mbps=args.rate_mbps,
            ls_nodes=args.ls_nodes,
            connections_per_recovery=args.connections,
        )
    except ValueError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    print(f"replicated: {report.replicated_per_full_node_mbps:g} Mbps per full node")
    print(
        f"coded: {report.coded_per_node_mbps:g} Mbps per serving node "
        f"({report.total_connections} connections at {report.per_connection_mbps:g} Mbps)"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sim commands


def _write_metrics(metrics, out: str | None) -> None:
    print(metrics.summary())
    if out:
        with open(out, "w") as fh:
            for key, value in metrics.table():
                fh.write(f"{key} {value:.10g}\n")
        print(f"metrics table written to {out}")


def _cmd_sim(args) -> int:
    try:
        config = simnet.load_sim_config(args.config)
    except ValueError as exc:
        raise _fail(EXIT_USAGE, f"bad config: {exc}")
    if args.mode == "availability":
        trials = args.trials if args.trials else config.trials
        metrics = simnet.run_availability(config, trials)
    elif args.mode == "recovery":
        metrics = simnet.run_recovery_scenario(config, store_root=args.store_root)
    else:
        byz = tuple(args.byzantine) if args.byzantine is not None else None
        metrics = simnet.run_tamper_scenario(
            config, byzantine=byz, store_root=args.store_root
        )
    _write_metrics(metrics, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsnode",
        description="Erasure-coded low-storage blockchain node toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a file into coded fragment records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--sb", type=int, default=0, help="block size; default fits the input")
    p.add_argument("--node-id", type=int, required=True)
    p.add_argument("--height", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode fragment records back into the payload")
    p.add_argument("fragments", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--expected-hash", default=None, help="hex SHA-256 to verify against")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("bench", help="measure encode/decode throughput")
    p.add_argument("--k", type=_int_list, default=[25, 50, 100])
    p.add_argument("--r", type=_int_list, default=[5, 10])
    p.add_argument("--decode-k", type=_int_list, default=None)
    p.add_argument("--block-size", type=int, default=1_000_000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("chain", help="fixture chain utilities")
    chain_sub = p.add_subparsers(dest="chain_command", required=True)
    pc = chain_sub.add_parser("build", help="generate a deterministic chain file")
    pc.add_argument("--seed", type=int, required=True)
    pc.add_argument("--length", type=int, required=True)
    pc.add_argument("--min-size", type=int, default=64)
    pc.add_argument("--max-size", type=int, default=1024)
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=_cmd_chain_build)
    pc = chain_sub.add_parser("validate", help="check a chain file end to end")
    pc.add_argument("chain")
    pc.set_defaults(func=_cmd_chain_validate)

    p = sub.add_parser("node", help="single-node operations on a fragment store")
    node_sub = p.add_subparsers(dest="node_command", required=True)
    pn = node_sub.add_parser("bootstrap", help="ingest a chain file into a store")
    pn.add_argument("--chain", required=True)
    pn.add_argument("--store", required=True)
    pn.add_argument("--node-id", type=int, required=True)
    pn.add_argument("--k", type=int, required=True)
    pn.add_argument("--sb", type=int, required=True)
    pn.add_argument("--r", type=int, required=True)
    pn.set_defaults(func=_cmd_node_bootstrap)
    pn = node_sub.add_parser("serve", help="export stored fragments for one height")
    pn.add_argument("--store", required=True)
    pn.add_argument("--height", type=int, required=True)
    pn.add_argument("--want", type=int, required=True)
    pn.add_argument("--out-dir", required=True)
    pn.set_defaults(func=_cmd_node_serve)
    pn = node_sub.add_parser("recover", help="rebuild a block from peer stores")
    pn.add_argument("--height", type=int, required=True)
    pn.add_argument("--store", required=True, help="the recovering node's store")
    pn.add_argument("--peers", default="", help="comma-separated peer store paths")
    pn.add_argument("--out", required=True)
    pn.add_argument("--no-verify", action="store_true")
    pn.set_defaults(func=_cmd_node_recover)

    p = sub.add_parser("analyze", help="closed-form availability models")
    an_sub = p.add_subparsers(dest="analyze_command", required=True)
    pa = an_sub.add_parser("coded", help="min nodes for the coded model")
    pa.add_argument("--k", type=int, required=True)
    pa.add_argument("--p", type=float, required=True)
    pa.add_argument("--threshold", type=float, required=True)
    pa.set_defaults(func=_cmd_analyze_coded)
    pa = an_sub.add_parser("replicated", help="min nodes for random replication")
    pa.add_argument("--c", type=float, required=True)
    pa.add_argument("--threshold", type=float, default=5e-6)
    pa.set_defaults(func=_cmd_analyze_replicated)
    pa = an_sub.add_parser("curves", help="emit curve data for plotting")
    pa.add_argument("--model", choices=["coded", "replicated", "geometric"], required=True)
    pa.add_argument("--out", required=True)
    pa.add_argument("--n-max", type=int, default=100)
    pa.add_argument("--k", type=int, default=None)
    pa.add_argument("--p", type=float, default=None)
    pa.add_argument("--c", type=float, default=None)
    pa.set_defaults(func=_cmd_analyze_curves)
    pa = an_sub.add_parser("netload", help="serving-load arithmetic")
    pa.add_argument("--full-nodes", type=int, required=True)
    pa.add_argument("--light-nodes", type=int, required=True)
    pa.add_argument("--rate-mbps", type=float, required=True)
    pa.add_argument("--ls-nodes", type=int, default=1)
    pa.add_argument("--connections", type=int, default=1)
    pa.set_defaults(func=_cmd_analyze_netload)

    p = sub.add_parser("sim", help="deterministic network simulations")
    p.add_argument("mode", choices=["availability", "recovery", "tamper"])
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=0, help="override config trials")
    p.add_argument("--byzantine", type=_int_list, default=None)
    p.add_argument("--store-root", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sim)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
