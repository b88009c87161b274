"""Throughput measurements for encoding and decoding.

Encoding work grows with r (each coded fragment is one pass over the
block) and is independent of k; decoding work grows with k (the inverse
matrix is applied to k fragments) plus an O(k^3) inversion that vanishes
for megabyte blocks. Absolute numbers are hardware-bound and only
reported; the derived ratios are what the scaling checks pin down.

Timings take the median over repetitions and run single-threaded.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import median

import numpy as np

from .codec import (
    CodecParams,
    DecodingSet,
    InsufficientRankError,
    decode_block,
    encode_fragments,
)
from .coeffgen import CoefficientSeed


@dataclass(frozen=True)
class BenchRecord:
    operation: str  # "encode" or "decode"
    k: int
    r: int
    block_size: int
    repetitions: int
    throughput_bps: float  # block bytes per second, median over repetitions

    def __post_init__(self):
        if self.throughput_bps <= 0:
            raise ValueError("throughput must be positive")


@dataclass
class BenchReport:
    records: list[BenchRecord]

    def _one(self, operation: str, *, k: int, r: int | None = None) -> BenchRecord:
        hits = [
            rec
            for rec in self.records
            if rec.operation == operation and rec.k == k and (r is None or rec.r == r)
        ]
        if len(hits) != 1:
            raise KeyError(f"no unique {operation} record for k={k}, r={r}")
        return hits[0]

    def encode_ratio(self, k: int, r_high: int, r_low: int) -> float:
        """throughput(r_high) / throughput(r_low) at fixed k and block size."""
        a = self._one("encode", k=k, r=r_high)
        b = self._one("encode", k=k, r=r_low)
        if a.block_size != b.block_size:
            raise ValueError("ratios only compare runs with equal block size")
        return a.throughput_bps / b.throughput_bps

    def decode_ratio(self, k_high: int, k_low: int) -> float:
        """throughput(k_high) / throughput(k_low) at equal block size."""
        a = self._one("decode", k=k_high)
        b = self._one("decode", k=k_low)
        if a.block_size != b.block_size:
            raise ValueError("ratios only compare runs with equal block size")
        return a.throughput_bps / b.throughput_bps

    def encode_spread(self, r: int) -> float:
        """Relative spread of encode throughput across k at fixed r."""
        values = [rec.throughput_bps for rec in self.records
                  if rec.operation == "encode" and rec.r == r]
        if len(values) < 2:
            raise KeyError(f"need encode records at several k for r={r}")
        return (max(values) - min(values)) / max(values)


def _time_median(fn, repetitions: int) -> float:
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return median(times)


def bench_encode(
    k: int, r: int, block_size: int, repetitions: int, seed: int = 1
) -> BenchRecord:
    if repetitions < 3:
        raise ValueError("need at least 3 repetitions for a stable median")
    params = CodecParams(k=k, max_block_size=block_size)
    payload = np.random.default_rng(seed).bytes(params.max_payload)
    cseed = CoefficientSeed(seed, 0)
    encode_fragments(params, cseed, payload, r)  # warm up compiled kernels
    elapsed = _time_median(lambda: encode_fragments(params, cseed, payload, r), repetitions)
    return BenchRecord(
        operation="encode",
        k=k,
        r=r,
        block_size=block_size,
        repetitions=repetitions,
        throughput_bps=block_size / elapsed,
    )


def bench_decode(
    k: int, block_size: int, repetitions: int, seed: int = 1
) -> BenchRecord:
    if repetitions < 3:
        raise ValueError("need at least 3 repetitions for a stable median")
    params = CodecParams(k=k, max_block_size=block_size)
    payload = np.random.default_rng(seed).bytes(params.max_payload)
    # One fragment from each of k distinct nodes, like a real gather. A
    # random k-row system is singular with probability ~2**-8; reroll the
    # node ids until the system solves.
    for base in range(1, 11):
        decoding = DecodingSet(0)
        for node in range(base * k, base * k + k):
            frag = encode_fragments(params, CoefficientSeed(node, 0), payload, 1)[0]
            decoding.add(frag)
        try:
            decoded = decode_block(params, decoding)  # also warms the kernels
            break
        except InsufficientRankError:
            continue
    else:
        raise RuntimeError("could not build a full-rank benchmark system")
    assert decoded == payload
    elapsed = _time_median(lambda: decode_block(params, decoding), repetitions)
    return BenchRecord(
        operation="decode",
        k=k,
        r=k,
        block_size=block_size,
        repetitions=repetitions,
        throughput_bps=block_size / elapsed,
    )


def run_benchmarks(
    k_values: list[int],
    r_values: list[int],
    block_size: int,
    repetitions: int,
    decode_k_values: list[int] | None = None,
) -> BenchReport:
    records = []
    for k in k_values:
        for r in r_values:
            records.append(bench_encode(k, r, block_size, repetitions))
    for k in decode_k_values if decode_k_values is not None else k_values:
        records.append(bench_decode(k, block_size, repetitions))
    return BenchReport(records)


def format_report(report: BenchReport) -> str:
    lines = [f"{'op':<8} {'k':>4} {'r':>4} {'block':>9} {'reps':>4} {'MB/s':>10}"]
    for rec in report.records:
        lines.append(
            f"{rec.operation:<8} {rec.k:>4} {rec.r:>4} {rec.block_size:>9} "
            f"{rec.repetitions:>4} {rec.throughput_bps / 1e6:>10.1f}"
        )
    return "\n".join(lines)
