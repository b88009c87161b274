import pytest

from lsnode.bench import (
    BenchRecord,
    BenchReport,
    bench_decode,
    bench_encode,
    format_report,
    run_benchmarks,
)


def test_encode_record_fields():
    rec = bench_encode(k=10, r=2, block_size=20_000, repetitions=3)
    assert rec.operation == "encode"
    assert rec.k == 10 and rec.r == 2
    assert rec.throughput_bps > 0


def test_decode_record_fields():
    rec = bench_decode(k=10, block_size=20_000, repetitions=3)
    assert rec.operation == "decode"
    assert rec.throughput_bps > 0


def test_repetition_floor():
    with pytest.raises(ValueError):
        bench_encode(k=10, r=2, block_size=20_000, repetitions=2)


def test_report_ratios_and_spread():
    report = run_benchmarks(
        k_values=[10, 20], r_values=[2, 4], block_size=40_000, repetitions=3
    )
    assert report.encode_ratio(10, 4, 2) > 0
    assert report.decode_ratio(20, 10) > 0
    assert 0.0 <= report.encode_spread(2) < 1.0
    with pytest.raises(KeyError):
        report.encode_ratio(99, 4, 2)


def test_ratio_requires_equal_block_size():
    a = BenchRecord("encode", k=10, r=2, block_size=1000, repetitions=3,
                    throughput_bps=1.0)
    b = BenchRecord("encode", k=10, r=4, block_size=2000, repetitions=3,
                    throughput_bps=1.0)
    with pytest.raises(ValueError):
        BenchReport([a, b]).encode_ratio(10, 4, 2)


def test_format_report():
    report = run_benchmarks([10], [2], 20_000, 3, decode_k_values=[])
    text = format_report(report)
    assert "encode" in text and "MB/s" in text
