import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsnode.gf256 import (
    DimensionError,
    INV_TABLE,
    MUL_TABLE,
    SingularMatrixError,
    gf_add,
    gf_inv,
    gf_mul,
    independent_rows,
    mat_invert,
    mat_mul,
    mat_rank,
    rank_many,
)
from reference import gmul_shift_reduce, ginv_exhaustive, matmul_reference

elements = st.integers(min_value=0, max_value=255)


class TestScalars:
    def test_add_examples(self):
        assert gf_add(0x00, 0x5A) == 0x5A
        assert gf_add(0x57, 0x83) == 0xD4
        assert gf_add(0xFF, 0xFF) == 0x00

    def test_mul_examples(self):
        assert gf_mul(0x13, 0x01) == 0x13
        assert gf_mul(0x02, 0x80) == 0x1B  # 0x100 reduced by 0x11B
        assert gf_mul(0x57, 0x83) == 0xC1

    def test_inv_examples(self):
        assert gf_inv(0x01) == 0x01
        assert gf_inv(0x02) == 0x8D
        with pytest.raises(ZeroDivisionError):
            gf_inv(0x00)

    def test_mul_matches_shift_and_reduce_exhaustively(self):
        for a in range(256):
            for b in range(256):
                assert MUL_TABLE[a, b] == gmul_shift_reduce(a, b)

    def test_inv_table_spot_checks(self):
        for a in (1, 2, 3, 0x53, 0xCA, 255):
            assert INV_TABLE[a] == ginv_exhaustive(a)

    def test_all_inverses_exhaustive(self):
        for a in range(1, 256):
            assert gf_mul(a, gf_inv(a)) == 1

    def test_range_checks(self):
        with pytest.raises(ValueError):
            gf_mul(256, 1)
        with pytest.raises(ValueError):
            gf_add(-1, 0)

    @given(elements, elements)
    def test_commutativity(self, a, b):
        assert gf_mul(a, b) == gf_mul(b, a)
        assert gf_add(a, b) == gf_add(b, a)

    @given(elements, elements, elements)
    def test_associativity_and_distributivity(self, a, b, c):
        assert gf_mul(gf_mul(a, b), c) == gf_mul(a, gf_mul(b, c))
        assert gf_mul(a, gf_add(b, c)) == gf_add(gf_mul(a, b), gf_mul(a, c))

    def test_axioms_bulk(self):
        # 1e5 random triples, vectorized through the tables.
        rng = np.random.default_rng(0)
        a, b, c = rng.integers(0, 256, size=(3, 100_000), dtype=np.uint8)
        assert np.array_equal(MUL_TABLE[a, b], MUL_TABLE[b, a])
        assert np.array_equal(
            MUL_TABLE[MUL_TABLE[a, b], c], MUL_TABLE[a, MUL_TABLE[b, c]]
        )
        assert np.array_equal(
            MUL_TABLE[a, b ^ c], MUL_TABLE[a, b] ^ MUL_TABLE[a, c]
        )
        assert np.array_equal(MUL_TABLE[a, np.uint8(1)], a)


class TestMatrices:
    def test_identity_matmul(self):
        out = mat_mul(np.eye(2, dtype=np.uint8), [b"\x01", b"\x02"])
        assert out.tolist() == [[1], [2]]

    def test_xor_row(self):
        out = mat_mul([[1, 1]], [b"\x01", b"\x02"])
        assert out.tolist() == [[3]]

    def test_scaled_row(self):
        out = mat_mul([[0x02, 0x00]], [b"\x80", b"\xff"])
        assert out.tolist() == [[0x1B]]

    def test_zero_coefficient_row_gives_zero_output(self):
        out = mat_mul([[0, 0, 0]], [b"\x10\x20", b"\x30\x40", b"\x55\x66"])
        assert out.tolist() == [[0, 0]]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            mat_mul([[1, 2, 3]], [b"\x01", b"\x02"])
        with pytest.raises(DimensionError):
            mat_mul([[1, 2], [3]], [b"\x01", b"\x02"])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32))
    def test_matmul_matches_reference(self, rows, k, width, seed):
        rng = np.random.default_rng(seed)
        mat = rng.integers(0, 256, (rows, k), dtype=np.uint8)
        vecs = rng.integers(0, 256, (k, width), dtype=np.uint8)
        expected = matmul_reference(mat.tolist(), [bytes(v) for v in vecs])
        got = mat_mul(mat, vecs)
        assert [bytes(r) for r in got] == expected

    def test_invert_identity(self):
        for k in (1, 3, 8):
            eye = np.eye(k, dtype=np.uint8)
            assert np.array_equal(mat_invert(eye), eye)

    def test_invert_unitriangular(self):
        m = np.array([[1, 1], [0, 1]], dtype=np.uint8)
        inv = mat_invert(m)
        assert np.array_equal(inv, m)  # self-inverse in characteristic 2
        assert np.array_equal(mat_mul(inv, m), np.eye(2, dtype=np.uint8))

    def test_invert_singular_reports_rank(self):
        with pytest.raises(SingularMatrixError) as exc:
            mat_invert([[1, 1], [1, 1]])
        assert exc.value.rank == 1

    def test_invert_requires_square(self):
        with pytest.raises(DimensionError):
            mat_invert(np.zeros((2, 3), dtype=np.uint8))

    def test_invert_roundtrip_random(self):
        rng = np.random.default_rng(7)
        for k in (1, 2, 5, 9, 16):
            for _ in range(20):
                m = rng.integers(0, 256, (k, k), dtype=np.uint8)
                if mat_rank(m) < k:
                    continue  # rejection-sample the ~0.4% singular draws
                inv = mat_invert(m)
                assert np.array_equal(mat_mul(inv, m), np.eye(k, dtype=np.uint8))
                assert np.array_equal(mat_mul(m, inv), np.eye(k, dtype=np.uint8))

    def test_rank_cases(self):
        assert mat_rank(np.eye(3, dtype=np.uint8)) == 3
        assert mat_rank(np.zeros((2, 4), dtype=np.uint8)) == 0
        assert mat_rank([[1, 1], [2, 2]]) == 1

    def test_independent_rows_prefers_early_rows(self):
        m = np.array([[1, 1], [2, 2], [0, 1]], dtype=np.uint8)
        chosen = independent_rows(m)
        assert list(chosen) == [0, 2]

    def test_rank_many_matches_loop(self):
        rng = np.random.default_rng(3)
        mats = rng.integers(0, 256, (200, 6, 6), dtype=np.uint8)
        mats[0] = 0
        batched = rank_many(mats)
        assert list(batched) == [mat_rank(m) for m in mats]

    def test_singularity_rate_matches_field_theory(self):
        # P(rank < k) for uniform k x k matrices is 1 - prod(1 - 2^-8i),
        # about 0.0039 for any k of a few or more.
        k, trials = 16, 100_000
        rng = np.random.default_rng(42)
        mats = rng.integers(0, 256, (trials, k, k), dtype=np.uint8)
        singular = int((rank_many(mats) < k).sum())
        expected = 1.0 - np.prod([1 - 2.0 ** (-8 * i) for i in range(1, k + 1)])
        assert abs(singular / trials - expected) < 0.002
