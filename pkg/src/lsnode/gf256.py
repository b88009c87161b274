"""Arithmetic and dense linear algebra over the 256-element binary field.

Field elements are single bytes: addition is XOR, multiplication is the
carry-less polynomial product reduced modulo 0x11B. Scalar operations run
off log/antilog tables built once at import; the matrix kernels are
numba-compiled loops over uint8 arrays with the lookup tables passed in
explicitly, which keeps byte throughput in the GB/s range on one core.

Matrices are plain ``numpy.ndarray`` objects with ``dtype=uint8`` and two
dimensions. All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import numpy as np
from numba import njit

#: Reduction polynomial x^8 + x^4 + x^3 + x + 1, the usual choice for
#: byte-oriented codes. Fixed protocol-wide; changing it breaks decode
#: compatibility between nodes.
REDUCING_POLY = 0x11B

#: Primitive element used to build the log/antilog tables.
GENERATOR = 0x03


class DimensionError(ValueError):
    """Operand shapes do not line up for the requested operation."""


class SingularMatrixError(ValueError):
    """Square matrix could not be inverted; carries the achieved rank."""

    def __init__(self, rank: int):
        super().__init__(f"matrix is singular (rank {rank})")
        self.rank = rank


def _xtime(x: int) -> int:
    x <<= 1
    if x & 0x100:
        x ^= REDUCING_POLY
    return x & 0xFF


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(510, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x = _xtime(x) ^ x  # multiply by GENERATOR = x + 1
    exp[255:510] = exp[:255]

    idx = np.arange(256)
    mul = exp[(log[idx][:, None] + log[idx][None, :]) % 255].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0

    inv = np.zeros(256, dtype=np.uint8)
    inv[idx[1:]] = exp[(255 - log[idx[1:]]) % 255]
    return mul, inv


#: 256 x 256 multiplication table; MUL_TABLE[a, b] == a * b.
MUL_TABLE, INV_TABLE = _build_tables()


# ---------------------------------------------------------------------------
# scalar operations


def _check_byte(v: int, name: str) -> None:
    if not 0 <= v <= 255:
        raise ValueError(f"{name} out of byte range: {v}")


def gf_add(a: int, b: int) -> int:
    """Field addition (XOR). Every element is its own additive inverse."""
    _check_byte(a, "a")
    _check_byte(b, "b")
    return a ^ b


def gf_mul(a: int, b: int) -> int:
    """Field multiplication, reduced modulo ``REDUCING_POLY``."""
    _check_byte(a, "a")
    _check_byte(b, "b")
    return int(MUL_TABLE[a, b])


def gf_inv(a: int) -> int:
    """Multiplicative inverse. Raises ``ZeroDivisionError`` for 0."""
    _check_byte(a, "a")
    if a == 0:
        raise ZeroDivisionError("0 has no multiplicative inverse in GF(256)")
    return int(INV_TABLE[a])


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _kernel_matmul(mat, vecs, mul):
    rows, k = mat.shape
    width = vecs.shape[1]
    out = np.zeros((rows, width), dtype=np.uint8)
    for u in range(rows):
        for l in range(k):
            c = mat[u, l]
            if c == 0:
                continue
            row = mul[c]
            for v in range(width):
                out[u, v] ^= row[vecs[l, v]]
    return out


@njit(cache=True)
def _kernel_echelon(mat, mul, inv):
    # Row-echelon reduction with first-nonzero pivoting. Returns the rank
    # and the original indices of the pivot rows, in pivot order.
    a = mat.copy()
    m, n = a.shape
    perm = np.arange(m)
    piv = 0
    for col in range(n):
        if piv >= m:
            break
        sel = -1
        for r in range(piv, m):
            if a[r, col] != 0:
                sel = r
                break
        if sel < 0:
            continue
        if sel != piv:
            for c in range(n):
                t = a[piv, c]
                a[piv, c] = a[sel, c]
                a[sel, c] = t
            t = perm[piv]
            perm[piv] = perm[sel]
            perm[sel] = t
        prow = mul[inv[a[piv, col]]]
        for c in range(col, n):
            a[piv, c] = prow[a[piv, c]]
        for r in range(piv + 1, m):
            f = a[r, col]
            if f != 0:
                frow = mul[f]
                for c in range(col, n):
                    a[r, c] ^= frow[a[piv, c]]
        piv += 1
    return piv, perm


@njit(cache=True)
def _kernel_invert(mat, mul, inv):
    # Gauss-Jordan on [A | I]. Keeps eliminating past rank defects so the
    # achieved rank is exact even for singular inputs.
    n = mat.shape[0]
    aug = np.zeros((n, 2 * n), dtype=np.uint8)
    aug[:, :n] = mat
    for i in range(n):
        aug[i, n + i] = 1
    rank = 0
    for col in range(n):
        sel = -1
        for r in range(rank, n):
            if aug[r, col] != 0:
                sel = r
                break
        if sel < 0:
            continue
        if sel != rank:
            for c in range(2 * n):
                t = aug[rank, c]
                aug[rank, c] = aug[sel, c]
                aug[sel, c] = t
        prow = mul[inv[aug[rank, col]]]
        for c in range(col, 2 * n):
            aug[rank, c] = prow[aug[rank, c]]
        for r in range(n):
            if r != rank and aug[r, col] != 0:
                frow = mul[aug[r, col]]
                for c in range(col, 2 * n):
                    aug[r, c] ^= frow[aug[rank, c]]
        rank += 1
    return rank, aug[:, n:].copy()


@njit(cache=True)
def _kernel_rank_many(mats, mul, inv):
    out = np.empty(mats.shape[0], dtype=np.int64)
    for b in range(mats.shape[0]):
        r, _ = _kernel_echelon(mats[b], mul, inv)
        out[b] = r
    return out


# ---------------------------------------------------------------------------
# matrix API


def as_matrix(obj) -> np.ndarray:
    """Coerce a matrix-like object (nested bytes/ints/ndarray) to uint8 2-D."""
    if isinstance(obj, np.ndarray) and obj.dtype == np.uint8 and obj.ndim == 2:
        return np.ascontiguousarray(obj)
    if isinstance(obj, (bytes, bytearray, memoryview)):
        raise DimensionError("a matrix needs two dimensions, got a flat byte string")
    rows = []
    for row in obj:
        if isinstance(row, (bytes, bytearray, memoryview)):
            rows.append(np.frombuffer(bytes(row), dtype=np.uint8))
        else:
            rows.append(np.asarray(row, dtype=np.uint8).reshape(-1))
    if not rows:
        raise DimensionError("empty matrix")
    width = rows[0].shape[0]
    if any(r.shape[0] != width for r in rows):
        raise DimensionError("ragged rows")
    return np.ascontiguousarray(np.vstack(rows))


def mat_mul(m, vectors) -> np.ndarray:
    """Multiply a coefficient matrix by a stack of byte vectors.

    ``m`` is (rows x k); ``vectors`` is k byte vectors of equal length.
    Output row u is the GF(256) linear combination sum_l m[u,l] * vectors[l],
    applied byte-wise.
    """
    mm = as_matrix(m)
    vv = as_matrix(vectors)
    if mm.shape[1] != vv.shape[0]:
        raise DimensionError(
            f"matrix has {mm.shape[1]} columns but {vv.shape[0]} vectors given"
        )
    return _kernel_matmul(mm, vv, MUL_TABLE)


def mat_rank(m) -> int:
    """Rank of a matrix over GF(256)."""
    rank, _ = _kernel_echelon(as_matrix(m), MUL_TABLE, INV_TABLE)
    return int(rank)


def independent_rows(m) -> np.ndarray:
    """Original indices of a maximal linearly independent row set.

    Deterministic: echelon reduction with first-nonzero pivoting, so earlier
    rows win ties. ``len(result)`` equals the rank.
    """
    mm = as_matrix(m)
    rank, perm = _kernel_echelon(mm, MUL_TABLE, INV_TABLE)
    return perm[:rank].copy()


def mat_invert(m) -> np.ndarray:
    """Invert a square matrix; raises ``SingularMatrixError`` on rank defect."""
    mm = as_matrix(m)
    if mm.shape[0] != mm.shape[1]:
        raise DimensionError(f"cannot invert a {mm.shape[0]}x{mm.shape[1]} matrix")
    rank, out = _kernel_invert(mm, MUL_TABLE, INV_TABLE)
    if rank < mm.shape[0]:
        raise SingularMatrixError(int(rank))
    return out


def rank_many(mats: np.ndarray) -> np.ndarray:
    """Ranks of a batch of matrices, shape (B, m, n) -> (B,)."""
    mats = np.ascontiguousarray(np.asarray(mats, dtype=np.uint8))
    if mats.ndim != 3:
        raise DimensionError("expected a 3-D batch of matrices")
    return _kernel_rank_many(mats, MUL_TABLE, INV_TABLE)
