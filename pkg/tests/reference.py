"""Independent reference implementations used as test oracles.

Everything here is deliberately written from first principles (bit twiddling
and hashlib only) so the tests never verify the library against itself.
"""

import hashlib


def gmul_shift_reduce(a: int, b: int) -> int:
    """Carry-less multiply then reduce modulo x^8 + x^4 + x^3 + x + 1."""
    product = 0
    for i in range(8):
        if (b >> i) & 1:
            product ^= a << i
    for bit in range(15, 7, -1):
        if (product >> bit) & 1:
            product ^= 0x11B << (bit - 8)
    return product


def ginv_exhaustive(a: int) -> int:
    """Multiplicative inverse by trying all 255 candidates."""
    for x in range(1, 256):
        if gmul_shift_reduce(a, x) == 1:
            return x
    raise ZeroDivisionError(a)


def matmul_reference(mat, vecs):
    """Row-by-row linear combination using the shift-and-reduce multiply."""
    out = []
    for row in mat:
        acc = [0] * len(vecs[0])
        for coeff, vec in zip(row, vecs):
            for i, byte in enumerate(vec):
                acc[i] ^= gmul_shift_reduce(coeff, byte)
        out.append(bytes(acc))
    return out


def stream_reference(node_id: int, height: int, count: int) -> bytes:
    """SHA-256 counter stream, written out longhand."""
    seed = node_id.to_bytes(8, "big") + height.to_bytes(8, "big")
    out = b""
    counter = 0
    while len(out) < count:
        out += hashlib.sha256(seed + counter.to_bytes(8, "big")).digest()
        counter += 1
    return out[:count]
