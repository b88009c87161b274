import numpy as np
import pytest

from lsnode import gf256


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure the algorithms."""
    m = np.eye(4, dtype=np.uint8)
    v = np.arange(8, dtype=np.uint8).reshape(4, 2)
    gf256.mat_mul(m, v)
    gf256.mat_rank(m)
    gf256.mat_invert(m)
    gf256.rank_many(m[None, :, :])
    return True
