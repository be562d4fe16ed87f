import numpy as np
import pytest

from boolmf import BinaryMatrix, boolean_product


def random_binary(rng, m, n, p=0.5) -> BinaryMatrix:
    return BinaryMatrix((rng.random((m, n)) < p).astype(np.uint8))


def planted(rng, m, n, r, p=0.5):
    """A matrix with Boolean rank <= r plus its generating factors."""
    W = random_binary(rng, m, r, p)
    H = random_binary(rng, r, n, p)
    return boolean_product(W, H), W, H


def noisy_column_instance(rng, m, r, threshold=0.7, flip_frac=0.1):
    """W and a noisy target: x = min(1, Wh) with a fraction of entries flipped.

    W and h come from thresholding uniforms (sparse), regenerated while the
    clean target is all-zero or all-one.
    """
    while True:
        W = (rng.random((m, r)) > threshold).astype(np.uint8)
        h = (rng.random(r) > threshold).astype(np.int64)
        z = np.minimum(1, W.astype(np.int64) @ h)
        if 0 < z.sum() < m:
            break
    x = z.astype(np.uint8)
    flips = rng.choice(m, size=max(1, round(flip_frac * m)), replace=False)
    x[flips] ^= 1
    return BinaryMatrix(W), x


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
