import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_hamming(a_signs, b_signs) -> int:
    """Independent oracle: per-element comparison, no bit packing."""
    assert len(a_signs) == len(b_signs)
    return int(sum(1 for x, y in zip(a_signs, b_signs) if x != y))


def naive_dot(a_signs, b_signs) -> int:
    return int(sum(int(x) * int(y) for x, y in zip(a_signs, b_signs)))
