import numpy as np
import pytest

from mipnn.data import fit_encode, synthetic_tables
from mipnn.oracle import random_instance


@pytest.fixture(scope="session")
def synthetic():
    """Encoded (train, test) pair of the bundled synthetic dataset."""
    return fit_encode(*synthetic_tables())


@pytest.fixture
def tiny():
    """Three random samples for a [2, 2, 2] network."""
    return random_instance(2, 3, 2, seed=7)


def naive_forward(net, x):
    """Straight-line evaluation with Python loops, independent of mipnn.network."""
    sizes = net.layer_sizes
    h = [float(v) for v in x]
    for l in range(len(sizes) - 1):
        w, b = net.weights[l], net.biases[l]
        pre = [sum(h[i] * int(w[i][j]) for i in range(sizes[l])) + int(b[j]) for j in range(sizes[l + 1])]
        if l < len(sizes) - 2:
            h = [1.0 if v >= 0 else -1.0 for v in pre]
        else:
            scale = 2.0 / (net.p_bound * (sizes[l] + 1))
            return [scale * v for v in pre]


def random_network(rng, sizes, p):
    from mipnn.network import IntegerNetwork

    weights = tuple(rng.integers(-p, p + 1, size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:]))
    biases = tuple(rng.integers(-p, p + 1, size=b) for b in sizes[1:])
    return IntegerNetwork(tuple(sizes), p, weights, biases)
