import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sasvkit import CountermeasureClassifier, EmbeddingStore


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_store(dim, vectors):
    store = EmbeddingStore(dim)
    for key, vec in vectors.items():
        store.add(key, np.asarray(vec, dtype=np.float32))
    return store


def make_cm(w0, w1):
    return CountermeasureClassifier.from_arrays(w0, w1)


@pytest.fixture
def small_cm():
    return make_cm([0.2, -0.1, 0.05, 0.3], [0.5, 0.4, -0.2, 0.1])
