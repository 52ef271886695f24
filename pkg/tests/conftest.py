import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from labelsift import EmbeddingDataset


def random_dataset(rng, n, n_classes, dim, id_prefix="x") -> EmbeddingDataset:
    """Generic-position random dataset: no duplicate points, no distance ties."""
    labels = rng.integers(0, n_classes, size=n)
    # guarantee every class appears so C is as requested
    labels[:n_classes] = np.arange(n_classes)
    return EmbeddingDataset(
        ids=[f"{id_prefix}{i:05d}" for i in range(n)],
        vectors=rng.standard_normal((n, dim)).astype(np.float32),
        labels=labels,
        class_names=[str(c) for c in range(n_classes)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
