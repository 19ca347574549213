import numpy as np
import pytest

from warmup import SyntheticSpec, TokenEmbeddingSet, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_set(rng, n=3, l=4, d=5) -> TokenEmbeddingSet:
    data = rng.standard_normal((n, l, d)).astype(np.float32)
    return TokenEmbeddingSet(data=data, image_ids=tuple(f"im{i}" for i in range(n)))


@pytest.fixture
def planted():
    """Well-separated planted fixture: direction recovery should be easy."""
    spec = SyntheticSpec(
        n_images=100, tokens_per_image=16, dim=8, clusters=2, fg_fraction=0.5, fg_jitter=0.25
    )
    return generate_synthetic(spec, seed=7)
