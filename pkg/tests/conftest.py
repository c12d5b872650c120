import sys
from pathlib import Path

import numpy as np
import pytest

# make the sibling oracles module importable from every test file
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_tensor(rng, shape, scale=1.0):
    return (rng.standard_normal(shape) * scale).astype(np.float32)
