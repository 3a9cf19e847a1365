import math

import numpy as np
import pytest

from qadv.embed import DataSpec, EmbeddingSpec
from qadv.seeding import substream


@pytest.fixture
def rng():
    return substream(20250810)


@pytest.fixture
def paper_embedding():
    """The synthetic single-qubit configuration used throughout the tests."""
    return EmbeddingSpec(theta=(math.pi / 4, math.pi / 4, math.pi / 4), q=0.05, dim=2)


@pytest.fixture
def paper_data():
    return DataSpec(num_classes=2, quant_lo=-6.0, quant_hi=6.0, quant_step=0.01)


def random_povm_element(rng, d):
    """Random PSD matrix scaled into [0, I] (a valid POVM element shape)."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    el = g @ g.conj().T
    return el / np.linalg.eigvalsh(el)[-1]
