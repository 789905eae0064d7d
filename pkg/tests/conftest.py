"""
Shared pytest fixtures.
"""

from pathlib import Path
from typing import List

import numpy as np
import pytest

from baafseg.data.dataset import write_dataset
from baafseg.data.sample import SegSample
from baafseg.data.synthetic import generate_synthetic
from baafseg.schemas.data import SynthConfig
from baafseg.schemas.network import NetworkSpec, Variant
from baafseg.schemas.training import TrainConfig
from baafseg.tensor.tensor import default_dtype


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test with float64 as the default tensor dtype."""
    with default_dtype(np.float64):
        yield


@pytest.fixture
def tiny_spec() -> NetworkSpec:
    """Smallest practical network: unet9, widths 4..64, 32 x 32 input."""
    return NetworkSpec(variant=Variant.UNET9, divisor=16, input_size=(32, 32))


@pytest.fixture
def tiny_synth() -> SynthConfig:
    return SynthConfig(count=6, size=32, seed=3)


@pytest.fixture
def tiny_samples(tiny_synth) -> List[SegSample]:
    return generate_synthetic(tiny_synth, threads=1)


@pytest.fixture
def tiny_dataset_dir(tmp_path, tiny_samples) -> Path:
    return write_dataset(tiny_samples, tmp_path / "data")


@pytest.fixture
def quick_train() -> TrainConfig:
    return TrainConfig(epochs=2, batch_size=4, patience=5, seed=0)
