"""
Pydantic models for configuration documents (network, training, data, runs).
"""

from baafseg.schemas.data import SynthConfig
from baafseg.schemas.network import FULL_SCALE_FILTERS, NetworkSpec, Variant
from baafseg.schemas.run import RunConfig
from baafseg.schemas.training import TrainConfig

__all__ = ["FULL_SCALE_FILTERS", "NetworkSpec", "RunConfig", "SynthConfig", "TrainConfig", "Variant"]
