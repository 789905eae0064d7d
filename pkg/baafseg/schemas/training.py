"""
Training configuration.
"""

from pydantic import BaseModel, Field


class TrainConfig(BaseModel):
    """Optimizer and loop settings.

    The source protocol trains for 50 epochs at batch size 12; the batch-size
    default here is the desk-scale value.
    """

    learning_rate: float = Field(default=1e-3, gt=0)
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=4, ge=1)
    val_fraction: float = Field(default=0.2, gt=0, lt=1)
    patience: int = Field(default=10, ge=0)
    seed: int = 0
    threshold: float = Field(default=0.5, ge=0, le=1)
