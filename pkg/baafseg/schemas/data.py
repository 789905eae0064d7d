"""
Synthetic speckle dataset configuration.
"""

from typing import Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class SynthConfig(BaseModel):
    count: int = Field(default=30, ge=1)
    size: int = Field(default=128, ge=8)
    lesion_count: Tuple[int, int] = (1, 2)
    radius_range: Tuple[float, float] = (0.08, 0.28)
    background_mean: float = Field(default=0.6, ge=0, le=1)
    lesion_mean: float = Field(default=0.25, ge=0, le=1)
    speckle: float = Field(default=0.25, ge=0)
    blur_sigma: float = Field(default=1.0, ge=0)
    seed: int = 0

    @field_validator("radius_range")
    def radius_fractions_in_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = v
        if not (0 < lo <= hi < 0.5):
            raise ValueError("radius_range must satisfy 0 < low <= high < 0.5")
        return v

    @field_validator("lesion_count")
    def lesion_count_ordered(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        if not (1 <= v[0] <= v[1]):
            raise ValueError("lesion_count must satisfy 1 <= low <= high")
        return v

    @model_validator(mode="after")
    def foreground_below_half(self) -> "SynthConfig":
        # worst case: every lesion a disc at the largest radius, no overlap
        worst = self.lesion_count[1] * 3.141592653589793 * self.radius_range[1] ** 2
        if worst >= 0.5:
            raise ValueError(
                f"lesion_count and radius_range allow a foreground fraction of {worst:.2f} (>= 0.5)"
            )
        return self
