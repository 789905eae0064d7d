"""
Declarative network description.
"""

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

FULL_SCALE_FILTERS: Dict[int, List[int]] = {
    15: [64, 128, 128, 256, 256, 512, 512, 1024, 512, 512, 256, 256, 128, 128, 64],
    9: [64, 128, 256, 512, 1024, 512, 256, 128, 64],
}


class Variant(str, Enum):
    """Architecture ladder: plain U-net, deep U-net, + additive PHAM, + BAAF."""

    UNET9 = "unet9"
    DEEP15 = "deep15"
    DEEP15_PHAM = "deep15_pham"
    DEEP15_BAAF = "deep15_baaf"

    @property
    def depth(self) -> int:
        return 9 if self is Variant.UNET9 else 15

    @property
    def attention(self) -> Optional[str]:
        return {Variant.DEEP15_PHAM: "pham", Variant.DEEP15_BAAF: "baaf"}.get(self)


class NetworkSpec(BaseModel):
    """Network variant, full-scale filter schedule, width divisor and input size."""

    variant: Variant = Variant.DEEP15_BAAF
    filters: Optional[List[int]] = None
    divisor: int = Field(default=8, ge=1)
    input_size: Tuple[int, int] = (128, 128)
    in_channels: Literal[1] = 1
    out_channels: Literal[1] = 1
    reduction: int = Field(default=8, ge=1)
    channel_reduction: int = Field(default=8, ge=1)

    @model_validator(mode="after")
    def default_filters(self) -> "NetworkSpec":
        if self.filters is None:
            self.filters = list(FULL_SCALE_FILTERS[self.variant.depth])
        return self

    @property
    def depth(self) -> int:
        return len(self.filters)

    @property
    def pools(self) -> int:
        return (self.depth - 1) // 2

    @property
    def bottleneck_size(self) -> Tuple[int, int]:
        h, w = self.input_size
        return h // 2**self.pools, w // 2**self.pools

    @property
    def widths(self) -> List[int]:
        return [f // self.divisor for f in self.filters]
