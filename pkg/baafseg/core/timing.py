"""
Wall-clock timing for named phases of a run.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

logger = logging.getLogger(__name__)


@dataclass
class Timer:
    """Context manager for measuring code execution time."""

    phase: str
    labels: Optional[Dict[str, str]] = None
    level: int = logging.DEBUG
    elapsed: float = field(init=False, default=0.0)
    _start_time: Optional[float] = field(init=False, default=None)

    def __enter__(self) -> "Timer":
        self._start_time = time.monotonic()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if self._start_time is not None:
            self.elapsed = time.monotonic() - self._start_time
            logger.log(
                self.level,
                f"{self.phase} took {self.elapsed:.3f}s",
                extra={"phase": self.phase, "seconds": self.elapsed, **(self.labels or {})},
            )
