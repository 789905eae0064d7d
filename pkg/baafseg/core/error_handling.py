"""
Error types and retry utilities for baafseg.

Every failure the package raises on purpose derives from ``BaafSegError`` so the
command line can map it to exit code 1. Shape problems also derive from
``ValueError``.
"""

import functools
import logging
from typing import Any, Callable, Optional, Type, TypeVar, Union

from baafseg.core.config import settings

T = TypeVar("T")
logger = logging.getLogger(__name__)


class BaafSegError(Exception):
    """Base class for all baafseg errors."""


class ShapeMismatchError(BaafSegError, ValueError):
    """Raised when operand shapes are incompatible."""

    def __init__(self, op: str, *shapes: tuple):
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: shape mismatch {rendered}")
        self.op = op
        self.shapes = shapes


class KernelConfigError(BaafSegError, ValueError):
    """Raised for an unsupported kernel size, stride or padding combination."""


class DegenerateInputError(BaafSegError, ValueError):
    """Raised when an input is too small for the operation."""


class NonScalarLossError(BaafSegError):
    """Raised when backward is seeded from a non-scalar node."""


class MissingGradientError(BaafSegError):
    """Raised when an optimizer step lacks a gradient for a trainable parameter."""


class TrainingDivergedError(BaafSegError):
    """Raised when the training loss becomes non-finite."""


class MalformedPGMError(BaafSegError):
    """Raised when a PGM header cannot be parsed."""


class TruncatedPGMError(BaafSegError):
    """Raised when a PGM payload is shorter than its header announces."""


class NonBinaryMaskError(BaafSegError, ValueError):
    """Raised when a mask contains values other than 0 and 1."""


class EmptyDatasetError(BaafSegError):
    """Raised when an operation needs at least one sample."""


class CheckpointMismatchError(BaafSegError):
    """Raised when a checkpoint does not match the network it is loaded into."""


class InputSizeError(BaafSegError, ValueError):
    """Raised when image size and network input size disagree."""


class ConfigError(BaafSegError):
    """Raised for invalid or incomplete run configuration."""


class MaxRetriesExceededError(BaafSegError):
    """Raised when the maximum number of retries is exceeded."""

    def __init__(self, message: str, last_exception: Optional[Exception] = None):
        super().__init__(message)
        self.last_exception = last_exception


def bounded_retry(
    exceptions: Union[Type[Exception], tuple[Type[Exception], ...]] = Exception,
    max_retries: Optional[int] = None,
):
    """
    Decorator that re-invokes a function when it raises one of ``exceptions``.

    Intended for rejection sampling: the wrapped function is expected to draw
    from a generator that advances on each call, so a retry is a fresh draw.

    Args:
        exceptions: Exception type(s) to catch and retry on
        max_retries: Maximum number of retry attempts
            (default: settings.LESION_MAX_RETRIES)
    """

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            budget = settings.LESION_MAX_RETRIES if max_retries is None else max_retries
            last_exception: Optional[Exception] = None

            for attempt in range(budget + 1):
                try:
                    return func(*args, **kwargs)
                except exceptions as e:
                    last_exception = e
                    logger.debug(
                        f"Attempt {attempt + 1}/{budget + 1} of {func.__name__} rejected: {e}",
                        extra={"attempt": attempt + 1, "max_retries": budget},
                    )

            logger.error(
                f"Max retries ({budget}) exceeded for {func.__name__}",
                extra={"max_retries": budget},
            )
            raise MaxRetriesExceededError(
                f"Max retries ({budget}) exceeded for {func.__name__}",
                last_exception,
            ) from last_exception

        return wrapper

    return decorator
