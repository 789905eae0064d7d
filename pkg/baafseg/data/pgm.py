"""
Binary PGM (P5) codec, 8-bit.

Layout: ``P5``, whitespace, width, whitespace, height, whitespace, maxval, exactly
one whitespace byte, then ``width * height`` bytes row-major. ``#`` starts a
comment that runs to the end of the line anywhere in the header. Saving quantizes
``v`` in [0, 1] to ``round(255 * v)``; loading divides by maxval.
"""

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from baafseg.core.error_handling import MalformedPGMError, ShapeMismatchError, TruncatedPGMError
from baafseg.tensor.tensor import Tensor, get_default_dtype

MAGIC = b"P5"
MAXVAL = 255
_WHITESPACE = b" \t\n\r\v\f"


def _as_plane(t: Union[Tensor, np.ndarray]) -> np.ndarray:
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if data.ndim == 3 and data.shape[0] == 1:
        data = data[0]
    if data.ndim != 2:
        raise ShapeMismatchError("save_pgm", data.shape, (1, "H", "W"))
    return data


def encode_pgm(t: Union[Tensor, np.ndarray]) -> bytes:
    plane = _as_plane(t)
    if not np.isfinite(plane).all() or plane.min(initial=0) < 0 or plane.max(initial=0) > 1:
        raise ValueError("save_pgm expects values in [0, 1]")
    payload = np.rint(plane.astype(np.float64) * MAXVAL).astype(np.uint8)
    h, w = plane.shape
    return b"%s\n%d %d\n%d\n" % (MAGIC, w, h, MAXVAL) + payload.tobytes()


def save_pgm(t: Union[Tensor, np.ndarray], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_pgm(t))
    return path


def _header_tokens(raw: bytes, count: int) -> Tuple[List[bytes], int]:
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(raw) and (raw[pos] in _WHITESPACE or raw[pos] == ord("#")):
            if raw[pos] == ord("#"):
                end = raw.find(b"\n", pos)
                pos = len(raw) if end < 0 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(raw) and raw[pos] not in _WHITESPACE and raw[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise MalformedPGMError(f"header ended after {len(tokens)} of {count} fields")
        tokens.append(raw[start:pos])
    return tokens, pos


def decode_pgm(raw: bytes, label: str = "<bytes>", dtype=None) -> np.ndarray:
    if raw[:2] != MAGIC:
        raise MalformedPGMError(f"{label}: not a binary PGM (magic {raw[:2]!r})")
    tokens, pos = _header_tokens(raw[2:], 3)
    try:
        width, height, maxval = (int(tok) for tok in tokens)
    except ValueError:
        raise MalformedPGMError(f"{label}: non-numeric header field in {tokens!r}")
    if width < 1 or height < 1 or not 1 <= maxval <= MAXVAL:
        raise MalformedPGMError(f"{label}: unsupported header {width}x{height} maxval {maxval}")
    pos += 2
    if pos >= len(raw) or raw[pos] not in _WHITESPACE:
        raise MalformedPGMError(f"{label}: missing separator after maxval")
    payload = raw[pos + 1 :]
    expected = width * height
    if len(payload) < expected:
        raise TruncatedPGMError(f"{label}: payload has {len(payload)} of {expected} bytes")
    plane = np.frombuffer(payload[:expected], dtype=np.uint8).reshape(height, width)
    return (plane.astype(np.float64) / maxval).astype(dtype or get_default_dtype())[None]


def load_pgm(path: Union[str, Path], dtype=None) -> np.ndarray:
    """Read a P5 file into a ``1 x H x W`` array with values in [0, 1]."""
    path = Path(path)
    return decode_pgm(path.read_bytes(), str(path), dtype)
