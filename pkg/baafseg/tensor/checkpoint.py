"""
Parameter checkpoint files.

A checkpoint is a directory holding two files:

``params.json``
    Manifest: format tag, version, payload file name, and one entry per
    parameter (path, shape, byte offset, byte length, trainable flag) in
    lexicographic path order.
``params.bin``
    The concatenated parameter values as little-endian 32-bit floats in C order,
    each entry starting at its manifest offset with no padding.
"""

import logging
from pathlib import Path
from typing import List, Union

import numpy as np
from pydantic import BaseModel

from baafseg.core.error_handling import CheckpointMismatchError
from baafseg.tensor.params import ParameterStore

logger = logging.getLogger(__name__)

MANIFEST_NAME = "params.json"
PAYLOAD_NAME = "params.bin"
PAYLOAD_DTYPE = np.dtype("<f4")


class CheckpointEntry(BaseModel):
    path: str
    shape: List[int]
    offset: int
    nbytes: int
    trainable: bool = True


class CheckpointManifest(BaseModel):
    format: str = "baafseg-checkpoint"
    version: int = 1
    dtype: str = "<f4"
    payload: str = PAYLOAD_NAME
    entries: List[CheckpointEntry]


def save_checkpoint(store: ParameterStore, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    entries: List[CheckpointEntry] = []
    offset = 0
    with open(directory / PAYLOAD_NAME, "wb") as fh:
        for path, param in store.items():
            raw = np.ascontiguousarray(param.value, dtype=PAYLOAD_DTYPE).tobytes()
            fh.write(raw)
            entries.append(
                CheckpointEntry(
                    path=path,
                    shape=list(param.value.shape),
                    offset=offset,
                    nbytes=len(raw),
                    trainable=param.trainable,
                )
            )
            offset += len(raw)

    manifest = CheckpointManifest(entries=entries)
    (directory / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Saved {len(entries)} parameters ({offset} bytes) to {directory}")
    return directory


def read_checkpoint(directory: Union[str, Path]) -> ParameterStore:
    directory = Path(directory)
    manifest = CheckpointManifest.model_validate_json(
        (directory / MANIFEST_NAME).read_text(encoding="utf-8")
    )
    payload = (directory / manifest.payload).read_bytes()
    store = ParameterStore()
    for entry in manifest.entries:
        if entry.offset + entry.nbytes > len(payload):
            raise CheckpointMismatchError(f"Payload truncated at parameter {entry.path}")
        values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE, count=entry.nbytes // 4, offset=entry.offset)
        store.add(entry.path, values.reshape(entry.shape).copy(), entry.trainable)
    return store


def load_checkpoint(store: ParameterStore, directory: Union[str, Path]) -> None:
    """Copy checkpoint values into ``store``; paths and shapes must match exactly."""
    loaded = read_checkpoint(directory)
    expected = {path: p.value.shape for path, p in store.items()}
    found = {path: p.value.shape for path, p in loaded.items()}
    if expected != found:
        missing = sorted(set(expected) - set(found))
        unexpected = sorted(set(found) - set(expected))
        reshaped = sorted(p for p in set(expected) & set(found) if expected[p] != found[p])
        raise CheckpointMismatchError(
            f"Checkpoint does not match network: missing={missing[:5]} "
            f"unexpected={unexpected[:5]} shape_mismatch={reshaped[:5]}"
        )
    store.load_state({path: p.value for path, p in loaded.items()})
