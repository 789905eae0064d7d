"""
Synthetic speckle data, PGM file I/O and resizing.
"""

from baafseg.data.dataset import (
    check_sizes,
    load_dataset,
    load_mask,
    load_mask_dir,
    manifest_frame,
    write_dataset,
)
from baafseg.data.pgm import decode_pgm, encode_pgm, load_pgm, save_pgm
from baafseg.data.resize import ResizeKind, resize
from baafseg.data.sample import Provenance, SegSample, SourceKind, check_binary, stack
from baafseg.data.synthetic import Ellipse, generate_sample, generate_synthetic

__all__ = [
    "Ellipse",
    "Provenance",
    "ResizeKind",
    "SegSample",
    "SourceKind",
    "check_binary",
    "check_sizes",
    "decode_pgm",
    "encode_pgm",
    "generate_sample",
    "generate_synthetic",
    "load_dataset",
    "load_mask",
    "load_mask_dir",
    "load_pgm",
    "manifest_frame",
    "resize",
    "save_pgm",
    "stack",
    "write_dataset",
]
