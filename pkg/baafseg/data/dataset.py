"""
Dataset directories: ``images/<id>.pgm``, ``masks/<id>.pgm`` and ``manifest.csv``.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from baafseg.core.error_handling import EmptyDatasetError, InputSizeError
from baafseg.data.pgm import load_pgm, save_pgm
from baafseg.data.resize import ResizeKind, resize
from baafseg.data.sample import Provenance, SegSample, SourceKind, check_binary

logger = logging.getLogger(__name__)

IMAGES_DIR = "images"
MASKS_DIR = "masks"
MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ["id", "source", "seed", "index", "height", "width"]


def manifest_frame(samples: Sequence[SegSample]) -> pd.DataFrame:
    rows = [
        {
            "id": s.id,
            "source": s.provenance.kind.value,
            "seed": s.provenance.seed,
            "index": s.provenance.index,
            "height": s.size[0],
            "width": s.size[1],
        }
        for s in samples
    ]
    return pd.DataFrame(rows, columns=MANIFEST_COLUMNS)


def write_dataset(samples: Sequence[SegSample], out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    (out_dir / IMAGES_DIR).mkdir(parents=True, exist_ok=True)
    (out_dir / MASKS_DIR).mkdir(parents=True, exist_ok=True)
    for s in samples:
        save_pgm(s.image, out_dir / IMAGES_DIR / f"{s.id}.pgm")
        save_pgm(s.mask.astype(np.float64), out_dir / MASKS_DIR / f"{s.id}.pgm")
    manifest_frame(samples).to_csv(out_dir / MANIFEST_NAME, index=False)
    logger.info(
        f"Wrote {len(samples)} samples to {out_dir}",
        extra={"count": len(samples), "path": str(out_dir)},
    )
    return out_dir


def load_mask(path: Union[str, Path]) -> np.ndarray:
    """Load a {0, 255} PGM mask as a uint8 {0, 1} array."""
    raw = load_pgm(path, dtype=np.float64)
    check_binary(raw, str(path))
    return raw.astype(np.uint8)


def _dataset_ids(root: Path) -> List[str]:
    manifest = root / MANIFEST_NAME
    if manifest.exists():
        return pd.read_csv(manifest, dtype={"id": str})["id"].tolist()
    return sorted(p.stem for p in (root / IMAGES_DIR).glob("*.pgm"))


def load_dataset(
    root: Union[str, Path],
    target_size: Optional[Tuple[int, int]] = None,
    ids: Optional[Sequence[str]] = None,
) -> List[SegSample]:
    """Read a dataset directory, optionally resizing to ``target_size``.

    Images resize bilinearly and masks by nearest neighbour. ``ids`` restricts
    and orders the result.
    """
    root = Path(root)
    wanted = list(ids) if ids is not None else _dataset_ids(root)
    if not wanted:
        raise EmptyDatasetError(f"No samples found under {root}")

    samples = []
    for sample_id in wanted:
        image_path = root / IMAGES_DIR / f"{sample_id}.pgm"
        image = load_pgm(image_path)
        mask = load_mask(root / MASKS_DIR / f"{sample_id}.pgm")
        if target_size is not None:
            image = resize(image, target_size, ResizeKind.BILINEAR)
            mask = resize(mask, target_size, ResizeKind.NEAREST)
        samples.append(
            SegSample(image, mask, sample_id, Provenance(SourceKind.FILE, path=str(image_path)))
        )
    logger.info(
        f"Loaded {len(samples)} samples from {root}",
        extra={"count": len(samples), "path": str(root)},
    )
    return samples


def check_sizes(samples: Sequence[SegSample], input_size: Tuple[int, int]) -> None:
    for s in samples:
        if s.size != tuple(input_size):
            raise InputSizeError(
                f"sample {s.id} is {s.size[0]}x{s.size[1]} but the network expects "
                f"{input_size[0]}x{input_size[1]} (use --resize)"
            )


def load_mask_dir(root: Union[str, Path]) -> dict:
    """``{file stem: mask}`` for every PGM directly under ``root``."""
    return {p.stem: load_mask(p) for p in sorted(Path(root).glob("*.pgm"))}


def write_mask_dir(masks: Sequence[np.ndarray], ids: Sequence[str], out_dir: Union[str, Path]) -> Path:
    """Write binary masks as ``<out_dir>/<id>.pgm``; ``load_mask_dir`` reads them back."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for mask, sample_id in zip(masks, ids):
        save_pgm(np.asarray(mask, dtype=bool).astype(np.float64), out_dir / f"{sample_id}.pgm")
    logger.info(f"Wrote {len(ids)} masks to {out_dir}", extra={"count": len(ids), "path": str(out_dir)})
    return out_dir
