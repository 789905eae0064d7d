"""
Synthetic speckle-lesion images.

Each image is a constant background with one or more darker elliptical lesions,
multiplied by mean-one gamma speckle (shape k = 1 / speckle**2, scale 1 / k),
Gaussian-blurred and clipped to [0, 1]. The mask is the union of the exact
ellipse interiors before blurring. Sample ``i`` draws all of its randomness from
``default_rng([seed, i])``, so samples are independent of each other and of the
dataset size.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from baafseg.core.config import settings
from baafseg.core.error_handling import BaafSegError, bounded_retry
from baafseg.data.sample import Provenance, SegSample, SourceKind
from baafseg.schemas.data import SynthConfig

logger = logging.getLogger(__name__)


class LesionOutOfBoundsError(BaafSegError):
    """A sampled lesion does not fit inside the image."""


@dataclass(frozen=True)
class Ellipse:
    cy: float
    cx: float
    a: float  # semi-axis along theta
    b: float
    theta: float

    def extents(self) -> tuple:
        c, s = np.cos(self.theta), np.sin(self.theta)
        ex = np.sqrt((self.a * c) ** 2 + (self.b * s) ** 2)
        ey = np.sqrt((self.a * s) ** 2 + (self.b * c) ** 2)
        return ey, ex

    def interior(self, size: int) -> np.ndarray:
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        dy, dx = yy - self.cy, xx - self.cx
        c, s = np.cos(self.theta), np.sin(self.theta)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0


@bounded_retry(LesionOutOfBoundsError)
def sample_lesion(rng: np.random.Generator, size: int, cfg: SynthConfig) -> Ellipse:
    lo, hi = cfg.radius_range
    a, b = rng.uniform(lo * size, hi * size, size=2)
    ellipse = Ellipse(
        cy=rng.uniform(0, size - 1),
        cx=rng.uniform(0, size - 1),
        a=float(a),
        b=float(b),
        theta=float(rng.uniform(0, np.pi)),
    )
    ey, ex = ellipse.extents()
    if ellipse.cy - ey < 0 or ellipse.cy + ey > size - 1 or ellipse.cx - ex < 0 or ellipse.cx + ex > size - 1:
        raise LesionOutOfBoundsError(f"lesion at ({ellipse.cy:.1f}, {ellipse.cx:.1f}) leaves the image")
    return ellipse


def generate_sample(cfg: SynthConfig, index: int) -> SegSample:
    rng = np.random.default_rng([cfg.seed, index])
    size = cfg.size
    n_lesions = int(rng.integers(cfg.lesion_count[0], cfg.lesion_count[1] + 1))

    mask = np.zeros((size, size), dtype=bool)
    for _ in range(n_lesions):
        mask |= sample_lesion(rng, size, cfg).interior(size)

    image = np.where(mask, cfg.lesion_mean, cfg.background_mean)
    if cfg.speckle > 0:
        k = 1.0 / cfg.speckle**2
        image = image * rng.gamma(shape=k, scale=1.0 / k, size=image.shape)
    if cfg.blur_sigma > 0:
        image = gaussian_filter(image, sigma=cfg.blur_sigma, mode="reflect")
    image = np.clip(image, 0.0, 1.0)

    return SegSample(
        image=image[None].astype(np.float32),
        mask=mask[None].astype(np.uint8),
        id=f"synth_{cfg.seed}_{index:04d}",
        provenance=Provenance(SourceKind.SYNTHETIC, seed=cfg.seed, index=index),
    )


def generate_synthetic(cfg: SynthConfig, threads: Optional[int] = None) -> List[SegSample]:
    """Generate ``cfg.count`` samples; output is identical for any thread count."""
    threads = threads or settings.worker_threads
    indices = range(cfg.count)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(lambda i: generate_sample(cfg, i), indices))
    else:
        samples = [generate_sample(cfg, i) for i in indices]
    logger.info(
        f"Generated {len(samples)} synthetic samples of size {cfg.size}",
        extra={"count": cfg.count, "seed": cfg.seed, "size": cfg.size},
    )
    return samples
