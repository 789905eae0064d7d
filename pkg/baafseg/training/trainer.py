"""
Epoch loop with validation-based early stopping.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from baafseg.core.error_handling import ConfigError, EmptyDatasetError, TrainingDivergedError
from baafseg.core.timing import Timer
from baafseg.data.sample import SegSample, stack
from baafseg.metrics.area import area_metrics, confusion
from baafseg.network.model import Model, forward, predict
from baafseg.schemas.network import NetworkSpec
from baafseg.schemas.training import TrainConfig
from baafseg.tensor.ops import Mode
from baafseg.tensor.tensor import backward
from baafseg.training.loss import bce_loss, bce_value
from baafseg.training.optim import AdamState, adam_step

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "val_dice"]
# separate stream so the validation split does not depend on the shuffle draws
_SPLIT_STREAM = 1


@dataclass
class TrainResult:
    model: Model
    history: pd.DataFrame
    best_epoch: int
    best_val_dice: float
    train_ids: List[str] = field(default_factory=list)
    val_ids: List[str] = field(default_factory=list)


def split_validation(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (train, validation) index split, both sorted.

    At least one sample goes to each side; a single sample serves as both.
    """
    if n < 1:
        raise EmptyDatasetError("Cannot split an empty dataset")
    if n == 1:
        return np.array([0]), np.array([0])
    n_val = min(max(1, int(round(n * fraction))), n - 1)
    perm = np.random.default_rng([seed, _SPLIT_STREAM]).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def minibatches(indices: np.ndarray, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffle and cut into ``ceil(n / batch_size)`` batches whose sizes differ by at most one."""
    order = rng.permutation(indices)
    n_batches = -(-len(order) // batch_size)
    return np.array_split(order, n_batches)


def check_batch_statistics(spec: NetworkSpec, n_train: int, batch_size: int) -> None:
    """Raise ConfigError when a mini-batch leaves one value per channel at the bottleneck.

    Train-mode batch normalization needs at least two values per channel, and
    the bottleneck holds ``batch * H * W`` of them.
    """
    n_batches = -(-n_train // batch_size)
    smallest = n_train // n_batches
    h, w = spec.bottleneck_size
    if smallest * h * w < 2:
        raise ConfigError(
            f"batch_size {batch_size} over {n_train} training sample(s) gives mini-batches of "
            f"{smallest} at the {h}x{w} bottleneck of {spec.variant.value}; batch normalization "
            f"needs at least 2 values per channel (raise batch_size or add samples)"
        )


def mean_dice(probs: np.ndarray, masks: np.ndarray, threshold: float) -> float:
    scores = [area_metrics(confusion(p >= threshold, m.astype(bool)))["dice"] for p, m in zip(probs, masks)]
    return float(np.mean(scores))


def fit(model: Model, samples: Sequence[SegSample], config: TrainConfig) -> TrainResult:
    """Train ``model`` in place and restore its best-validation-Dice state.

    Mini-batches are reshuffled each epoch from ``default_rng([seed, epoch])``.
    Training stops once ``patience`` consecutive epochs bring no strict
    improvement of validation Dice, or at the epoch cap.
    """
    if not samples:
        raise EmptyDatasetError("fit needs at least one sample")
    train_idx, val_idx = split_validation(len(samples), config.val_fraction, config.seed)
    check_batch_statistics(model.spec, len(train_idx), config.batch_size)
    images, masks = stack(samples, dtype=model.dtype)
    val_images, val_masks = images[val_idx], masks[val_idx]

    state = AdamState()
    rows = []
    best_dice, best_epoch, best_state, stale = -np.inf, 0, model.params.state(), 0
    labels = {"variant": model.spec.variant.value}

    for epoch in range(1, config.epochs + 1):
        with Timer("epoch", labels={**labels, "epoch": str(epoch)}):
            rng = np.random.default_rng([config.seed, epoch])
            loss_sum = 0.0
            for batch in minibatches(train_idx, config.batch_size, rng):
                out = forward(model, images[batch], Mode.TRAIN)
                loss = bce_loss(out, masks[batch])
                value = loss.item()
                if not np.isfinite(value):
                    raise TrainingDivergedError(f"training loss became {value} at epoch {epoch}")
                grads = backward(out.tape, loss)
                adam_step(model.params, grads, state, config.learning_rate)
                loss_sum += value * len(batch)

            probs = predict(model, val_images, config.batch_size)
            row = {
                "epoch": epoch,
                "train_loss": loss_sum / len(train_idx),
                "val_loss": bce_value(probs, val_masks),
                "val_dice": mean_dice(probs, val_masks, config.threshold),
            }
        rows.append(row)
        logger.info(
            f"Epoch {epoch}: train_loss={row['train_loss']:.4f} val_loss={row['val_loss']:.4f} "
            f"val_dice={row['val_dice']:.4f}",
            extra={**labels, **row},
        )

        if row["val_dice"] > best_dice:
            best_dice, best_epoch, best_state, stale = row["val_dice"], epoch, model.params.state(), 0
        else:
            stale += 1
        if stale >= config.patience:
            logger.info(
                f"Stopping after epoch {epoch}: no improvement for {stale} epoch(s)",
                extra={**labels, "epoch": epoch, "best_epoch": best_epoch},
            )
            break

    model.params.load_state(best_state)
    return TrainResult(
        model=model,
        history=pd.DataFrame(rows, columns=HISTORY_COLUMNS),
        best_epoch=best_epoch,
        best_val_dice=float(best_dice),
        train_ids=[samples[i].id for i in train_idx],
        val_ids=[samples[i].id for i in val_idx],
    )
