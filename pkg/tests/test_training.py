"""
Tests for the loss, the optimizer, fold plans, the training loop and cross-validation.
"""

import numpy as np
import pandas as pd
import pytest

from baafseg.core.error_handling import (
    ConfigError,
    EmptyDatasetError,
    MissingGradientError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from baafseg.data.sample import Provenance, SegSample, SourceKind, stack
from baafseg.network.model import build, forward, predict
from baafseg.schemas.network import NetworkSpec, Variant
from baafseg.schemas.training import TrainConfig
from baafseg.tensor.ops import Mode
from baafseg.tensor.params import ParameterStore
from baafseg.tensor.tensor import Tape, Tensor, backward
from baafseg.training.crossval import cross_validate
from baafseg.training.folds import kfold_split
from baafseg.training.loss import bce_loss, bce_value
from baafseg.training.optim import AdamState, adam_step
from baafseg.training.trainer import (
    HISTORY_COLUMNS,
    check_batch_statistics,
    fit,
    mean_dice,
    minibatches,
    split_validation,
)


class TestBCE:
    def test_half_probability_gives_ln2(self, rng):
        targets = (rng.uniform(size=(2, 1, 4, 4)) > 0.5).astype(np.float64)
        assert bce_value(np.full((2, 1, 4, 4), 0.5), targets) == pytest.approx(np.log(2.0))

    def test_perfect_prediction_is_near_zero(self, rng):
        y = (rng.uniform(size=(1, 1, 4, 4)) > 0.5).astype(np.float64)
        assert bce_value(y, y) <= 1.7e-6

    def test_gradient_at_half(self):
        tape = Tape()
        p = tape.watch(np.array([[[[0.5]]]]), "p")
        grads = backward(tape, bce_loss(p, np.ones((1, 1, 1, 1))))
        assert grads["p"].item() == pytest.approx(-2.0)

    def test_saturated_prediction_keeps_a_gradient(self):
        tape = Tape()
        p = tape.watch(np.array([0.0, 1.0]), "p")
        grads = backward(tape, bce_loss(p, np.array([1.0, 0.0])))
        assert np.isfinite(grads["p"]).all()
        assert (grads["p"] != 0).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            bce_loss(Tensor(np.full((1, 4), 0.5)), np.ones((4, 1)))


class TestAdam:
    def _store(self, value):
        store = ParameterStore()
        store.add("w", np.array([value], dtype=np.float64))
        return store

    def test_zero_gradient_leaves_parameters(self):
        store = self._store(1.5)
        state = adam_step(store, {"w": np.zeros(1)}, AdamState(), lr=0.1)
        assert store["w"][0] == 1.5
        assert state.t == 1

    @pytest.mark.parametrize("g", [4.0, -0.25])
    def test_first_step_moves_by_lr(self, g):
        store = self._store(0.0)
        adam_step(store, {"w": np.array([g])}, AdamState(), lr=0.01)
        assert store["w"][0] == pytest.approx(-0.01 * np.sign(g), rel=1e-6)

    def test_quadratic_converges(self):
        store = self._store(0.0)
        state = AdamState()
        for _ in range(100):
            adam_step(store, {"w": 2.0 * (store["w"] - 3.0)}, state, lr=0.1)
        assert abs(store["w"][0] - 3.0) < 0.05

    def test_missing_gradient(self):
        with pytest.raises(MissingGradientError):
            adam_step(self._store(0.0), {}, AdamState(), lr=0.1)

    def test_misshapen_gradient(self):
        with pytest.raises(MissingGradientError):
            adam_step(self._store(0.0), {"w": np.zeros(2)}, AdamState(), lr=0.1)

    def test_non_trainable_entries_are_untouched(self):
        store = self._store(0.0)
        store.add("stat", np.ones(1), trainable=False)
        adam_step(store, {"w": np.ones(1)}, AdamState(), lr=0.1)
        assert store["stat"][0] == 1.0


class TestFolds:
    def test_six_into_three(self):
        plan = kfold_split(6, 3, seed=0)
        assert plan.sizes() == [2, 2, 2]
        assert sorted(np.concatenate(plan.folds).tolist()) == list(range(6))

    def test_balanced_sizes(self):
        assert kfold_split(10, 4, seed=0).sizes() == [3, 3, 2, 2]

    def test_seeded(self):
        a, b = kfold_split(20, 5, seed=11), kfold_split(20, 5, seed=11)
        assert a.to_dict() == b.to_dict()
        assert a.to_dict() != kfold_split(20, 5, seed=12).to_dict()

    def test_partition_property(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = int(rng.integers(2, 8))
            n = int(rng.integers(k, 60))
            plan = kfold_split(n, k, seed=int(rng.integers(1 << 30)))
            assert sorted(np.concatenate(plan.folds).tolist()) == list(range(n))
            assert max(plan.sizes()) - min(plan.sizes()) <= 1
            for i in range(k):
                assert not set(plan.test_indices(i)) & set(plan.train_indices(i))
                assert len(plan.test_indices(i)) + len(plan.train_indices(i)) == n

    @pytest.mark.parametrize("n, k", [(3, 4), (10, 1)])
    def test_invalid(self, n, k):
        with pytest.raises(ConfigError):
            kfold_split(n, k)


class TestLoopHelpers:
    def test_validation_split(self):
        train, val = split_validation(10, 0.2, seed=0)
        assert len(val) == 2 and len(train) == 8
        assert not set(train) & set(val)

    def test_single_sample_serves_both_sides(self):
        train, val = split_validation(1, 0.2, seed=0)
        assert train.tolist() == [0] and val.tolist() == [0]

    def test_empty_split(self):
        with pytest.raises(EmptyDatasetError):
            split_validation(0, 0.2, seed=0)

    def test_minibatches_balanced(self):
        batches = minibatches(np.arange(9), 4, np.random.default_rng(0))
        assert [len(b) for b in batches] == [3, 3, 3]
        assert sorted(np.concatenate(batches).tolist()) == list(range(9))

    def test_mean_dice_perfect(self):
        masks = np.zeros((2, 1, 4, 4))
        masks[:, :, 1:3, 1:3] = 1
        assert mean_dice(masks, masks, 0.5) == 1.0


class TestFit:
    def test_history_and_restore(self, tiny_spec, tiny_samples, quick_train):
        model = build(tiny_spec, seed=0)
        result = fit(model, tiny_samples, quick_train)
        history = result.history
        assert list(history.columns) == HISTORY_COLUMNS
        assert 1 <= len(history) <= quick_train.epochs
        assert result.best_val_dice == pytest.approx(history["val_dice"].max())
        assert not set(result.train_ids) & set(result.val_ids)

        by_id = {s.id: s for s in tiny_samples}
        images, masks = stack([by_id[i] for i in result.val_ids])
        probs = predict(result.model, images, quick_train.batch_size)
        assert mean_dice(probs, masks, quick_train.threshold) == pytest.approx(result.best_val_dice, abs=1e-6)

    def test_patience_zero_runs_one_epoch(self, tiny_spec, tiny_samples):
        config = TrainConfig(epochs=5, batch_size=4, patience=0)
        result = fit(build(tiny_spec), tiny_samples, config)
        assert len(result.history) == 1
        assert result.best_epoch == 1

    def test_reproducible(self, tiny_spec, tiny_samples, quick_train):
        first = fit(build(tiny_spec, seed=4), tiny_samples, quick_train)
        second = fit(build(tiny_spec, seed=4), tiny_samples, quick_train)
        pd.testing.assert_frame_equal(first.history, second.history)
        for path in first.model.params:
            np.testing.assert_array_equal(first.model.params[path], second.model.params[path])

    def test_divergence_aborts(self, tiny_spec, tiny_samples, quick_train, monkeypatch):
        monkeypatch.setattr("baafseg.training.trainer.bce_loss", lambda *args: Tensor(np.array(np.nan)))
        with pytest.raises(TrainingDivergedError):
            fit(build(tiny_spec), tiny_samples, quick_train)

    def test_empty_dataset(self, tiny_spec, quick_train):
        with pytest.raises(EmptyDatasetError):
            fit(build(tiny_spec), [], quick_train)

    def test_single_sample_batches_at_a_one_pixel_bottleneck(self, tiny_samples):
        spec = NetworkSpec(variant=Variant.DEEP15_BAAF, divisor=16, input_size=(128, 128))
        assert spec.bottleneck_size == (1, 1)
        with pytest.raises(ConfigError, match="batch_size 1"):
            fit(build(spec), tiny_samples, TrainConfig(epochs=1, batch_size=1))

    def test_single_training_sample_at_a_one_pixel_bottleneck(self, tiny_samples):
        spec = NetworkSpec(variant=Variant.DEEP15, divisor=16, input_size=(128, 128))
        with pytest.raises(ConfigError, match="batch_size"):
            fit(build(spec), tiny_samples[:2], TrainConfig(epochs=1, batch_size=4))

    @pytest.mark.parametrize("n_train,batch_size", [(5, 1), (1, 4), (6, 4)])
    def test_wider_bottleneck_allows_single_sample_batches(self, tiny_spec, n_train, batch_size):
        assert tiny_spec.bottleneck_size == (2, 2)
        check_batch_statistics(tiny_spec, n_train, batch_size)

    def test_batch_statistics_counts_the_smallest_batch(self):
        spec = NetworkSpec(variant=Variant.DEEP15, divisor=16, input_size=(128, 128))
        check_batch_statistics(spec, 4, 2)
        check_batch_statistics(spec, 5, 4)
        with pytest.raises(ConfigError):
            check_batch_statistics(spec, 5, 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_one_step_decreases_loss(self, seed, tiny_samples):
        spec = NetworkSpec(variant=Variant.UNET9, divisor=16, input_size=(32, 32))
        model = build(spec, seed=seed)
        images, masks = stack(tiny_samples[:3])

        out = forward(model, images, Mode.TRAIN)
        loss = bce_loss(out, masks)
        adam_step(model.params, backward(out.tape, loss), AdamState(), lr=1e-4)
        after = bce_loss(forward(model, images, Mode.TRAIN), masks)
        assert after.item() < loss.item()

    @pytest.mark.slow
    def test_learns_a_trivial_sample(self):
        mask = np.zeros((1, 32, 32), dtype=np.uint8)
        mask[:, 8:20, 10:26] = 1
        image = np.where(mask, 0.2, 0.7).astype(np.float32)
        sample = SegSample(image, mask, "square", Provenance(SourceKind.SYNTHETIC))
        spec = NetworkSpec(variant=Variant.UNET9, divisor=16, input_size=(32, 32))
        config = TrainConfig(epochs=30, batch_size=1, learning_rate=1e-2, patience=30)
        result = fit(build(spec), [sample], config)
        assert result.best_val_dice >= 0.99


class TestCrossValidation:
    def test_one_model_per_fold(self, tiny_spec, tiny_samples, quick_train):
        result = cross_validate(tiny_spec, tiny_samples, quick_train, k=3)
        assert [f.fold for f in result.folds] == [0, 1, 2]
        assert [r.count for r in result.reports] == result.plan.sizes()
        assert [r.fold for r in result.reports] == ["fold0", "fold1", "fold2"]

        dice = result.summary.set_index("metric").loc["dice"]
        assert dice["min"] <= dice["mean"] <= dice["max"]
        assert dice["std"] >= 0

    def test_shared_plan_is_used(self, tiny_spec, tiny_samples, quick_train):
        plan = kfold_split(len(tiny_samples), 2, seed=99)
        result = cross_validate(tiny_spec, tiny_samples, quick_train, k=2, plan=plan)
        assert result.plan is plan
        tested = [s for f in result.folds for s in f.report.per_image["id"]]
        assert sorted(tested) == sorted(s.id for s in tiny_samples)
