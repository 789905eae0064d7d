"""
Tests for synthetic generation, the PGM codec, resizing and dataset directories.
"""

import numpy as np
import pandas as pd
import pytest

from baafseg.core.error_handling import (
    EmptyDatasetError,
    InputSizeError,
    MalformedPGMError,
    NonBinaryMaskError,
    ShapeMismatchError,
    TruncatedPGMError,
)
from baafseg.data.dataset import (
    IMAGES_DIR,
    MANIFEST_COLUMNS,
    MANIFEST_NAME,
    MASKS_DIR,
    check_sizes,
    load_dataset,
    load_mask_dir,
    write_dataset,
)
from baafseg.data.pgm import decode_pgm, encode_pgm, load_pgm, save_pgm
from baafseg.data.resize import ResizeKind, resize
from baafseg.data.sample import Provenance, SegSample, SourceKind, stack
from baafseg.data.synthetic import generate_sample, generate_synthetic, sample_lesion
from baafseg.schemas.data import SynthConfig


class TestSynthConfig:
    def test_defaults(self):
        cfg = SynthConfig()
        assert cfg.count == 30 and cfg.size == 128

    @pytest.mark.parametrize(
        "overrides",
        [
            {"radius_range": (0.3, 0.2)},
            {"radius_range": (0.1, 0.5)},
            {"lesion_count": (0, 2)},
            {"lesion_count": (3, 4), "radius_range": (0.2, 0.3)},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ValueError):
            SynthConfig(**overrides)


class TestSynthetic:
    def test_noise_off_is_piecewise_constant(self):
        cfg = SynthConfig(count=4, size=48, speckle=0.0, blur_sigma=0.0, seed=2)
        for s in generate_synthetic(cfg, threads=1):
            mask = s.mask.astype(bool)
            np.testing.assert_array_equal(s.image[mask], np.float32(cfg.lesion_mean))
            np.testing.assert_array_equal(s.image[~mask], np.float32(cfg.background_mean))

    def test_shapes_and_ids(self):
        cfg = SynthConfig(count=3, size=40, seed=7)
        samples = generate_synthetic(cfg, threads=1)
        assert [s.id for s in samples] == ["synth_7_0000", "synth_7_0001", "synth_7_0002"]
        for s in samples:
            assert s.image.shape == (1, 40, 40) and s.image.dtype == np.float32
            assert s.mask.dtype == np.uint8
            assert s.image.min() >= 0.0 and s.image.max() <= 1.0
            assert s.provenance.kind is SourceKind.SYNTHETIC

    def test_foreground_fraction(self):
        for s in generate_synthetic(SynthConfig(count=20, size=64, seed=5), threads=1):
            fraction = s.mask.mean()
            assert 0.0 < fraction < 0.5

    def test_lesions_stay_inside(self):
        cfg = SynthConfig(size=64)
        rng = np.random.default_rng(0)
        for _ in range(50):
            ellipse = sample_lesion(rng, cfg.size, cfg)
            ey, ex = ellipse.extents()
            assert ellipse.cy - ey >= 0 and ellipse.cy + ey <= cfg.size - 1
            assert ellipse.cx - ex >= 0 and ellipse.cx + ex <= cfg.size - 1

    def test_bit_identical_reruns(self):
        cfg = SynthConfig(count=5, size=32, seed=11)
        for a, b in zip(generate_synthetic(cfg, threads=1), generate_synthetic(cfg, threads=1)):
            np.testing.assert_array_equal(a.image, b.image)
            np.testing.assert_array_equal(a.mask, b.mask)

    def test_thread_count_does_not_matter(self):
        cfg = SynthConfig(count=6, size=32, seed=1)
        for a, b in zip(generate_synthetic(cfg, threads=1), generate_synthetic(cfg, threads=3)):
            assert a.id == b.id
            np.testing.assert_array_equal(a.image, b.image)

    def test_samples_independent_of_count(self):
        big = generate_synthetic(SynthConfig(count=8, size=32, seed=4), threads=1)
        single = generate_sample(SynthConfig(count=1, size=32, seed=4), 5)
        np.testing.assert_array_equal(big[5].image, single.image)

    def test_speckle_keeps_class_means(self):
        cfg = SynthConfig(count=4, size=96, speckle=0.1, blur_sigma=0.0, seed=8)
        images, masks = stack(generate_synthetic(cfg, threads=1), dtype=np.float64)
        fg = masks.astype(bool)
        assert images[fg].mean() == pytest.approx(cfg.lesion_mean, abs=0.02)
        assert images[~fg].mean() == pytest.approx(cfg.background_mean, abs=0.02)


class TestSample:
    def test_non_binary_mask(self):
        with pytest.raises(NonBinaryMaskError):
            SegSample(np.zeros((1, 4, 4)), np.full((1, 4, 4), 2), "x", Provenance(SourceKind.FILE))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            SegSample(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)), "x", Provenance(SourceKind.FILE))

    def test_stack_empty(self):
        with pytest.raises(EmptyDatasetError):
            stack([])


class TestPGM:
    def test_mask_round_trip_is_exact(self, tmp_path, rng):
        mask = (rng.uniform(size=(1, 9, 13)) > 0.5).astype(np.float64)
        path = save_pgm(mask, tmp_path / "m.pgm")
        np.testing.assert_array_equal(load_pgm(path, dtype=np.float64), mask)

    def test_image_round_trip_error_bound(self, tmp_path, rng):
        image = rng.uniform(size=(1, 16, 16))
        loaded = load_pgm(save_pgm(image, tmp_path / "i.pgm"), dtype=np.float64)
        assert np.abs(loaded - image).max() <= 1 / 510 + 1e-12

    def test_header_layout(self):
        raw = encode_pgm(np.zeros((1, 2, 3)))
        assert raw.startswith(b"P5\n3 2\n255\n")
        assert len(raw) == len(b"P5\n3 2\n255\n") + 6

    def test_comments_and_small_maxval(self):
        raw = b"P5 # made by hand\n2 # width\n1\n15\n" + bytes([0, 15])
        np.testing.assert_array_equal(decode_pgm(raw, dtype=np.float64), [[[0.0, 1.0]]])

    def test_text_file_is_malformed(self):
        with pytest.raises(MalformedPGMError):
            decode_pgm(b"hello world, not an image")

    def test_ascii_pgm_is_rejected(self):
        with pytest.raises(MalformedPGMError):
            decode_pgm(b"P2\n2 1\n255\n0 255\n")

    def test_non_numeric_header(self):
        with pytest.raises(MalformedPGMError):
            decode_pgm(b"P5\nwide 1\n255\n" + bytes(2))

    def test_missing_payload_separator(self):
        with pytest.raises(MalformedPGMError):
            decode_pgm(b"P5\n2 1\n255")

    def test_truncated_payload(self):
        with pytest.raises(TruncatedPGMError):
            decode_pgm(b"P5\n4 4\n255\n" + bytes(10))

    def test_out_of_range_values(self, tmp_path):
        with pytest.raises(ValueError):
            save_pgm(np.full((1, 2, 2), 1.5), tmp_path / "bad.pgm")


class TestResize:
    def test_identity(self, rng):
        x = rng.uniform(size=(1, 7, 9))
        out = resize(x, (7, 9))
        np.testing.assert_array_equal(out, x)
        assert out is not x

    @pytest.mark.parametrize("kind", list(ResizeKind))
    def test_constant_stays_constant(self, kind):
        out = resize(np.full((1, 5, 7), 0.3), (12, 4), kind)
        assert out.shape == (1, 12, 4)
        np.testing.assert_allclose(out, 0.3)

    def test_bilinear_known_values(self):
        out = resize(np.array([[[0.0, 1.0]]]), (1, 4), ResizeKind.BILINEAR)
        np.testing.assert_allclose(out[0, 0], [0.0, 0.25, 0.75, 1.0])

    def test_nearest_up_then_down_is_identity(self, rng):
        for _ in range(10):
            mask = (rng.uniform(size=(1, 16, 16)) > 0.5).astype(np.uint8)
            up = resize(mask, (32, 32), ResizeKind.NEAREST)
            assert set(np.unique(up)) <= {0, 1}
            np.testing.assert_array_equal(resize(up, (16, 16), ResizeKind.NEAREST), mask)

    def test_invalid_target(self):
        with pytest.raises(ValueError):
            resize(np.zeros((1, 4, 4)), (0, 4))


class TestDatasetDirectory:
    def test_layout(self, tiny_dataset_dir, tiny_samples):
        assert (tiny_dataset_dir / MANIFEST_NAME).exists()
        assert len(list((tiny_dataset_dir / IMAGES_DIR).glob("*.pgm"))) == len(tiny_samples)
        assert len(list((tiny_dataset_dir / MASKS_DIR).glob("*.pgm"))) == len(tiny_samples)
        manifest = pd.read_csv(tiny_dataset_dir / MANIFEST_NAME)
        assert list(manifest.columns) == MANIFEST_COLUMNS
        assert (manifest["source"] == "synthetic").all()

    def test_round_trip(self, tiny_dataset_dir, tiny_samples):
        loaded = load_dataset(tiny_dataset_dir)
        assert [s.id for s in loaded] == [s.id for s in tiny_samples]
        for original, copy in zip(tiny_samples, loaded):
            np.testing.assert_array_equal(copy.mask, original.mask)
            assert np.abs(copy.image - original.image).max() <= 1 / 510 + 1e-6
            assert copy.provenance.kind is SourceKind.FILE

    def test_without_manifest(self, tiny_dataset_dir, tiny_samples):
        (tiny_dataset_dir / MANIFEST_NAME).unlink()
        assert [s.id for s in load_dataset(tiny_dataset_dir)] == sorted(s.id for s in tiny_samples)

    def test_resize_on_load(self, tiny_dataset_dir):
        for s in load_dataset(tiny_dataset_dir, target_size=(64, 64)):
            assert s.size == (64, 64)
            assert set(np.unique(s.mask)) <= {0, 1}

    def test_subset_by_ids(self, tiny_dataset_dir, tiny_samples):
        wanted = [tiny_samples[3].id, tiny_samples[1].id]
        assert [s.id for s in load_dataset(tiny_dataset_dir, ids=wanted)] == wanted

    def test_empty_directory(self, tmp_path):
        with pytest.raises(EmptyDatasetError):
            load_dataset(tmp_path)

    def test_size_check_names_both_sizes(self, tiny_samples):
        with pytest.raises(InputSizeError, match="32x32.*64x64"):
            check_sizes(tiny_samples, (64, 64))

    def test_mask_directory(self, tiny_dataset_dir, tiny_samples):
        masks = load_mask_dir(tiny_dataset_dir / MASKS_DIR)
        assert sorted(masks) == sorted(s.id for s in tiny_samples)

    def test_non_binary_mask_file(self, tmp_path):
        save_pgm(np.full((1, 2, 2), 0.5), tmp_path / "masks" / "bad.pgm")
        with pytest.raises(NonBinaryMaskError):
            load_mask_dir(tmp_path / "masks")

    def test_write_dataset_returns_directory(self, tmp_path, tiny_samples):
        assert write_dataset(tiny_samples[:1], tmp_path / "one") == tmp_path / "one"
