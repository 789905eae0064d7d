"""
End-to-end tests for the command-line interface.
"""

import hashlib
import json

import numpy as np
import pandas as pd
import pytest

from baafseg import cli
from baafseg.cli import ablation_table, main
from baafseg.metrics.evaluate import METRICS
from baafseg.metrics.report import read_report
from baafseg.schemas.network import Variant

TINY_NET = ["--variant", "unet9", "--divisor", "16", "--input-size", "32"]


def _digest(directory) -> str:
    h = hashlib.sha256()
    for path in sorted(p for p in directory.rglob("*.pgm")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()


@pytest.fixture
def data_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["gen-data", "--count", "6", "--size", "32", "--seed", "3", "--out", str(out)]) == 0
    return out


@pytest.fixture
def trained_run(tmp_path, data_dir):
    run = tmp_path / "train"
    argv = ["train", "--data", str(data_dir), *TINY_NET, "--epochs", "2", "--seed", "0", "--out", str(run)]
    assert main(argv) == 0
    return run


@pytest.fixture
def kfold_run(tmp_path, data_dir):
    run = tmp_path / "cv"
    argv = ["train", "--data", str(data_dir), *TINY_NET, "--epochs", "1", "--kfold", "2", "--out", str(run)]
    assert main(argv) == 0
    return run


class TestGenData:
    def test_is_deterministic(self, tmp_path):
        for name in ("a", "b"):
            argv = ["gen-data", "--count", "4", "--size", "32", "--seed", "9", "--out", str(tmp_path / name)]
            assert main(argv) == 0
        assert _digest(tmp_path / "a") == _digest(tmp_path / "b")
        assert len(list((tmp_path / "a" / "images").glob("*.pgm"))) == 4

    def test_requires_out(self):
        with pytest.raises(SystemExit) as exc:
            main(["gen-data", "--count", "2"])
        assert exc.value.code == 2

    def test_flags_beat_the_config_file(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"synth": {"count": 5, "size": 32}}))
        out = tmp_path / "data"
        assert main(["gen-data", "--config", str(config), "--count", "2", "--out", str(out)]) == 0
        assert len(pd.read_csv(out / "manifest.csv")) == 2
        snapshot = json.loads((out / "config.json").read_text())
        assert snapshot["synth"]["count"] == 2 and snapshot["synth"]["size"] == 32

    def test_bad_config_file(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text("{not json")
        assert main(["gen-data", "--config", str(config), "--out", str(tmp_path / "d")]) == 1

    @pytest.mark.parametrize(
        "flags,expected",
        [([], 1), (["--threads", "3"], 1), (["--no-deterministic", "--threads", "3"], 3)],
    )
    def test_deterministic_runs_generate_serially(self, tmp_path, monkeypatch, flags, expected):
        seen = []
        real = cli.generate_synthetic

        def recording(cfg, threads=None):
            seen.append(threads)
            return real(cfg, threads=threads)

        monkeypatch.setattr(cli, "generate_synthetic", recording)
        argv = ["gen-data", "--count", "2", "--size", "32", *flags, "--out", str(tmp_path / "d")]
        assert main(argv) == 0
        assert seen == [expected]


class TestSelfTest:
    def test_passes_without_network(self, tmp_path, capsys):
        assert main(["selftest", "--skip-network", "--out", str(tmp_path / "st")]) == 0
        assert (tmp_path / "st" / "selftest.csv").exists()

    def test_corrupt_backward_is_reported(self, tmp_path, capsys):
        argv = ["selftest", "--skip-network", "--corrupt-backward", "conv2d", "--out", str(tmp_path / "st")]
        assert main(argv) == 1
        assert "conv2d" in capsys.readouterr().out.split("FAILED:")[1]


class TestTrainAndEval:
    def test_train_outputs(self, trained_run):
        for name in ("history.csv", "split.json", "config.json", "report.csv"):
            assert (trained_run / name).exists()
        assert (trained_run / "checkpoint").is_dir()
        history = pd.read_csv(trained_run / "history.csv")
        assert 1 <= len(history) <= 2

    def test_deterministic_runs_have_identical_history(self, tmp_path, data_dir, trained_run):
        again = tmp_path / "again"
        argv = [
            "train", "--data", str(data_dir), *TINY_NET, "--epochs", "2", "--seed", "0",
            "--deterministic", "--out", str(again),
        ]
        assert main(argv) == 0
        assert (again / "history.csv").read_bytes() == (trained_run / "history.csv").read_bytes()

    def test_eval_reproduces_best_validation_dice(self, tmp_path, data_dir, trained_run):
        out = tmp_path / "eval"
        argv = [
            "eval", "--checkpoint", str(trained_run), "--data", str(data_dir),
            "--split", "val", "--out", str(out),
        ]
        assert main(argv) == 0
        report = read_report(out / "report.csv")
        best = pd.read_csv(trained_run / "history.csv")["val_dice"].max()
        assert report["dice"].mean() == pytest.approx(best, abs=1e-6)
        assert (out / "curves.csv").exists()

    def test_eval_rejects_mismatched_input_size(self, tmp_path, data_dir, trained_run, capsys):
        argv = [
            "eval", "--checkpoint", str(trained_run), "--data", str(data_dir),
            "--input-size", "64", "--out", str(tmp_path / "eval"),
        ]
        assert main(argv) == 1
        message = capsys.readouterr().out
        assert "32x32" in message and "64x64" in message

    def test_eval_writes_prediction_masks(self, tmp_path, data_dir, trained_run):
        out = tmp_path / "eval"
        argv = ["eval", "--checkpoint", str(trained_run), "--data", str(data_dir), "--out", str(out)]
        assert main(argv) == 0
        predictions = sorted(p.stem for p in (out / "predictions").glob("*.pgm"))
        assert predictions == sorted(p.stem for p in (data_dir / "masks").glob("*.pgm"))

        compared = tmp_path / "compared"
        gt = str(data_dir / "masks")
        assert main(["metrics", "--pred", str(out / "predictions"), "--gt", gt, "--out", str(compared)]) == 0
        from_eval = read_report(out / "report.csv").set_index("id")
        from_masks = read_report(compared / "report.csv").set_index("id")
        for m in ("dice", "jaccard", "precision", "recall"):
            np.testing.assert_allclose(from_masks[m], from_eval.loc[from_masks.index, m])

    def test_kfold_writes_a_split_per_fold(self, kfold_run):
        folds = json.loads((kfold_run / "folds.json").read_text())["folds"]
        held_out = []
        for i in range(2):
            split = json.loads((kfold_run / f"fold{i}" / "split.json").read_text())
            assert len(split["val"]) == len(folds[i])
            assert not set(split["train"]) & set(split["val"])
            held_out += split["val"]
        assert len(set(held_out)) == 6
        assert not (kfold_run / "fold0" / "config.json").exists()

    def test_eval_of_a_fold_reproduces_its_report(self, tmp_path, data_dir, kfold_run):
        out = tmp_path / "eval"
        argv = [
            "eval", "--checkpoint", str(kfold_run / "fold0"), "--data", str(data_dir),
            "--split", "val", "--out", str(out),
        ]
        assert main(argv) == 0
        report = read_report(out / "report.csv")
        trained = read_report(kfold_run / "fold0" / "report.csv")
        assert sorted(report["id"]) == sorted(trained["id"])
        assert report["dice"].mean() == pytest.approx(trained["dice"].mean(), abs=1e-6)

    def test_eval_of_a_fold_checkpoint_uses_the_trained_network(self, tmp_path, data_dir, kfold_run):
        out = tmp_path / "eval"
        argv = ["eval", "--checkpoint", str(kfold_run / "fold1" / "checkpoint"), "--data", str(data_dir)]
        assert main([*argv, "--split", "val", "--out", str(out)]) == 0
        # the eval run's own network would reject the 32x32 dataset
        assert json.loads((out / "config.json").read_text())["network"]["input_size"] == [128, 128]
        assert len(read_report(out / "report.csv")) == 3

    def test_missing_data(self, tmp_path):
        argv = ["train", "--data", str(tmp_path / "nowhere"), *TINY_NET, "--out", str(tmp_path / "run")]
        assert main(argv) == 1


class TestMetricsCommand:
    def test_ground_truth_against_itself(self, tmp_path, data_dir):
        masks = str(data_dir / "masks")
        assert main(["metrics", "--pred", masks, "--gt", masks, "--out", str(tmp_path / "m")]) == 0
        report = read_report(tmp_path / "m" / "report.csv")
        assert len(report) == 6
        assert (report["dice"] == 1.0).all()
        assert (report["hd"] == 0.0).all()

    def test_nothing_in_common(self, tmp_path, data_dir):
        empty = tmp_path / "empty"
        empty.mkdir()
        gt = str(data_dir / "masks")
        argv = ["metrics", "--pred", str(empty), "--gt", gt, "--out", str(tmp_path / "m")]
        assert main(argv) == 1


class TestAblationTable:
    def _runs(self):
        rng = np.random.default_rng(0)
        rows = []
        for variant, centre in ((Variant.UNET9, 0.7), (Variant.DEEP15_BAAF, 0.8)):
            for seed in range(2):
                for fold in range(3):
                    row = {m: centre + 0.01 * rng.standard_normal() for m in METRICS}
                    rows.append({"variant": variant.value, "seed": seed, "fold": fold, **row})
        return pd.DataFrame(rows)

    def test_reference_has_no_p_value(self):
        table = ablation_table(self._runs()).set_index("variant")
        assert np.isnan(table.loc["deep15_baaf", "dice_p"])
        assert table.loc["unet9", "dice_p"] < 0.01
        assert table.loc["unet9", "runs"] == 6

    def test_formatted_cells(self):
        table = ablation_table(self._runs()).set_index("variant")
        assert "±" in table.loc["unet9", "dice"]
        assert table.loc["unet9", "dice_mean"] == pytest.approx(0.7, abs=0.02)

    def test_curve_columns_are_summarized(self):
        runs = self._runs()
        runs["auc_roc"] = np.where(runs["variant"] == "unet9", 0.9, 0.95)
        table = ablation_table(runs).set_index("variant")
        assert table.loc["unet9", "auc_roc_mean"] == pytest.approx(0.9)
        assert "auc_pr" not in table.columns


class TestAblateCommand:
    def test_ladder_over_seeds_and_folds(self, tmp_path, data_dir):
        out = tmp_path / "ablate"
        argv = [
            "ablate", "--data", str(data_dir), "--divisor", "16", "--input-size", "32",
            "--variants", "unet9", "--seeds", "2", "--kfold", "2", "--epochs", "1", "--out", str(out),
        ]
        assert main(argv) == 0
        runs = pd.read_csv(out / "runs.csv")
        assert len(runs) == 4
        assert sorted(set(runs["seed"])) == [0, 1]
        assert runs["auc_roc"].between(0, 1).all()
        table = pd.read_csv(out / "ablation.csv")
        assert table["variant"].tolist() == ["unet9"]
        assert table.loc[0, "runs"] == 4

    @pytest.mark.slow
    def test_reference_variant_gets_p_values(self, tmp_path):
        data = tmp_path / "data"
        assert main(["gen-data", "--count", "6", "--size", "128", "--seed", "1", "--out", str(data)]) == 0
        out = tmp_path / "ablate"
        argv = [
            "ablate", "--data", str(data), "--divisor", "16", "--variants", "unet9", "deep15_baaf",
            "--seeds", "1", "--kfold", "2", "--epochs", "1", "--out", str(out),
        ]
        assert main(argv) == 0
        table = pd.read_csv(out / "ablation.csv").set_index("variant")
        assert table.loc["unet9", "runs"] == table.loc["deep15_baaf", "runs"] == 2
        assert np.isnan(table.loc["deep15_baaf", "dice_p"])
        assert 0 <= table.loc["unet9", "dice_p"] <= 1
