"""
Command-line interface.

Subcommands: gen-data, selftest, train, eval, ablate, metrics. Every subcommand
resolves a RunConfig (defaults < --config file < flags) and writes its
``config.json`` snapshot into the run directory before doing any work. Exit
codes: 0 success, 1 runtime or check failure, 2 usage error.
"""

import argparse
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from baafseg.core.config import settings
from baafseg.core.error_handling import BaafSegError, ConfigError, EmptyDatasetError
from baafseg.data.dataset import check_sizes, load_dataset, load_mask_dir, write_dataset, write_mask_dir
from baafseg.data.sample import stack
from baafseg.data.synthetic import generate_synthetic
from baafseg.metrics.evaluate import (
    AREA_METRICS,
    METRICS,
    evaluate,
    evaluate_masks,
    evaluate_probabilities,
    format_mean_std,
)
from baafseg.metrics.report import write_curves, write_report
from baafseg.metrics.stats import welch_ttest
from baafseg.network.gates import GateRecord, gate_stats_frame, merge_gate_frames
from baafseg.network.model import build, predict
from baafseg.schemas.network import NetworkSpec, Variant
from baafseg.schemas.run import RunConfig
from baafseg.selftest import run_selftest
from baafseg.tensor.checkpoint import load_checkpoint, save_checkpoint
from baafseg.tensor.tensor import OpKind
from baafseg.training.crossval import cross_validate
from baafseg.training.folds import kfold_split
from baafseg.training.trainer import fit

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
REFERENCE_VARIANT = Variant.DEEP15_BAAF
PREDICTIONS_DIR = "predictions"
CURVE_METRICS = ["auc_roc", "auc_pr"]


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring RunConfig")
    common.add_argument("--seed", type=int, help="Seed for data, splits and initialization")
    common.add_argument("--threads", type=int, help="Worker threads for generation and metrics")
    common.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Serial worker pools (--no-deterministic lets --threads take effect)",
    )
    common.add_argument("--log-level", help="Override BAAF_LOG_LEVEL")
    common.add_argument("--out", help="Output directory (default: timestamped under the runs dir)")
    return common


def _network_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=[v.value for v in Variant])
    parser.add_argument("--divisor", type=int, help="Divide every stage width by this")
    parser.add_argument("--input-size", type=int, help="Square network input size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="baafseg", description="BAAF segmentation network toolkit")
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", parents=[common], help="Generate a synthetic speckle dataset")
    gen.add_argument("--count", type=int)
    gen.add_argument("--size", type=int)
    gen.set_defaults(handler=cmd_gen_data, require_out=True)

    st = sub.add_parser("selftest", parents=[common], help="Gradient checks and attention invariants")
    st.add_argument("--corrupt-backward", choices=[k.value for k in OpKind if k is not OpKind.LEAF])
    st.add_argument("--skip-network", action="store_true", help="Skip the toy network gradient check")
    st.set_defaults(handler=cmd_selftest)

    train = sub.add_parser("train", parents=[common], help="Train one model or run K-fold cross-validation")
    _network_flags(train)
    train.add_argument("--data", required=True, help="Dataset directory")
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--patience", type=int)
    train.add_argument("--kfold", type=int)
    train.add_argument("--resize", action="store_true", help="Resize samples to the network input size")
    train.set_defaults(handler=cmd_train)

    ev = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint on a dataset")
    _network_flags(ev)
    ev.add_argument("--checkpoint", required=True, help="Training run directory or checkpoint directory")
    ev.add_argument("--data", required=True, help="Dataset directory")
    ev.add_argument("--split", choices=["all", "val"], default="all")
    ev.add_argument("--threshold", type=float)
    ev.add_argument("--resize", action="store_true")
    ev.add_argument("--gate-stats", action="store_true", help="Also write per-layer gate statistics")
    ev.set_defaults(handler=cmd_eval)

    ab = sub.add_parser("ablate", parents=[common], help="Train the variant ladder with shared folds")
    _network_flags(ab)
    ab.add_argument("--data", required=True)
    ab.add_argument("--seeds", type=int)
    ab.add_argument("--kfold", type=int)
    ab.add_argument("--epochs", type=int)
    ab.add_argument("--variants", nargs="+", choices=[v.value for v in Variant])
    ab.add_argument("--resize", action="store_true")
    ab.set_defaults(handler=cmd_ablate)

    mt = sub.add_parser("metrics", parents=[common], help="Compare two mask directories")
    mt.add_argument("--pred", required=True, help="Directory of predicted mask PGMs")
    mt.add_argument("--gt", required=True, help="Directory of ground-truth mask PGMs")
    mt.set_defaults(handler=cmd_metrics)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    size = get("input_size")
    return {
        "train.seed": get("seed"),
        "synth.seed": get("seed"),
        "synth.count": get("count"),
        "synth.size": get("size"),
        "network.variant": get("variant"),
        "network.divisor": get("divisor"),
        "network.input_size": [size, size] if size else None,
        "train.epochs": get("epochs"),
        "train.batch_size": get("batch_size"),
        "train.learning_rate": get("lr"),
        "train.patience": get("patience"),
        "train.threshold": get("threshold"),
        "deterministic": get("deterministic"),
        "threads": get("threads"),
        "kfold": get("kfold"),
        "seeds": get("seeds"),
        "variants": get("variants"),
        "data_dir": get("data"),
        "out_dir": get("out"),
    }


def run_dir_for(command: str, cfg: RunConfig) -> Path:
    if cfg.out_dir:
        return Path(cfg.out_dir)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    return Path(settings.RUNS_DIR) / f"{command}-{stamp}"


def _load_samples(cfg: RunConfig, resize: bool):
    size = tuple(cfg.network.input_size)
    samples = load_dataset(cfg.data_dir, target_size=size if resize else None)
    check_sizes(samples, size)
    return samples


def _print_summary(title: str, mean: Dict[str, float], std: Dict[str, float]) -> None:
    print(title)
    for m in METRICS:
        print(f"  {m:<12} {format_mean_std(mean[m], std[m], m in AREA_METRICS)}")


def cmd_gen_data(cfg: RunConfig, run_dir: Path, args: argparse.Namespace) -> int:
    samples = generate_synthetic(cfg.synth, threads=cfg.worker_threads)
    write_dataset(samples, run_dir)
    print(f"Generated {len(samples)} samples (seed {cfg.synth.seed}) in {run_dir}")
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, run_dir: Path, args: argparse.Namespace) -> int:
    corrupt = OpKind(args.corrupt_backward) if args.corrupt_backward else None
    report = run_selftest(corrupt=corrupt, include_network=not args.skip_network, seed=cfg.train.seed)
    report.results.to_csv(run_dir / "selftest.csv", index=False)
    print(report.results[["check", "kind", "max_rel_error", "tolerance", "passed"]].to_string(index=False))
    if not report.passed:
        print(f"FAILED: {', '.join(report.failing)}")
        return EXIT_FAILURE
    return EXIT_OK


def _write_split(directory: Path, train_ids: Sequence[str], val_ids: Sequence[str]) -> None:
    (directory / "split.json").write_text(
        json.dumps({"train": list(train_ids), "val": list(val_ids)}, indent=2), encoding="utf-8"
    )


def cmd_train(cfg: RunConfig, run_dir: Path, args: argparse.Namespace) -> int:
    samples = _load_samples(cfg, args.resize)
    if cfg.kfold:
        result = cross_validate(cfg.network, samples, cfg.train, cfg.kfold)
        for fold in result.folds:
            fold_dir = run_dir / f"fold{fold.fold}"
            fold_dir.mkdir(parents=True, exist_ok=True)
            fold.train.history.to_csv(fold_dir / "history.csv", index=False)
            save_checkpoint(fold.train.model.params, fold_dir / "checkpoint")
            write_report(fold.report, fold_dir / "report.csv")
            held_out = [samples[j].id for j in result.plan.test_indices(fold.fold)]
            trained_on = [samples[j].id for j in result.plan.train_indices(fold.fold)]
            _write_split(fold_dir, trained_on, held_out)
        (run_dir / "folds.json").write_text(json.dumps(result.plan.to_dict()), encoding="utf-8")
        result.summary.to_csv(run_dir / "summary.csv", index=False)
        print(result.summary[["metric", "formatted"]].to_string(index=False))
        return EXIT_OK

    model = build(cfg.network, seed=cfg.train.seed)
    result = fit(model, samples, cfg.train)
    result.history.to_csv(run_dir / "history.csv", index=False)
    save_checkpoint(model.params, run_dir / "checkpoint")
    _write_split(run_dir, result.train_ids, result.val_ids)
    by_id = {s.id: s for s in samples}
    val_samples = [by_id[i] for i in result.val_ids]
    report = evaluate(model, val_samples, cfg.train.threshold, cfg.train.batch_size, "val")
    write_report(report, run_dir / "report.csv")
    print(
        f"Trained {cfg.network.variant.value} for {len(result.history)} epoch(s); "
        f"best val dice {result.best_val_dice:.4f} at epoch {result.best_epoch}"
    )
    return EXIT_OK


def _locate_run(path: Path) -> Tuple[Path, Optional[Path], Optional[Path]]:
    """(checkpoint dir, config.json, split.json) for a run, fold or checkpoint directory.

    ``config.json`` is searched from the model directory up to its parent, so a
    cross-validation fold resolves to the configuration of the run that trained it.
    """
    if (path / "checkpoint").is_dir():
        ckpt_dir, model_dir = path / "checkpoint", path
    else:
        ckpt_dir, model_dir = path, path.parent
    configs = [d / "config.json" for d in (model_dir, model_dir.parent) if (d / "config.json").exists()]
    split = model_dir / "split.json"
    return ckpt_dir, configs[0] if configs else None, split if split.exists() else None


def cmd_eval(cfg: RunConfig, run_dir: Path, args: argparse.Namespace) -> int:
    ckpt_dir, trained_config, split_file = _locate_run(Path(args.checkpoint))
    network = cfg.network
    if trained_config is not None:
        # network flags refine the trained architecture instead of replacing it
        flags = {k: v for k, v in _overrides(args).items() if k.startswith("network.")}
        network = RunConfig.resolve(trained_config, flags).network

    samples = load_dataset(cfg.data_dir, target_size=tuple(network.input_size) if args.resize else None)
    if args.split == "val":
        if split_file is None:
            raise ConfigError("--split val needs a training run or fold directory with split.json")
        val_ids = set(json.loads(split_file.read_text(encoding="utf-8"))["val"])
        samples = [s for s in samples if s.id in val_ids]
    check_sizes(samples, tuple(network.input_size))

    model = build(network, seed=cfg.train.seed)
    load_checkpoint(model.params, ckpt_dir)
    images, masks = stack(samples, dtype=model.dtype)
    records: Optional[List[GateRecord]] = [] if args.gate_stats else None
    probs = predict(model, images, cfg.train.batch_size, gates=records)
    ids = [s.id for s in samples]
    report = evaluate_probabilities(
        probs,
        masks.astype(np.uint8),
        ids,
        cfg.train.threshold,
        fold=args.split,
        with_curves=True,
        threads=cfg.worker_threads,
    )
    write_report(report, run_dir / "report.csv")
    write_curves(report.curves, run_dir / "curves.csv")
    write_mask_dir(probs >= cfg.train.threshold, ids, run_dir / PREDICTIONS_DIR)
    if records is not None:
        merge_gate_frames([gate_stats_frame(records)]).to_csv(run_dir / "gates.csv", index=False)

    title = f"Evaluated {report.count} images ({report.excluded} without boundary metrics)"
    _print_summary(title, report.mean, report.std)
    print(f"  auc_roc      {report.curves.auc_roc:.4f}")
    print(f"  auc_pr       {report.curves.auc_pr:.4f}")
    print(f"Predicted masks in {run_dir / PREDICTIONS_DIR}")
    return EXIT_OK


def ablation_table(runs: pd.DataFrame, reference: Variant = REFERENCE_VARIANT) -> pd.DataFrame:
    """One row per variant: mean ± std of every metric and the Welch p-value against ``reference``.

    ``runs`` holds one row per (variant, seed, fold) with the fold's mean metrics
    and, when present, its pooled ``auc_roc`` and ``auc_pr``.
    """
    rows: List[dict] = []
    ref = runs[runs["variant"] == reference.value]
    metrics = METRICS + [c for c in CURVE_METRICS if c in runs.columns]
    for variant, group in runs.groupby("variant", sort=False):
        row: Dict[str, Any] = {"variant": variant, "runs": len(group)}
        for m in metrics:
            values = group[m].dropna().to_numpy(dtype=np.float64)
            mean = float(values.mean()) if values.size else float("nan")
            std = float(values.std()) if values.size else float("nan")
            row[f"{m}_mean"], row[f"{m}_std"] = mean, std
            row[m] = format_mean_std(mean, std, m in AREA_METRICS)
            ref_values = ref[m].dropna().to_numpy(dtype=np.float64)
            if variant != reference.value and values.size >= 2 and ref_values.size >= 2:
                row[f"{m}_p"] = welch_ttest(ref_values, values).p
            else:
                row[f"{m}_p"] = float("nan")
        rows.append(row)
    return pd.DataFrame(rows)


def cmd_ablate(cfg: RunConfig, run_dir: Path, args: argparse.Namespace) -> int:
    samples = _load_samples(cfg, args.resize)
    k = cfg.kfold or 3
    base_seed = cfg.train.seed
    records: List[dict] = []
    for s in range(cfg.seeds):
        seed = base_seed + s
        plan = kfold_split(len(samples), k, seed)
        train_cfg = cfg.train.model_copy(update={"seed": seed})
        for variant in cfg.variants:
            spec = NetworkSpec.model_validate(
                {**cfg.network.model_dump(), "variant": variant, "filters": None}
            )
            result = cross_validate(spec, samples, train_cfg, k, plan=plan, with_curves=True)
            for fold in result.folds:
                key = {"variant": variant.value, "seed": seed, "fold": fold.fold}
                auc = {"auc_roc": fold.report.curves.auc_roc, "auc_pr": fold.report.curves.auc_pr}
                records.append({**key, **fold.report.mean, **auc})

    runs = pd.DataFrame(records)
    runs.to_csv(run_dir / "runs.csv", index=False)
    table = ablation_table(runs)
    table.to_csv(run_dir / "ablation.csv", index=False)
    columns = ["variant", "runs", "dice", "jaccard", "hd", "auc_roc", "dice_p", "jaccard_p", "hd_p"]
    print(table[columns].to_string(index=False))
    return EXIT_OK


def cmd_metrics(cfg: RunConfig, run_dir: Path, args: argparse.Namespace) -> int:
    preds, gts = load_mask_dir(args.pred), load_mask_dir(args.gt)
    ids = sorted(set(preds) & set(gts))
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        logger.warning(
            f"{len(unmatched)} mask(s) have no counterpart: {unmatched[:5]}",
            extra={"unmatched": len(unmatched)},
        )
    if not ids:
        raise EmptyDatasetError(f"No mask names in common between {args.pred} and {args.gt}")
    report = evaluate_masks(
        [preds[i] for i in ids], [gts[i] for i in ids], ids, threads=cfg.worker_threads
    )
    write_report(report, run_dir / "report.csv")
    _print_summary(f"Compared {report.count} mask pairs", report.mean, report.std)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "require_out", False) and not args.out:
        parser.error(f"{args.command} requires --out")

    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    handler: Callable[[RunConfig, Path, argparse.Namespace], int] = args.handler
    try:
        cfg = RunConfig.resolve(args.config, _overrides(args))
        run_dir = run_dir_for(args.command, cfg)
        cfg.snapshot(run_dir)
        logger.info(
            f"Running {args.command} in {run_dir}",
            extra={"command": args.command, "run_dir": str(run_dir)},
        )
        return handler(cfg, run_dir, args)
    except (BaafSegError, AssertionError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}")
        return EXIT_FAILURE
