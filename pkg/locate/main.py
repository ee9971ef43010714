"""Command-line entry point: train, eval, predict, fixture, inspect."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from locate.core.config import Settings, load_settings
from locate.core.metrics import PipelineMetrics
from locate.modules.backbone.service import build_backbone
from locate.modules.data.fixture import FixtureSpec, generate_fixture
from locate.modules.data.repository import index_dataset, load_image, save_image
from locate.modules.data.service import build_exocentric_pool
from locate.modules.data.transforms import predict_transform
from locate.modules.evaluation.repository import write_report
from locate.modules.evaluation.visualization import render_overlay
from locate.modules.part_select.repository import write_selection_dump
from locate.modules.training.repository import TrainLogWriter, load_checkpoint, save_checkpoint
from locate.modules.training.service import Trainer
from locate.shared.exceptions import (
    ConfigException,
    DataException,
    InputException,
    handle_cli_exception,
)

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.pt"
RESOLVED_CONFIG_NAME = "config.resolved.json"

# flag dest -> dotted settings key
_FLAG_KEYS = {
    "data": "data.root",
    "setting": "data.setting",
    "output_dir": "paths.output_dir",
    "checkpoint": "paths.checkpoint",
    "backbone": "backbone.kind",
    "layout": "backbone.layout_path",
    "tau": "extract.tau",
    "mu": "select.mu",
    "K": "select.K",
    "N": "train.N",
    "lambda_cos": "loss.lambda_cos",
    "lambda_c": "loss.lambda_c",
    "alpha": "loss.alpha",
    "transfer_mode": "transfer.mode",
    "epochs": "train.epochs",
    "seed": "train.seed",
    "lr": "train.lr",
    "batch_size": "train.batch_size",
    "max_steps": "train.max_steps",
    "warmup_epochs": "train.warmup_epochs",
    "num_workers": "train.num_workers",
    "select_debug_dir": "select.debug_dir",
    "log_level": "log_level",
}

_SWITCH_KEYS = {
    "no_cos": ("loss.use_cos", False),
    "no_concentration": ("loss.use_concentration", False),
    "no_part_select": ("transfer.part_select", False),
    "lc_gt_only": ("loss.lc_gt_only", True),
    "unshared_cam": ("cam.shared", False),
}


def _set_dotted(target: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = target
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def collect_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested settings overrides from the flags that were actually given."""
    overrides: dict[str, Any] = {}
    for dest, dotted in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            _set_dotted(overrides, dotted, str(value) if isinstance(value, Path) else value)
    for dest, (dotted, value) in _SWITCH_KEYS.items():
        if getattr(args, dest, False):
            _set_dotted(overrides, dotted, value)
    return overrides


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML or JSON settings file")
    parser.add_argument("--data", type=Path, help="Dataset root")
    parser.add_argument("--setting", choices=["seen", "unseen"])
    parser.add_argument("--output-dir", type=Path)
    parser.add_argument("--checkpoint", type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--log-level")


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backbone", choices=["synthetic", "vit-adapter"])
    parser.add_argument("--layout", type=Path, help="Planted layout for the synthetic backbone")
    parser.add_argument("--tau", type=float)
    parser.add_argument("--mu", type=float)
    parser.add_argument("--K", type=int)
    parser.add_argument("--N", type=int)
    parser.add_argument("--lambda-cos", type=float)
    parser.add_argument("--lambda-c", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--transfer-mode", choices=["GKT", "RKT", "gkt", "rkt"])


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="locate",
        description="Weakly supervised affordance grounding from exocentric interactions.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train the CAM heads")
    _add_common(train)
    _add_model(train)
    train.add_argument("--epochs", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--max-steps", type=int)
    train.add_argument("--warmup-epochs", type=int)
    train.add_argument("--num-workers", type=int)
    train.add_argument(
        "--select-debug-dir",
        type=Path,
        help="Dump similarity maps and PartIoU scores for every batch row",
    )
    train.add_argument("--no-cos", action="store_true", help="Drop the cosine transfer term")
    train.add_argument("--no-concentration", action="store_true", help="Drop the L_c term")
    train.add_argument("--no-part-select", action="store_true", help="Align to pooled exo maps")
    train.add_argument("--lc-gt-only", action="store_true", help="L_c on the GT channel only")
    train.add_argument("--unshared-cam", action="store_true", help="Separate ego CAM head")

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint on the test split")
    _add_common(evaluate)

    predict = commands.add_parser("predict", help="Predict one affordance heatmap")
    _add_common(predict)
    predict.add_argument("--image", type=Path, required=True)
    predict.add_argument("--affordance", required=True)

    fixture = commands.add_parser("fixture", help="Write the synthetic CI dataset")
    fixture.add_argument("--out", type=Path, required=True)
    fixture.add_argument("--seed", type=int, default=0)
    fixture.add_argument("--log-level")

    inspect = commands.add_parser("inspect", help="Dump PartSelect internals for one sample")
    _add_common(inspect)
    _add_model(inspect)
    inspect.add_argument("--index", type=int, default=0, help="Training record position")
    return parser.parse_args(argv)


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def _checkpoint_path(settings: Settings) -> Path:
    return settings.paths.checkpoint or settings.paths.output_dir / CHECKPOINT_NAME


def _echo_config(settings: Settings, directory: Path, **options: object) -> Path:
    """Write the fully-resolved settings, plus subcommand options, next to the outputs."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RESOLVED_CONFIG_NAME
    payload = json.loads(settings.resolved_json())
    if options:
        # not a settings section; ignored when the echo is fed back through --config
        payload["invocation"] = {
            key: str(value) if isinstance(value, Path) else value
            for key, value in options.items()
        }
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def _require_root(settings: Settings) -> Path:
    root = settings.data.root
    if root is None:
        raise ConfigException("data.root is required (use --data)")
    if not root.is_dir():
        raise DataException(f"Dataset root does not exist: {root}", details={"path": str(root)})
    return root


def _restore(args: argparse.Namespace) -> tuple[Settings, Trainer, PipelineMetrics]:
    """Settings stored in the checkpoint overlaid with this invocation's file and flags."""
    overrides = collect_overrides(args)
    preliminary = load_settings(args.config, overrides)
    checkpoint = load_checkpoint(_checkpoint_path(preliminary))
    settings = load_settings(args.config, overrides, base=json.loads(checkpoint.config_json))
    _configure_logging(settings.log_level)
    metrics = PipelineMetrics()
    trainer = Trainer.from_checkpoint(
        checkpoint,
        build_backbone(settings),
        settings=settings,
        metrics=metrics,
    )
    return settings, trainer, metrics


def cmd_train(args: argparse.Namespace) -> int:
    settings = load_settings(args.config, collect_overrides(args))
    _configure_logging(settings.log_level)
    if settings.train.epochs is None:
        raise ConfigException("train.epochs is required (use --epochs)")
    root = _require_root(settings)
    index = index_dataset(root, settings.data.setting)

    output_dir = settings.paths.output_dir
    _echo_config(settings, output_dir)

    metrics = PipelineMetrics()
    trainer = Trainer(
        settings,
        build_backbone(settings),
        index.vocabulary,
        metrics=metrics,
        log_writer=TrainLogWriter(output_dir / "train_log.jsonl"),
    )
    reports = trainer.fit(index.train)
    checkpoint_path = save_checkpoint(trainer.to_checkpoint(), _checkpoint_path(settings))
    metrics.write_textfile(output_dir / "metrics.prom")

    summary = {
        "checkpoint": str(checkpoint_path),
        "steps": trainer.global_step,
        "epochs": trainer.epoch,
        "final_total": reports[-1].total.item() if reports else None,
        "config": settings.config_tag(),
    }
    print(json.dumps(summary))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    settings, trainer, metrics = _restore(args)
    root = _require_root(settings)
    index = index_dataset(root, settings.data.setting)
    if index.vocabulary != trainer.vocabulary:
        raise DataException(
            "Dataset vocabulary differs from the checkpoint vocabulary",
            details={"dataset": list(index.vocabulary), "checkpoint": list(trainer.vocabulary)},
        )
    test_records = index.test
    if not test_records:
        raise DataException(f"no records in the test split of {root / settings.data.setting}")

    output_dir = settings.paths.output_dir
    _echo_config(settings, output_dir / "eval")
    report = trainer.evaluate(test_records)
    write_report(report, output_dir / "eval")
    metrics.write_textfile(output_dir / "metrics.prom")
    if report.image_mean is None:
        raise DataException(
            "Every test record was skipped",
            details={"skipped": report.skipped_count},
        )

    print(
        json.dumps(
            {
                "setting": report.setting,
                "images": report.evaluated_count,
                "skipped": report.skipped_count,
                "kld": round(report.image_mean.kld, 6),
                "sim": round(report.image_mean.sim, 6),
                "nss": round(report.image_mean.nss, 6),
            },
        ),
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    settings, trainer, _ = _restore(args)
    if args.affordance not in trainer.vocabulary:
        raise InputException(
            f"Unknown affordance '{args.affordance}'; known: {', '.join(trainer.vocabulary)}",
            details={"vocabulary": list(trainer.vocabulary)},
        )
    label = trainer.vocabulary.index(args.affordance)
    image = load_image(args.image)
    height, width = int(image.shape[1]), int(image.shape[2])
    tensor = predict_transform(
        image,
        size=settings.data.image_size,
        mean=settings.data.mean,
        std=settings.data.std,
    )
    heatmap = trainer.predict(tensor, label, (height, width))

    output_dir = settings.paths.output_dir / "predict"
    _echo_config(settings, output_dir, image=args.image, affordance=args.affordance)
    stem = f"{args.image.stem}_{args.affordance}"
    heatmap_path = output_dir / f"{stem}_heatmap.npy"
    overlay_path = output_dir / f"{stem}_overlay.png"
    np.save(heatmap_path, heatmap.numpy())
    save_image(render_overlay(image, heatmap), overlay_path)
    print(json.dumps({"heatmap": str(heatmap_path), "overlay": str(overlay_path)}))
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    settings, trainer, _ = _restore(args)
    root = _require_root(settings)
    records = index_dataset(root, settings.data.setting).train
    if not 0 <= args.index < len(records):
        raise InputException(f"--index must be in [0, {len(records)}), got {args.index}")

    record = records[args.index]
    result, saliency, exo_similarity = trainer.inspect(record, build_exocentric_pool(records))
    directory = settings.paths.output_dir / "inspect" / f"sample_{args.index:04d}"
    summary_path = write_selection_dump(
        directory,
        result,
        saliency,
        mu=settings.select.mu,
        exo_similarity=exo_similarity,
    )
    _echo_config(settings, directory, index=args.index)
    print(summary_path.read_text(encoding="utf-8"))
    return 0


def cmd_fixture(args: argparse.Namespace) -> int:
    _configure_logging(args.log_level or "INFO")
    manifest_path = generate_fixture(args.out, FixtureSpec(seed=args.seed))
    print(json.dumps({"root": str(args.out), "manifest": str(manifest_path)}))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "fixture": cmd_fixture,
    "inspect": cmd_inspect,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        return handle_cli_exception(exc)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
