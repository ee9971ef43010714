"""Checkpoint container and training log persistence."""

from __future__ import annotations

import logging
import pickle
from pathlib import Path

import torch

from locate.modules.training.schemas import CHECKPOINT_VERSION, Checkpoint, TrainStepRecord
from locate.shared.exceptions import CheckpointException

logger = logging.getLogger(__name__)

_REQUIRED_KEYS = ("version", "state_dict", "config", "vocabulary", "epoch", "global_step", "rng")


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": checkpoint.version,
        "state_dict": {
            name: tensor.detach().cpu() for name, tensor in checkpoint.state_dict.items()
        },
        "config": checkpoint.config_json,
        "vocabulary": list(checkpoint.vocabulary),
        "epoch": checkpoint.epoch,
        "global_step": checkpoint.global_step,
        "rng": checkpoint.rng_state.clone(),
        "feature_dim": checkpoint.feature_dim,
        "shared": checkpoint.shared,
    }
    torch.save(payload, path)
    logger.info(
        "Checkpoint saved path=%s epoch=%s step=%s",
        path,
        checkpoint.epoch,
        checkpoint.global_step,
    )
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Read a checkpoint; unreadable files and other versions raise CheckpointException."""
    if not path.is_file():
        raise CheckpointException(f"Checkpoint not found: {path}", details={"path": str(path)})
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (RuntimeError, EOFError, OSError, ValueError, pickle.UnpicklingError) as exc:
        raise CheckpointException(
            f"Cannot read checkpoint {path}: {exc}",
            details={"path": str(path)},
        ) from exc

    if not isinstance(payload, dict) or any(key not in payload for key in _REQUIRED_KEYS):
        raise CheckpointException(f"Checkpoint {path} is missing required entries")
    version = payload["version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointException(
            f"Checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})",
            details={"found": version, "expected": CHECKPOINT_VERSION},
        )
    return Checkpoint(
        state_dict=dict(payload["state_dict"]),
        config_json=payload["config"],
        vocabulary=tuple(payload["vocabulary"]),
        epoch=int(payload["epoch"]),
        global_step=int(payload["global_step"]),
        rng_state=payload["rng"],
        version=version,
        feature_dim=int(payload.get("feature_dim", 0)),
        shared=bool(payload.get("shared", True)),
    )


class TrainLogWriter:
    """Append-only JSON-lines step log."""

    def __init__(self, path: Path) -> None:
        self.path = path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("", encoding="utf-8")

    def write(self, record: TrainStepRecord) -> None:
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(record.model_dump_json() + "\n")
