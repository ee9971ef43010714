"""Training state contracts."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from pydantic import BaseModel

from locate.core.enums import SelectionOutcomeEnum

CHECKPOINT_VERSION = "locate-ckpt/1"


@dataclass(frozen=True, slots=True)
class Checkpoint:
    """Versioned CAM parameters with the config and RNG state needed to resume."""

    state_dict: dict[str, torch.Tensor]
    config_json: str
    vocabulary: tuple[str, ...]
    epoch: int
    global_step: int
    rng_state: torch.Tensor
    version: str = CHECKPOINT_VERSION
    feature_dim: int = 0
    shared: bool = True


class TrainStepRecord(BaseModel):
    """One JSON line of the training log."""

    epoch: int
    step: int
    batch_size: int
    warmup: bool
    l_cls_exo: float
    l_cls_ego: float
    l_cos: float | None
    l_c: float
    total: float
    cos_skipped: bool
    outcomes: dict[SelectionOutcomeEnum, int]
    duration_seconds: float
