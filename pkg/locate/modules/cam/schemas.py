"""CAM head output contracts."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True, slots=True)
class LocalizationMaps:
    """Per-affordance activation maps [C, H, W]."""

    data: torch.Tensor

    @property
    def class_count(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True, slots=True)
class ClassScores:
    """Classification logits [C], spatial means of the maps."""

    logits: torch.Tensor
