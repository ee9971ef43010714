"""Dataset record and batch contracts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch

from locate.core.enums import SettingEnum, SplitEnum


@dataclass(frozen=True, slots=True)
class SampleRecord:
    """One egocentric image with its paired exocentric pool (train) or GT file (test)."""

    ego_path: Path
    exo_paths: tuple[Path, ...]
    affordance: int
    affordance_name: str
    object_class: str
    split: SplitEnum
    setting: SettingEnum
    gt_path: Path | None = None

    @property
    def group(self) -> tuple[int, str]:
        return self.affordance, self.object_class


@dataclass(frozen=True, slots=True)
class DatasetIndex:
    """Ordered records plus the affordance vocabulary read from the training tree."""

    vocabulary: tuple[str, ...]
    records: tuple[SampleRecord, ...]

    @property
    def train(self) -> list[SampleRecord]:
        return [record for record in self.records if record.split is SplitEnum.TRAIN]

    @property
    def test(self) -> list[SampleRecord]:
        return [record for record in self.records if record.split is SplitEnum.TEST]


@dataclass(frozen=True, slots=True)
class Batch:
    ego_images: torch.Tensor
    exo_images: torch.Tensor
    labels: torch.Tensor
    object_classes: tuple[str, ...]
    ego_paths: tuple[Path, ...]

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])
