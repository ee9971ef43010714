"""PartSelect contracts."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from pydantic import BaseModel

from locate.core.enums import SelectionOutcomeEnum


@dataclass(frozen=True, slots=True)
class PrototypeSet:
    """K cluster centers over an embedding bag; every center is the mean of its members."""

    centers: torch.Tensor
    member_counts: tuple[int, ...]
    kmeans_iters_used: int
    assignments: torch.Tensor

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True, slots=True)
class SimilarityMaps:
    """Prototype-to-cell cosine similarity [K, H, W] and mean-thresholded masks."""

    data: torch.Tensor
    binary: torch.Tensor


@dataclass(frozen=True, slots=True)
class SelectionResult:
    selected: torch.Tensor | None
    scores: torch.Tensor
    chosen_index: int | None
    outcome: SelectionOutcomeEnum
    prototypes: PrototypeSet | None = None
    similarity: SimilarityMaps | None = None


class SelectionDumpSummary(BaseModel):
    """JSON side-car of a selector debug dump."""

    outcome: SelectionOutcomeEnum
    mu: float
    scores: list[float]
    chosen_index: int | None
    member_counts: list[int]
    kmeans_iters_used: int | None
    grid: tuple[int, int]
