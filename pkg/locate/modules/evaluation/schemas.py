"""Saliency metric and report contracts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field


@dataclass(frozen=True, slots=True)
class GroundTruthHeatmap:
    """Sum-normalized fixation density and the fixations it was built from."""

    density: np.ndarray
    fixation_points: tuple[tuple[int, int], ...]


@dataclass(frozen=True, slots=True)
class MetricTriple:
    kld: float
    sim: float
    nss: float


class ImageMetricRow(BaseModel):
    image: str
    affordance: str
    kld: float
    sim: float
    nss: float


class MetricSummary(BaseModel):
    kld: float
    sim: float
    nss: float


class SkippedRecord(BaseModel):
    image: str
    reason: str


class EvaluationReport(BaseModel):
    """Per-image rows plus per-image and per-affordance aggregates."""

    setting: str
    rows: list[ImageMetricRow] = Field(default_factory=list)
    image_mean: MetricSummary | None = None
    affordance_means: dict[str, MetricSummary] = Field(default_factory=dict)
    affordance_mean: MetricSummary | None = None
    skipped: list[SkippedRecord] = Field(default_factory=list)

    @property
    def evaluated_count(self) -> int:
        return len(self.rows)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)
