"""Backbone output contracts."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from locate.shared.utils import binarize_by_mean


@dataclass(frozen=True, slots=True)
class FeatureMap:
    """Dense frozen features of one image over its patch grid."""

    data: torch.Tensor
    source_image_size: tuple[int, int]

    @property
    def feature_dim(self) -> int:
        return int(self.data.shape[0])

    @property
    def patch_grid(self) -> tuple[int, int]:
        return int(self.data.shape[1]), int(self.data.shape[2])


@dataclass(frozen=True, slots=True)
class SaliencyMask:
    """Non-negative saliency weights and their mean-thresholded mask."""

    weights: torch.Tensor
    binary: torch.Tensor

    @classmethod
    def from_weights(cls, weights: torch.Tensor) -> SaliencyMask:
        weights = weights.detach()
        return cls(weights=weights, binary=binarize_by_mean(weights))
