"""Trainable class-aware localization head."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


class CamHead(nn.Module):
    """Projection (feed-forward + two 3x3 convs) followed by a 1x1 class-aware conv.

    Localization maps are the class-aware conv output; scores are their global average.
    """

    def __init__(self, feature_dim: int, class_count: int, hidden_dim: int | None = None) -> None:
        super().__init__()
        width = hidden_dim or feature_dim
        self.feature_dim = feature_dim
        self.class_count = class_count
        self.projection = nn.Linear(feature_dim, width)
        self.conv1 = nn.Conv2d(width, width, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(width, width, kernel_size=3, padding=1)
        self.class_conv = nn.Conv2d(width, class_count, kernel_size=1)

    def project(self, features: torch.Tensor) -> torch.Tensor:
        """[B, D, H, W] -> [B, D', H, W] projected features."""
        hidden = self.projection(features.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)
        hidden = F.relu(hidden)
        hidden = F.relu(self.conv1(hidden))
        return F.relu(self.conv2(hidden))

    def localize(self, projected: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        maps = self.class_conv(projected)
        logits = maps.mean(dim=(2, 3))
        return maps, logits

    def forward(self, features: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """[B, D, H, W] features -> ([B, C, H, W] maps, [B, C] logits)."""
        return self.localize(self.project(features))


class LocateModel(nn.Module):
    """Exocentric and egocentric CAM branches with optional weight sharing."""

    def __init__(
        self,
        feature_dim: int,
        class_count: int,
        *,
        shared: bool = True,
    ) -> None:
        super().__init__()
        self.shared = shared
        self.cam = CamHead(feature_dim, class_count)
        self.cam_ego = None if shared else CamHead(feature_dim, class_count)

    @property
    def exo_head(self) -> CamHead:
        return self.cam

    @property
    def ego_head(self) -> CamHead:
        return self.cam if self.cam_ego is None else self.cam_ego

    def zero_parameters_(self) -> None:
        with torch.no_grad():
            for parameter in self.parameters():
                parameter.zero_()
