"""Transfer loss contracts."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from locate.core.config import LossSettings
from locate.shared.exceptions import ConfigException


@dataclass(frozen=True, slots=True)
class LossWeights:
    lambda_cos: float = 1.0
    lambda_c: float = 0.07
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if self.lambda_cos < 0 or self.lambda_c < 0:
            raise ConfigException("Loss weights must be non-negative")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigException(f"Margin alpha must be in [0, 1), got {self.alpha}")

    @classmethod
    def from_settings(cls, settings: LossSettings) -> LossWeights:
        return cls(
            lambda_cos=settings.lambda_cos,
            lambda_c=settings.lambda_c,
            alpha=settings.alpha,
        )


@dataclass(frozen=True, slots=True)
class LossReport:
    """Loss terms of one step; `total` is the differentiable objective."""

    l_cls_exo: torch.Tensor
    l_cls_ego: torch.Tensor
    l_cos: torch.Tensor | None
    l_c: torch.Tensor
    total: torch.Tensor
    cos_skipped: bool

    def to_record(self) -> dict[str, float | bool | None]:
        return {
            "l_cls_exo": float(self.l_cls_exo.detach()),
            "l_cls_ego": float(self.l_cls_ego.detach()),
            "l_cos": None if self.l_cos is None else float(self.l_cos.detach()),
            "l_c": float(self.l_c.detach()),
            "total": float(self.total.detach()),
            "cos_skipped": self.cos_skipped,
        }
