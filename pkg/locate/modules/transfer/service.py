"""Part-level knowledge transfer losses."""

from __future__ import annotations

from collections.abc import Sequence

import torch
import torch.nn.functional as F

from locate.modules.backbone.schemas import FeatureMap
from locate.modules.cam.schemas import LocalizationMaps
from locate.modules.cam.service import normalize_map
from locate.modules.transfer.schemas import LossReport, LossWeights
from locate.shared.exceptions import InputException

MASS_EPS = 1e-8
NORM_EPS = 1e-8


def masked_average_pool(
    ego_features: FeatureMap,
    ego_maps: LocalizationMaps,
    label: int,
) -> tuple[torch.Tensor, bool]:
    """Feature mean weighted by the normalized map of class `label`.

    Returns the pooled [D] vector and whether the weights were all zero.
    """
    if not 0 <= label < ego_maps.class_count:
        raise InputException(f"Class index {label} outside [0, {ego_maps.class_count})")
    weights = normalize_map(ego_maps.data[label])
    if tuple(weights.shape) != ego_features.patch_grid:
        raise InputException("Localization maps and features disagree on grid shape")
    return weighted_feature_mean(ego_features.data, weights)


def weighted_feature_mean(data: torch.Tensor, weights: torch.Tensor) -> tuple[torch.Tensor, bool]:
    """Mean of [D, H, W] features under non-negative [H, W] weights, and a zero-mass flag."""
    mass = weights.sum()
    pooled = (data * weights.unsqueeze(0)).sum(dim=(1, 2)) / (mass + MASS_EPS)
    return pooled, bool(mass.detach() <= MASS_EPS)


def cosine_margin_loss(
    f_op: torch.Tensor,
    f_ego: torch.Tensor,
    alpha: float,
) -> torch.Tensor | None:
    """max(1 - cos - alpha, 0); None when either vector has (near) zero norm."""
    f_op = f_op.detach().to(f_ego.dtype)
    op_norm = f_op.norm()
    ego_norm = f_ego.norm()
    if op_norm <= NORM_EPS or ego_norm.detach() <= NORM_EPS:
        return None
    cosine = torch.dot(f_op, f_ego) / (op_norm * ego_norm)
    return F.relu(1.0 - cosine - alpha)


def _centered_distance(maps: torch.Tensor) -> torch.Tensor:
    """Mass-weighted mean distance to the centroid for each [..., H, W] map."""
    height, width = maps.shape[-2:]
    rows = torch.arange(height, dtype=maps.dtype, device=maps.device).view(height, 1)
    cols = torch.arange(width, dtype=maps.dtype, device=maps.device).view(1, width)

    mass = maps.sum(dim=(-2, -1))
    safe_mass = mass.clamp_min(MASS_EPS)
    center_row = (maps * rows).sum(dim=(-2, -1)) / safe_mass
    center_col = (maps * cols).sum(dim=(-2, -1)) / safe_mass

    squared = (rows - center_row[..., None, None]) ** 2 + (cols - center_col[..., None, None]) ** 2
    # sqrt is not differentiable at 0
    positive = squared > 0
    distance = torch.where(positive, squared.clamp_min(1e-20).sqrt(), torch.zeros_like(squared))
    spread = (maps * distance).sum(dim=(-2, -1)) / safe_mass
    return torch.where(mass > MASS_EPS, spread, torch.zeros_like(spread))


def concentration_loss(
    ego_maps: LocalizationMaps,
    channels: Sequence[int] | None = None,
) -> torch.Tensor:
    """Sum over channels of the normalized map's spread around its centroid, in patch units."""
    data = ego_maps.data
    if channels is not None:
        for channel in channels:
            if not 0 <= channel < ego_maps.class_count:
                raise InputException(f"Class index {channel} outside [0, {ego_maps.class_count})")
        data = data[list(channels)]
    return _centered_distance(normalize_map(data)).sum()


def global_average_target(projected_exo: torch.Tensor) -> torch.Tensor:
    """Mean over exocentric images of their spatially averaged projected features [N, D', H, W]."""
    return projected_exo.detach().mean(dim=(2, 3)).mean(dim=0)


def regional_average_target(
    exo_features: Sequence[FeatureMap],
    exo_maps: Sequence[LocalizationMaps],
    label: int,
) -> torch.Tensor | None:
    """Mean over exocentric images of their masked average pools for class `label`.

    Images whose normalized map carries no mass are left out; None when none remain.
    """
    if len(exo_features) != len(exo_maps):
        raise InputException(
            f"Got {len(exo_features)} exocentric feature maps but {len(exo_maps)} map sets",
        )
    pooled: list[torch.Tensor] = []
    for features, maps in zip(exo_features, exo_maps, strict=True):
        vector, empty = masked_average_pool(features, LocalizationMaps(maps.data.detach()), label)
        if not empty:
            pooled.append(vector)
    if not pooled:
        return None
    return torch.stack(pooled).mean(dim=0)


def total_loss(
    l_cls_exo: torch.Tensor,
    l_cls_ego: torch.Tensor,
    l_cos: torch.Tensor | None,
    l_c: torch.Tensor,
    weights: LossWeights,
    *,
    warmup: bool = False,
) -> LossReport:
    """Weighted objective; the cosine term is dropped during warmup or when it was skipped."""
    cos_skipped = warmup or l_cos is None
    total = l_cls_exo + l_cls_ego + weights.lambda_c * l_c
    if not cos_skipped:
        total = total + weights.lambda_cos * l_cos
    return LossReport(
        l_cls_exo=l_cls_exo,
        l_cls_ego=l_cls_ego,
        l_cos=l_cos,
        l_c=l_c,
        total=total,
        cos_skipped=cos_skipped,
    )
