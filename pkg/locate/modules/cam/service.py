"""CAM forward, classification loss and map post-processing."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from locate.modules.backbone.schemas import FeatureMap
from locate.modules.cam.models import CamHead
from locate.modules.cam.schemas import ClassScores, LocalizationMaps
from locate.shared.exceptions import ConfigException, InputException

NORMALIZE_EPS = 1e-8


def forward_cam(features: FeatureMap, head: CamHead) -> tuple[LocalizationMaps, ClassScores]:
    """Localization maps and GAP classification scores for one FeatureMap."""
    if features.feature_dim != head.feature_dim:
        raise ConfigException(
            f"Feature dim {features.feature_dim} does not match head input {head.feature_dim}",
        )
    maps, logits = head(features.data.unsqueeze(0))
    return LocalizationMaps(data=maps[0]), ClassScores(logits=logits[0])


def _validate_label(label: int, class_count: int) -> None:
    if not 0 <= label < class_count:
        raise InputException(f"Class index {label} outside [0, {class_count})")


def classification_loss(
    scores: ClassScores | torch.Tensor,
    label: int | torch.Tensor,
) -> torch.Tensor:
    """Softmax cross-entropy of one logit vector and index, or [B, C] logits and [B] labels."""
    logits = scores.logits if isinstance(scores, ClassScores) else scores
    class_count = int(logits.shape[-1])
    if isinstance(label, torch.Tensor):
        targets = label.reshape(-1).long().to(logits.device)
    else:
        targets = torch.tensor([label], device=logits.device)
    for item in targets.tolist():
        _validate_label(item, class_count)
    return F.cross_entropy(logits.reshape(targets.shape[0], class_count), targets)


def normalize_map(values: torch.Tensor) -> torch.Tensor:
    """Min-max normalize over the trailing (up to two) spatial dims; constant maps go to 0."""
    dims = tuple(range(max(values.ndim - 2, 0), values.ndim))
    low = values.amin(dim=dims, keepdim=True)
    high = values.amax(dim=dims, keepdim=True)
    return (values - low) / (high - low + NORMALIZE_EPS)


def predict_affordance(
    maps: LocalizationMaps,
    label: int,
    out_size: tuple[int, int],
) -> torch.Tensor:
    """Normalized channel `label` bilinearly upsampled to image resolution."""
    _validate_label(label, maps.class_count)
    channel = normalize_map(maps.data[label].detach())
    upsampled = F.interpolate(
        channel[None, None],
        size=out_size,
        mode="bilinear",
        align_corners=False,
    )
    return upsampled[0, 0]
