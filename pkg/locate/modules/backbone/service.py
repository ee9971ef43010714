"""Backbone construction and per-image extraction."""

from __future__ import annotations

import logging

import torch

from locate.core.config import Settings
from locate.core.enums import BackboneKindEnum
from locate.modules.backbone.layout import PlantedLayout
from locate.modules.backbone.models import Backbone, SyntheticBackbone, VitAdapterBackbone
from locate.modules.backbone.schemas import FeatureMap, SaliencyMask
from locate.shared.exceptions import InputException

logger = logging.getLogger(__name__)


def _validate_image(backbone: Backbone, image: torch.Tensor) -> tuple[int, int]:
    if image.ndim != 3 or image.shape[0] != 3:
        raise InputException(
            f"Expected image tensor [3, H0, W0], got {tuple(image.shape)}",
        )
    height, width = int(image.shape[1]), int(image.shape[2])
    patch = backbone.patch_size
    if height < patch or width < patch or height % patch or width % patch:
        raise InputException(
            f"Image size {height}x{width} is not a positive multiple of patch size {patch}",
        )
    return height, width


def extract_features(backbone: Backbone, image: torch.Tensor) -> FeatureMap:
    """Extract the frozen dense FeatureMap of one image."""
    size = _validate_image(backbone, image)
    data = backbone.features(image.unsqueeze(0))[0]
    return FeatureMap(data=data, source_image_size=size)


def extract_saliency(backbone: Backbone, image: torch.Tensor) -> SaliencyMask:
    """Extract the saliency weights of one image and their mean-thresholded mask."""
    _validate_image(backbone, image)
    weights = backbone.saliency(image.unsqueeze(0))[0]
    return SaliencyMask.from_weights(weights)


def make_synthetic_backbone(
    seed: int,
    layout: PlantedLayout | None = None,
    *,
    patch_size: int = 16,
    feature_dim: int = 32,
    noise_scale: float = 0.01,
    mean: tuple[float, float, float] = (0.485, 0.456, 0.406),
    std: tuple[float, float, float] = (0.229, 0.224, 0.225),
) -> SyntheticBackbone:
    """Build the deterministic synthetic backbone with an optional default layout."""
    return SyntheticBackbone(
        seed=seed,
        layout=layout,
        patch_size=patch_size,
        feature_dim=feature_dim,
        noise_scale=noise_scale,
        mean=mean,
        std=std,
    )


def build_backbone(settings: Settings) -> SyntheticBackbone | VitAdapterBackbone:
    """Return frozen backbone for configured kind."""
    config = settings.backbone
    if config.kind is BackboneKindEnum.VIT_ADAPTER:
        return VitAdapterBackbone.from_hub(
            config.hub_repo,
            config.hub_model,
            patch_size=config.patch_size,
        )

    layout = None
    if config.layout_path is not None:
        grid_side = settings.data.image_size // config.patch_size
        layout = PlantedLayout.from_file(config.layout_path, (grid_side, grid_side))
    logger.info(
        "Synthetic backbone seed=%s feature_dim=%s patch_size=%s",
        config.seed,
        config.feature_dim,
        config.patch_size,
    )
    return make_synthetic_backbone(
        config.seed,
        layout,
        patch_size=config.patch_size,
        feature_dim=config.feature_dim,
        noise_scale=config.noise_scale,
        mean=settings.data.mean,
        std=settings.data.std,
    )
