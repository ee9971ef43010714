"""Harvest feature embeddings from high-activation exocentric regions."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import torch

from locate.modules.backbone.schemas import FeatureMap
from locate.modules.cam.schemas import LocalizationMaps
from locate.modules.cam.service import normalize_map
from locate.modules.regions.schemas import EmbeddingBag
from locate.shared.exceptions import InputException

logger = logging.getLogger(__name__)


def extract_interaction_embeddings(
    features: Sequence[FeatureMap],
    maps: Sequence[LocalizationMaps],
    gt_class: int,
    tau: float,
) -> EmbeddingBag:
    """Copy features at cells whose normalized GT-class activation is strictly above tau.

    Rows are concatenated in image order, row-major cell order within an image.
    """
    if len(features) != len(maps):
        raise InputException(f"Got {len(features)} feature maps but {len(maps)} map sets")
    if not 0.0 < tau < 1.0:
        raise InputException(f"tau must be in (0, 1), got {tau}")

    grids = {feature.patch_grid for feature in features}
    if len(grids) > 1:
        raise InputException(f"Exocentric images disagree on patch grid: {sorted(grids)}")

    rows: list[torch.Tensor] = []
    counts: list[int] = []
    coords: list[tuple[int, int, int]] = []
    for image_index, (feature, image_maps) in enumerate(zip(features, maps, strict=True)):
        if not 0 <= gt_class < image_maps.class_count:
            raise InputException(f"Class index {gt_class} outside [0, {image_maps.class_count})")
        if tuple(image_maps.data.shape[1:]) != feature.patch_grid:
            raise InputException("Localization maps and features disagree on grid shape")

        activation = normalize_map(image_maps.data[gt_class].detach())
        cells = torch.nonzero(activation > tau, as_tuple=False)
        counts.append(int(cells.shape[0]))
        if cells.shape[0] == 0:
            continue
        rows.append(feature.data[:, cells[:, 0], cells[:, 1]].T)
        coords.extend((image_index, int(u), int(v)) for u, v in cells.tolist())

    feature_dim = features[0].feature_dim if features else 0
    embeddings = torch.cat(rows, dim=0) if rows else torch.zeros(0, feature_dim)
    logger.debug("Interaction embeddings extracted L=%s per_image=%s", len(coords), counts)
    return EmbeddingBag(
        embeddings=embeddings.detach(),
        per_image_counts=tuple(counts),
        source_coords=tuple(coords),
    )
