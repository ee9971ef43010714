"""Shared synthetic scenes and settings for tests."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import torch

from locate.core.config import Settings, load_settings
from locate.core.enums import PatchRoleEnum
from locate.modules.backbone.layout import PlantedLayout
from locate.modules.backbone.models import SyntheticBackbone, anchor_index
from locate.modules.backbone.schemas import FeatureMap, SaliencyMask
from locate.modules.backbone.service import (
    extract_features,
    extract_saliency,
    make_synthetic_backbone,
)
from locate.modules.cam.schemas import LocalizationMaps
from locate.modules.data.fixture import ego_layout, exo_layout
from locate.modules.regions.schemas import EmbeddingBag
from locate.modules.regions.service import extract_interaction_embeddings

INTERACTION_MARGIN = 2


def make_backbone(seed: int = 0, noise_scale: float = 0.01) -> SyntheticBackbone:
    return make_synthetic_backbone(seed, noise_scale=noise_scale)


def render_features(
    backbone: SyntheticBackbone,
    layout: PlantedLayout,
    image_id: str,
) -> FeatureMap:
    return extract_features(backbone, backbone.render(image_id, layout))


def interaction_map(layout: PlantedLayout, margin: int = INTERACTION_MARGIN) -> LocalizationMaps:
    """Single-channel map that is 1 on the part box grown by `margin` cells, else 0."""
    part_cells = torch.from_numpy(layout.role_mask(PatchRoleEnum.OBJECT_PART))
    rows, cols = torch.nonzero(part_cells, as_tuple=True)
    data = torch.zeros(1, *layout.grid)
    data[
        0,
        max(int(rows.min()) - margin, 0) : int(rows.max()) + margin + 1,
        max(int(cols.min()) - margin, 0) : int(cols.max()) + margin + 1,
    ] = 1.0
    return LocalizationMaps(data=data)


def planted_selection_scene(
    seed: int,
    n_exo: int = 3,
) -> tuple[SyntheticBackbone, EmbeddingBag, FeatureMap, SaliencyMask]:
    """Exocentric bag around planted parts and the matching egocentric image."""
    backbone = make_backbone(seed)
    generator = torch.Generator().manual_seed(seed)
    exo_features: list[FeatureMap] = []
    exo_maps: list[LocalizationMaps] = []
    for index in range(n_exo):
        layout = exo_layout(generator, part_slot=0)
        exo_features.append(render_features(backbone, layout, f"exo-{seed}-{index}"))
        exo_maps.append(interaction_map(layout))
    bag = extract_interaction_embeddings(exo_features, exo_maps, gt_class=0, tau=0.5)

    ego = backbone.render(f"ego-{seed}", ego_layout(generator, part_slot=0, object_slot=0))
    return backbone, bag, extract_features(backbone, ego), extract_saliency(backbone, ego)


def nearest_role(backbone: SyntheticBackbone, vector: torch.Tensor) -> tuple[PatchRoleEnum, int]:
    """Role and slot of the anchor direction closest in cosine to `vector`."""
    anchors = backbone.anchor_vectors.to(torch.float64)
    vector = vector.to(torch.float64)
    cosine = anchors @ vector / (anchors.norm(dim=1) * vector.norm())
    best = int(torch.argmax(cosine))
    for role in PatchRoleEnum:
        slots = 1 if role in (PatchRoleEnum.BACKGROUND, PatchRoleEnum.HUMAN) else 12
        for slot in range(slots):
            if anchor_index(role, slot) == best:
                return role, slot
    raise AssertionError("anchor index not covered by any role")


def fixture_settings(root: Path, output_dir: Path, **sections: Any) -> Settings:
    """Small, fast training settings on a generated fixture tree."""
    overrides: dict[str, Any] = {
        "data": {"root": str(root)},
        "paths": {"output_dir": str(output_dir)},
        "train": {"epochs": 100, "batch_size": 4, "lr": 0.02, "seed": 7},
    }
    for section, values in sections.items():
        overrides.setdefault(section, {}).update(values)
    return load_settings(overrides=overrides, env_file=None)
