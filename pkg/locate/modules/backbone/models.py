"""Frozen dense feature extractors (synthetic and pretrained ViT adapter)."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from typing import Protocol

import torch
from torch import nn

from locate.core.enums import PatchRoleEnum
from locate.modules.backbone.layout import PlantedLayout
from locate.shared.exceptions import CapabilityException, ConfigException
from locate.shared.utils import derive_seed, tensor_content_hash

logger = logging.getLogger(__name__)

PART_SLOTS = 12
OTHER_SLOTS = 12
ANCHOR_COUNT = 2 + PART_SLOTS + OTHER_SLOTS
ASSIGNMENT_TEMPERATURE = 0.05
PIXEL_JITTER = 0.01
_CODEBOOK_SEED = 20230331


class Backbone(Protocol):
    """Common contract for frozen feature extractors."""

    patch_size: int
    feature_dim: int

    def features(self, images: torch.Tensor) -> torch.Tensor:
        """Map [B, 3, H0, W0] images to [B, D, H, W] features."""

    def saliency(self, images: torch.Tensor) -> torch.Tensor:
        """Map [B, 3, H0, W0] images to [B, H, W] non-negative saliency weights."""


def anchor_index(role: PatchRoleEnum, slot: int = 0) -> int:
    """Codebook row owned by a (role, slot) pair."""
    if role is PatchRoleEnum.BACKGROUND:
        return 0
    if role is PatchRoleEnum.HUMAN:
        return 1
    if role is PatchRoleEnum.OBJECT_PART:
        if not 0 <= slot < PART_SLOTS:
            raise ConfigException(f"object_part slot must be in [0, {PART_SLOTS}), got {slot}")
        return 2 + slot
    if not 0 <= slot < OTHER_SLOTS:
        raise ConfigException(f"object_other slot must be in [0, {OTHER_SLOTS}), got {slot}")
    return 2 + PART_SLOTS + slot


def anchor_colors() -> torch.Tensor:
    """[ANCHOR_COUNT, 3] RGB anchors on the {0.1, 0.5, 0.9} lattice."""
    levels = (0.1, 0.5, 0.9)
    lattice = list(itertools.product(levels, repeat=3))
    # gray is excluded, leaving exactly ANCHOR_COUNT anchors
    lattice.remove((0.5, 0.5, 0.5))
    return torch.tensor(lattice[:ANCHOR_COUNT], dtype=torch.float32)


class SyntheticBackbone(nn.Module):
    """Deterministic color-codebook backbone with planted semantics.

    Each patch is embedded by soft-assigning its center-pixel color to a fixed codebook of
    anchor colors; every anchor owns one orthonormal feature direction and one role.
    Saliency is the soft mass on object roles. All-zero patches embed to zero.
    """

    def __init__(
        self,
        *,
        seed: int = 0,
        layout: PlantedLayout | None = None,
        patch_size: int = 16,
        feature_dim: int = 32,
        noise_scale: float = 0.01,
        mean: Sequence[float] = (0.485, 0.456, 0.406),
        std: Sequence[float] = (0.229, 0.224, 0.225),
    ) -> None:
        super().__init__()
        if feature_dim < ANCHOR_COUNT:
            raise ConfigException(
                f"Synthetic backbone needs feature_dim >= {ANCHOR_COUNT}, got {feature_dim}",
            )
        if patch_size < 1:
            raise ConfigException(f"patch_size must be >= 1, got {patch_size}")
        self.seed = seed
        self.layout = layout
        self.patch_size = patch_size
        self.feature_dim = feature_dim
        self.noise_scale = noise_scale

        generator = torch.Generator().manual_seed(_CODEBOOK_SEED)
        gaussian = torch.randn(feature_dim, ANCHOR_COUNT, generator=generator)
        orthonormal, _ = torch.linalg.qr(gaussian)
        mean_t = torch.tensor(list(mean), dtype=torch.float32).view(1, 3)
        std_t = torch.tensor(list(std), dtype=torch.float32).view(1, 3)
        object_roles = torch.zeros(ANCHOR_COUNT)
        object_roles[2:] = 1.0

        self.register_buffer("anchor_pixels", anchor_colors())
        self.register_buffer("anchor_standardized", (anchor_colors() - mean_t) / std_t)
        self.register_buffer("anchor_vectors", orthonormal.T.contiguous())
        self.register_buffer("object_roles", object_roles)
        self.register_buffer("pixel_mean", mean_t.view(3, 1, 1))
        self.register_buffer("pixel_std", std_t.view(3, 1, 1))
        self.requires_grad_(False)
        self.eval()

    def _patch_colors(self, images: torch.Tensor) -> torch.Tensor:
        center = self.patch_size // 2
        return images.float()[:, :, center :: self.patch_size, center :: self.patch_size]

    def _assignments(self, colors: torch.Tensor) -> torch.Tensor:
        # [B, 3, H, W] -> [B, A, H, W]
        diff = colors.unsqueeze(1) - self.anchor_standardized.view(1, ANCHOR_COUNT, 3, 1, 1)
        distances = diff.pow(2).sum(dim=2)
        return torch.softmax(-distances / ASSIGNMENT_TEMPERATURE, dim=1)

    @staticmethod
    def _signal_mask(colors: torch.Tensor) -> torch.Tensor:
        return colors.abs().sum(dim=1, keepdim=True) > 0

    @torch.no_grad()
    def features(self, images: torch.Tensor) -> torch.Tensor:
        colors = self._patch_colors(images)
        weights = self._assignments(colors)
        signal = torch.einsum("bahw,ad->bdhw", weights, self.anchor_vectors)

        outputs = []
        for index in range(images.shape[0]):
            generator = torch.Generator().manual_seed(
                derive_seed(self.seed, tensor_content_hash(images[index])),
            )
            noise = torch.randn(signal.shape[1:], generator=generator)
            noise = noise / noise.norm(dim=0, keepdim=True).clamp_min(1e-12)
            cell_norm = signal[index].norm(dim=0, keepdim=True)
            outputs.append(signal[index] + self.noise_scale * cell_norm * noise)
        features = torch.stack(outputs)
        return torch.where(self._signal_mask(colors), features, torch.zeros_like(features))

    @torch.no_grad()
    def saliency(self, images: torch.Tensor) -> torch.Tensor:
        colors = self._patch_colors(images)
        weights = self._assignments(colors)
        objectness = torch.einsum("bahw,a->bhw", weights, self.object_roles)
        return objectness * self._signal_mask(colors).squeeze(1).float()

    def render_pixels(
        self,
        image_id: int | str,
        layout: PlantedLayout | None = None,
    ) -> torch.Tensor:
        """Render a planted layout as a [3, H*p, W*p] image in [0, 1]."""
        scene = layout or self.layout
        if scene is None:
            raise ConfigException("No layout given and backbone has no default layout")
        rows, cols = scene.grid
        cells = torch.empty(3, rows, cols)
        for row, line in enumerate(scene.cell_roles()):
            for col, (role, slot) in enumerate(line):
                cells[:, row, col] = self.anchor_pixels[anchor_index(role, slot)]
        pixels = cells.repeat_interleave(self.patch_size, dim=1).repeat_interleave(
            self.patch_size,
            dim=2,
        )
        generator = torch.Generator().manual_seed(derive_seed(self.seed, "render", image_id))
        jitter = PIXEL_JITTER * (2 * torch.rand(pixels.shape, generator=generator) - 1)
        return (pixels + jitter).clamp(0.0, 1.0)

    def render(self, image_id: int | str, layout: PlantedLayout | None = None) -> torch.Tensor:
        """Render a planted layout as a standardized [3, H*p, W*p] image."""
        return (self.render_pixels(image_id, layout) - self.pixel_mean) / self.pixel_std


class VitAdapterBackbone(nn.Module):
    """Frozen self-supervised ViT loaded through torch.hub."""

    def __init__(self, model: nn.Module, *, patch_size: int, feature_dim: int) -> None:
        super().__init__()
        self.model = model
        self.patch_size = patch_size
        self.feature_dim = feature_dim
        self.requires_grad_(False)
        self.eval()

    @classmethod
    def from_hub(cls, repo: str, model_name: str, *, patch_size: int) -> VitAdapterBackbone:
        logger.info("Loading ViT backbone repo=%s model=%s", repo, model_name)
        model = torch.hub.load(repo, model_name)
        feature_dim = int(getattr(model, "embed_dim", 0))
        if feature_dim < 2:
            raise CapabilityException(f"Hub model {model_name} does not expose embed_dim")
        return cls(model, patch_size=patch_size, feature_dim=feature_dim)

    def _grid(self, images: torch.Tensor) -> tuple[int, int]:
        return images.shape[-2] // self.patch_size, images.shape[-1] // self.patch_size

    @torch.no_grad()
    def features(self, images: torch.Tensor) -> torch.Tensor:
        if not hasattr(self.model, "get_intermediate_layers"):
            raise CapabilityException("Backbone model does not expose intermediate layers")
        rows, cols = self._grid(images)
        tokens = self.model.get_intermediate_layers(images, n=1)[0]
        patches = tokens[:, 1:, :]
        return patches.transpose(1, 2).reshape(images.shape[0], -1, rows, cols).contiguous()

    @torch.no_grad()
    def saliency(self, images: torch.Tensor) -> torch.Tensor:
        if not hasattr(self.model, "get_last_selfattention"):
            raise CapabilityException(
                "Backbone model has no attention introspection (get_last_selfattention)",
            )
        rows, cols = self._grid(images)
        attention = self.model.get_last_selfattention(images)
        class_to_patch = attention[:, :, 0, 1:].mean(dim=1)
        return class_to_patch.reshape(images.shape[0], rows, cols)
