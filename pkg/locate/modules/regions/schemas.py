"""Interaction-region embedding contracts."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True, slots=True)
class EmbeddingBag:
    """Concatenated embeddings harvested from N exocentric images."""

    embeddings: torch.Tensor
    per_image_counts: tuple[int, ...]
    source_coords: tuple[tuple[int, int, int], ...]

    @property
    def size(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.size == 0
