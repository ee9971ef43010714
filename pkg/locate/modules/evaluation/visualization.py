"""Heatmap overlay rendering."""

from __future__ import annotations

import matplotlib
import torch

OVERLAY_COLORMAP = "viridis"
OVERLAY_ALPHA = 0.5


def render_overlay(image: torch.Tensor, heatmap: torch.Tensor) -> torch.Tensor:
    """Blend a [0, 1] heatmap colored with viridis over a [3, H, W] image in [0, 1]."""
    colormap = matplotlib.colormaps[OVERLAY_COLORMAP]
    colored = colormap(heatmap.detach().clamp(0.0, 1.0).cpu().numpy())[..., :3]
    colored_tensor = torch.from_numpy(colored).permute(2, 0, 1).to(image.dtype)
    return (1.0 - OVERLAY_ALPHA) * image + OVERLAY_ALPHA * colored_tensor
