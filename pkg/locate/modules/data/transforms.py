"""Train, eval and predict image transforms."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import torch
from torchvision.transforms import InterpolationMode
from torchvision.transforms import functional as TF

from locate.shared.exceptions import InputException


def _resize(image: torch.Tensor, size: int) -> torch.Tensor:
    return TF.resize(image, [size, size], interpolation=InterpolationMode.BILINEAR, antialias=True)


def _check_image(image: torch.Tensor) -> None:
    if image.ndim != 3 or image.shape[0] != 3:
        raise InputException(f"Expected RGB tensor [3, H, W], got {tuple(image.shape)}")


def center_crop_offset(resize_size: int, crop_size: int) -> int:
    return int(round((resize_size - crop_size) / 2.0))


def augment_train(
    image: torch.Tensor,
    generator: torch.Generator,
    *,
    resize_size: int = 256,
    crop_size: int = 224,
    mean: Sequence[float] = (0.485, 0.456, 0.406),
    std: Sequence[float] = (0.229, 0.224, 0.225),
    flip: bool | None = None,
) -> torch.Tensor:
    """Resize, random crop, horizontal flip with p=0.5, then standardize.

    The flip draw is consumed even when `flip` forces the outcome.
    """
    _check_image(image)
    resized = _resize(image, resize_size)
    span = resize_size - crop_size
    top = int(torch.randint(0, span + 1, (1,), generator=generator))
    left = int(torch.randint(0, span + 1, (1,), generator=generator))
    flip_draw = bool(torch.rand(1, generator=generator) < 0.5)
    cropped = TF.crop(resized, top, left, crop_size, crop_size)
    do_flip = flip_draw if flip is None else flip
    if do_flip:
        cropped = TF.hflip(cropped)
    return TF.normalize(cropped, list(mean), list(std))


def eval_transform(
    image: torch.Tensor,
    *,
    resize_size: int = 256,
    crop_size: int = 224,
    mean: Sequence[float] = (0.485, 0.456, 0.406),
    std: Sequence[float] = (0.229, 0.224, 0.225),
) -> torch.Tensor:
    """Resize then center crop, no randomness."""
    _check_image(image)
    cropped = TF.center_crop(_resize(image, resize_size), [crop_size, crop_size])
    return TF.normalize(cropped, list(mean), list(std))


def predict_transform(
    image: torch.Tensor,
    *,
    size: int = 224,
    mean: Sequence[float] = (0.485, 0.456, 0.406),
    std: Sequence[float] = (0.229, 0.224, 0.225),
) -> torch.Tensor:
    """Resize the full image to the network input without cropping."""
    _check_image(image)
    return TF.normalize(_resize(image, size), list(mean), list(std))


def map_points_eval(
    points: Sequence[tuple[float, float]],
    source_size: tuple[int, int],
    *,
    resize_size: int = 256,
    crop_size: int = 224,
) -> list[tuple[float, float]]:
    """Carry (x, y) points through the eval resize and center crop, dropping those cut off."""
    height, width = source_size
    offset = center_crop_offset(resize_size, crop_size)
    mapped: list[tuple[float, float]] = []
    for x, y in points:
        new_x = x * resize_size / width - offset
        new_y = y * resize_size / height - offset
        if 0 <= round(new_x) < crop_size and 0 <= round(new_y) < crop_size:
            mapped.append((new_x, new_y))
    return mapped


def map_heatmap_eval(
    heatmap: np.ndarray,
    *,
    resize_size: int = 256,
    crop_size: int = 224,
) -> np.ndarray:
    """Carry a 2-D heatmap through the eval resize and center crop."""
    tensor = torch.from_numpy(np.ascontiguousarray(heatmap, dtype=np.float32))[None]
    cropped = TF.center_crop(_resize(tensor, resize_size), [crop_size, crop_size])
    return cropped[0].clamp_min(0.0).numpy().astype(np.float64)
