"""Shared utility functions."""

from __future__ import annotations

import hashlib
import zlib

import torch


BINARIZE_TOLERANCE = 1e-6


def binarize_by_mean(values: torch.Tensor, tolerance: float = BINARIZE_TOLERANCE) -> torch.Tensor:
    """Return boolean mask of entries strictly above the map mean.

    Maps whose spread is within `tolerance` of their magnitude count as constant and give an
    all-false mask.
    """
    wide = values.detach().to(torch.float64)
    if wide.numel() == 0:
        return torch.zeros_like(values, dtype=torch.bool)
    low, high = wide.amin(), wide.amax()
    spread = float(high - low)
    scale = max(abs(float(low)), abs(float(high)), 1.0)
    if spread <= tolerance * scale:
        return torch.zeros_like(values, dtype=torch.bool)
    return wide > wide.mean() + tolerance * spread


def derive_seed(*parts: int | str) -> int:
    """Derive a stable 63-bit seed from an ordered tuple of ints/strings."""
    payload = "/".join(str(part) for part in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big") & (2**63 - 1)


def tensor_content_hash(tensor: torch.Tensor) -> int:
    """CRC32 of the raw tensor bytes."""
    array = tensor.detach().to("cpu").contiguous().numpy()
    return zlib.crc32(array.tobytes())
