"""KLD, SIM and NSS between predicted heatmaps and ground truth."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pandas as pd
import torch
from scipy.ndimage import gaussian_filter

from locate.modules.evaluation.schemas import (
    EvaluationReport,
    GroundTruthHeatmap,
    ImageMetricRow,
    MetricSummary,
    MetricTriple,
    SkippedRecord,
)
from locate.shared.exceptions import InputException

METRIC_EPS = 1e-12
FIXATION_LEVEL = 0.1

ArrayLike = np.ndarray | torch.Tensor


def _as_array(values: ArrayLike) -> np.ndarray:
    if isinstance(values, torch.Tensor):
        values = values.detach().cpu().numpy()
    return np.asarray(values, dtype=np.float64)


def _as_distribution(values: ArrayLike, name: str) -> np.ndarray:
    array = _as_array(values)
    if np.any(array < 0):
        raise InputException(f"{name} map must be non-negative")
    total = array.sum()
    if not total > 0:
        raise InputException(f"{name} map has no positive entry")
    return array / (total + METRIC_EPS)


def _check_shapes(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise InputException(f"Prediction shape {pred.shape} differs from GT shape {gt.shape}")


def kld(pred: ArrayLike, gt_density: ArrayLike) -> float:
    """KL divergence of the sum-normalized prediction from the sum-normalized GT."""
    pred_dist = _as_distribution(pred, "Prediction")
    gt_dist = _as_distribution(gt_density, "Ground-truth")
    _check_shapes(pred_dist, gt_dist)
    return float(np.sum(gt_dist * np.log(gt_dist / (pred_dist + METRIC_EPS) + METRIC_EPS)))


def sim(pred: ArrayLike, gt_density: ArrayLike) -> float:
    """Histogram intersection of the two sum-normalized maps."""
    pred_dist = _as_distribution(pred, "Prediction")
    gt_dist = _as_distribution(gt_density, "Ground-truth")
    _check_shapes(pred_dist, gt_dist)
    return float(np.minimum(pred_dist, gt_dist).sum())


def nss(pred: ArrayLike, fixation_points: Sequence[tuple[int, int]]) -> float:
    """Mean z-scored prediction at the (x, y) fixation pixels."""
    if len(fixation_points) == 0:
        raise InputException("NSS needs at least one fixation point")
    array = _as_array(pred)
    height, width = array.shape
    for x, y in fixation_points:
        if not (0 <= x < width and 0 <= y < height):
            raise InputException(f"Fixation ({x}, {y}) outside {width}x{height} prediction")
    scored = (array - array.mean()) / (array.std() + METRIC_EPS)
    xs = np.array([int(x) for x, _ in fixation_points])
    ys = np.array([int(y) for _, y in fixation_points])
    return float(scored[ys, xs].mean())


def build_gt_heatmap(
    points: Sequence[tuple[float, float]],
    size: tuple[int, int],
    sigma: float,
) -> GroundTruthHeatmap:
    """Gaussian-blurred fixation density from (x, y) pixel points."""
    if len(points) == 0:
        raise InputException("Ground truth needs at least one point")
    if sigma <= 0:
        raise InputException(f"sigma must be positive, got {sigma}")
    height, width = size
    impulses = np.zeros((height, width), dtype=np.float64)
    fixations: list[tuple[int, int]] = []
    for x, y in points:
        col, row = int(round(x)), int(round(y))
        if not (0 <= col < width and 0 <= row < height):
            raise InputException(f"Point ({x}, {y}) outside {width}x{height} image")
        impulses[row, col] += 1.0
        fixations.append((col, row))

    density = gaussian_filter(impulses, sigma=sigma, mode="constant")
    density = density / density.sum()
    return GroundTruthHeatmap(density=density, fixation_points=tuple(fixations))


def heatmap_from_density(density: ArrayLike) -> GroundTruthHeatmap:
    """Use a pre-rendered heatmap verbatim; fixations are cells above 0.1 after min-max scaling."""
    array = _as_array(density)
    if np.any(array < 0) or not array.sum() > 0:
        raise InputException("Pre-rendered heatmap must be non-negative with positive mass")
    scaled = (array - array.min()) / (array.max() - array.min() + METRIC_EPS)
    rows, cols = np.nonzero(scaled > FIXATION_LEVEL)
    if rows.size == 0:
        rows, cols = np.nonzero(array == array.max())
    fixations = tuple((int(col), int(row)) for row, col in zip(rows, cols, strict=True))
    return GroundTruthHeatmap(density=array / array.sum(), fixation_points=fixations)


def score_prediction(pred: ArrayLike, gt: GroundTruthHeatmap) -> MetricTriple:
    return MetricTriple(
        kld=kld(pred, gt.density),
        sim=sim(pred, gt.density),
        nss=nss(pred, gt.fixation_points),
    )


def _summary(frame: pd.DataFrame) -> MetricSummary:
    return MetricSummary(
        kld=float(frame["kld"].mean()),
        sim=float(frame["sim"].mean()),
        nss=float(frame["nss"].mean()),
    )


def summarize(
    setting: str,
    rows: Sequence[ImageMetricRow],
    skipped: Sequence[SkippedRecord] = (),
) -> EvaluationReport:
    """Aggregate per-image rows into per-image and per-affordance-then-overall means."""
    report = EvaluationReport(setting=setting, rows=list(rows), skipped=list(skipped))
    if not rows:
        return report
    frame = pd.DataFrame([row.model_dump() for row in rows])
    per_affordance = {
        str(name): _summary(group) for name, group in frame.groupby("affordance", sort=True)
    }
    means = pd.DataFrame([summary.model_dump() for summary in per_affordance.values()])
    report.image_mean = _summary(frame)
    report.affordance_means = per_affordance
    report.affordance_mean = _summary(means)
    return report
