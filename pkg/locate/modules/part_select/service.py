"""Prototype clustering, similarity maps, PartIoU scoring and gated selection."""

from __future__ import annotations

import logging
import warnings

import numpy as np
import torch
from sklearn.cluster import KMeans

from locate.core.enums import SelectionOutcomeEnum
from locate.modules.backbone.schemas import FeatureMap, SaliencyMask
from locate.modules.part_select.schemas import PrototypeSet, SelectionResult, SimilarityMaps
from locate.modules.regions.schemas import EmbeddingBag
from locate.shared.exceptions import InputException
from locate.shared.utils import binarize_by_mean

logger = logging.getLogger(__name__)

NORM_EPS = 1e-8
_SKLEARN_SEED_MODULUS = 2**32


def _repair_empty_clusters(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Move the farthest member of the largest cluster into each empty cluster."""
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        center = points[members].mean(axis=0)
        distances = np.linalg.norm(points[members] - center, axis=1)
        labels[members[int(np.argmax(distances))]] = int(empty[0])


def cluster_prototypes(
    bag: EmbeddingBag,
    k: int,
    seed: int,
    *,
    max_iter: int = 100,
) -> PrototypeSet | None:
    """Lloyd k-means with k-means++ init; None when the bag holds fewer than k embeddings."""
    if k < 1:
        raise InputException(f"K must be >= 1, got {k}")
    if bag.size < k:
        logger.debug("Clustering skipped L=%s K=%s", bag.size, k)
        return None

    points = bag.embeddings.detach().to(torch.float64).cpu().numpy()
    model = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=1,
        max_iter=max_iter,
        tol=0.0,
        random_state=seed % _SKLEARN_SEED_MODULUS,
        algorithm="lloyd",
    )
    with warnings.catch_warnings():
        # duplicate points legitimately yield fewer distinct clusters than k
        warnings.simplefilter("ignore")
        model.fit(points)

    labels = _repair_empty_clusters(points, model.labels_.astype(np.int64), k)
    centers = np.stack([points[labels == index].mean(axis=0) for index in range(k)])
    counts = np.bincount(labels, minlength=k)
    return PrototypeSet(
        centers=torch.from_numpy(centers),
        member_counts=tuple(int(count) for count in counts),
        kmeans_iters_used=int(model.n_iter_),
        assignments=torch.from_numpy(labels),
    )


def similarity_maps(protos: PrototypeSet, ego_features: FeatureMap) -> SimilarityMaps:
    """Cosine similarity of every center against every cell, binarized per map by its mean."""
    data = ego_features.data.detach()
    if protos.centers.shape[1] != ego_features.feature_dim:
        raise InputException(
            f"Prototype dim {protos.centers.shape[1]} does not match "
            f"feature dim {ego_features.feature_dim}",
        )
    centers = protos.centers.to(torch.float64)
    cells = data.to(torch.float64).flatten(1)
    dots = centers @ cells
    center_norms = centers.norm(dim=1, keepdim=True).clamp_min(NORM_EPS)
    cell_norms = cells.norm(dim=0, keepdim=True).clamp_min(NORM_EPS)
    cosine = (dots / (center_norms * cell_norms)).clamp(-1.0, 1.0)
    cosine = cosine.reshape(-1, *ego_features.patch_grid).to(data.dtype)
    binary = torch.stack([binarize_by_mean(item) for item in cosine])
    return SimilarityMaps(data=cosine, binary=binary)


def part_iou(sim_binary: torch.Tensor, sal_binary: torch.Tensor) -> float:
    """Half the share of the similarity mask inside saliency plus half saliency over union."""
    if tuple(sim_binary.shape) != tuple(sal_binary.shape):
        raise InputException(
            f"Mask shapes differ: {tuple(sim_binary.shape)} vs {tuple(sal_binary.shape)}",
        )
    sim_mask = sim_binary.bool()
    sal_mask = sal_binary.bool()
    sim_size = int(sim_mask.sum())
    union = int((sim_mask | sal_mask).sum())
    if sim_size == 0 or union == 0:
        return 0.0
    intersection = int((sim_mask & sal_mask).sum())
    return 0.5 * intersection / sim_size + 0.5 * int(sal_mask.sum()) / union


def select_object_part(
    protos: PrototypeSet,
    sims: SimilarityMaps,
    saliency: SaliencyMask,
    mu: float,
) -> SelectionResult:
    """Return the highest-PartIoU prototype when its score clears mu; ties go to the lower index."""
    scores = [part_iou(sims.binary[index], saliency.binary) for index in range(protos.k)]
    best_index = 0
    for index, score in enumerate(scores):
        if score > scores[best_index]:
            best_index = index
    score_tensor = torch.tensor(scores, dtype=torch.float64)

    if scores[best_index] > mu:
        return SelectionResult(
            selected=protos.centers[best_index],
            scores=score_tensor,
            chosen_index=best_index,
            outcome=SelectionOutcomeEnum.SELECTED,
            prototypes=protos,
            similarity=sims,
        )
    return SelectionResult(
        selected=None,
        scores=score_tensor,
        chosen_index=None,
        outcome=SelectionOutcomeEnum.GATED,
        prototypes=protos,
        similarity=sims,
    )


def select_part_prototype(
    bag: EmbeddingBag,
    ego_features: FeatureMap,
    saliency: SaliencyMask,
    *,
    k: int,
    mu: float,
    seed: int,
    max_iter: int = 100,
) -> SelectionResult:
    """Cluster, score and gate one exocentric bag against its egocentric image."""
    empty_scores = torch.zeros(0, dtype=torch.float64)
    if bag.is_empty:
        return SelectionResult(None, empty_scores, None, SelectionOutcomeEnum.EMPTY_BAG)

    protos = cluster_prototypes(bag, k, seed, max_iter=max_iter)
    if protos is None:
        return SelectionResult(None, empty_scores, None, SelectionOutcomeEnum.TOO_FEW_EMBEDDINGS)

    sims = similarity_maps(protos, ego_features)
    result = select_object_part(protos, sims, saliency, mu)
    logger.debug(
        "Prototype selection outcome=%s scores=%s chosen=%s",
        result.outcome,
        [round(score, 4) for score in result.scores.tolist()],
        result.chosen_index,
    )
    return result
