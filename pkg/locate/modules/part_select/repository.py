"""Selector debug dumps on disk."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from locate.modules.backbone.schemas import SaliencyMask
from locate.modules.part_select.schemas import SelectionDumpSummary, SelectionResult, SimilarityMaps

logger = logging.getLogger(__name__)


def write_selection_dump(
    directory: Path,
    result: SelectionResult,
    saliency: SaliencyMask,
    *,
    mu: float,
    exo_similarity: Sequence[SimilarityMaps] = (),
) -> Path:
    """Write similarity maps, PartIoU scores, chosen index and saliency as raw arrays."""
    directory.mkdir(parents=True, exist_ok=True)
    grid = (int(saliency.weights.shape[0]), int(saliency.weights.shape[1]))

    np.save(directory / "saliency_weights.npy", saliency.weights.cpu().numpy())
    np.save(directory / "saliency_binary.npy", saliency.binary.cpu().numpy())
    np.save(directory / "scores.npy", result.scores.cpu().numpy())
    sims = result.similarity
    if sims is not None:
        for index in range(sims.data.shape[0]):
            np.save(directory / f"similarity_{index}.npy", sims.data[index].cpu().numpy())
            np.save(directory / f"similarity_{index}_binary.npy", sims.binary[index].cpu().numpy())
    for image_index, exo_sims in enumerate(exo_similarity):
        np.save(directory / f"exo_{image_index}_similarity.npy", exo_sims.data.cpu().numpy())

    protos = result.prototypes
    summary = SelectionDumpSummary(
        outcome=result.outcome,
        mu=mu,
        scores=[float(score) for score in result.scores.tolist()],
        chosen_index=result.chosen_index,
        member_counts=list(protos.member_counts) if protos is not None else [],
        kmeans_iters_used=protos.kmeans_iters_used if protos is not None else None,
        grid=grid,
    )
    summary_path = directory / "selection.json"
    summary_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    logger.info("Selector dump written path=%s outcome=%s", directory, result.outcome)
    return summary_path
