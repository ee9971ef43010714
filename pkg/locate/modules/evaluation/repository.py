"""Ground-truth file reading and metric report writing."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from locate.modules.evaluation.schemas import EvaluationReport
from locate.shared.exceptions import DataException

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["image", "affordance", "kld", "sim", "nss"]


def read_points(path: Path) -> list[tuple[float, float]]:
    """Read `x y` pixel points, one per line; blank lines and `#` comments are ignored."""
    points: list[tuple[float, float]] = []
    for line_number, raw_line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise DataException(
                f"{path}:{line_number}: expected 'x y'",
                details={"path": str(path), "line": raw_line},
            )
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise DataException(
                f"{path}:{line_number}: {exc}",
                details={"path": str(path)},
            ) from exc
    return points


def read_heatmap(path: Path) -> np.ndarray:
    try:
        array = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataException(
            f"Cannot read heatmap {path}: {exc}",
            details={"path": str(path)},
        ) from exc
    if array.ndim != 2:
        raise DataException(f"Heatmap {path} must be 2-D, got shape {array.shape}")
    return array.astype(np.float64)


def write_report(report: EvaluationReport, directory: Path) -> dict[str, Path]:
    """Write per-image CSV, aggregate CSV and the full JSON report."""
    directory.mkdir(parents=True, exist_ok=True)
    per_image = pd.DataFrame([row.model_dump() for row in report.rows], columns=REPORT_COLUMNS)
    per_image_path = directory / "per_image.csv"
    per_image.to_csv(per_image_path, index=False, float_format="%.6f")

    aggregate_rows = []
    if report.image_mean is not None:
        aggregate_rows.append({"scope": "image_mean", **report.image_mean.model_dump()})
    if report.affordance_mean is not None:
        aggregate_rows.append({"scope": "affordance_mean", **report.affordance_mean.model_dump()})
    for name, summary in report.affordance_means.items():
        aggregate_rows.append({"scope": f"affordance:{name}", **summary.model_dump()})
    aggregate = pd.DataFrame(aggregate_rows, columns=["scope", "kld", "sim", "nss"])
    aggregate_path = directory / "aggregate.csv"
    aggregate.to_csv(aggregate_path, index=False, float_format="%.6f")

    json_path = directory / "report.json"
    json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    logger.info(
        "Evaluation report written dir=%s evaluated=%s skipped=%s",
        directory,
        report.evaluated_count,
        report.skipped_count,
    )
    return {"per_image": per_image_path, "aggregate": aggregate_path, "json": json_path}
