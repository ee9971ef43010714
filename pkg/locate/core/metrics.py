"""Prometheus metrics helpers for training and evaluation observability."""

from __future__ import annotations

from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile


class PipelineMetrics:
    """Per-run metric family bundle on an isolated registry."""

    def __init__(self, registry: CollectorRegistry | None = None) -> None:
        self.registry = registry or CollectorRegistry()
        self.train_steps_total = Counter(
            "locate_train_steps_total",
            "Total number of optimizer steps applied.",
            registry=self.registry,
        )
        self.prototype_selection_total = Counter(
            "locate_prototype_selection_total",
            "Object-part prototype selection outcomes per batch row.",
            ["outcome"],
            registry=self.registry,
        )
        self.train_step_duration_seconds = Histogram(
            "locate_train_step_duration_seconds",
            "Wall time of one training step in seconds.",
            buckets=(0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0),
            registry=self.registry,
        )
        self.eval_images_total = Counter(
            "locate_eval_images_total",
            "Evaluated test images by status.",
            ["status"],
            registry=self.registry,
        )

    def sample_value(self, name: str, labels: dict[str, str] | None = None) -> float:
        """Return current sample value, 0.0 when the series was never touched."""
        value = self.registry.get_sample_value(name, labels or {})
        return float(value) if value is not None else 0.0

    def write_textfile(self, path: Path) -> None:
        """Persist metrics in Prometheus text format."""
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
