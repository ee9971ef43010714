"""Exocentric sampling and seeded batch assembly."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Dataset

from locate.core.config import Settings
from locate.core.enums import SplitEnum
from locate.modules.data.repository import load_image
from locate.modules.data.schemas import Batch, SampleRecord
from locate.modules.data.transforms import augment_train
from locate.shared.exceptions import DataException, InputException
from locate.shared.utils import derive_seed

logger = logging.getLogger(__name__)

ExocentricPool = Mapping[tuple[int, str], tuple[Path, ...]]


def build_exocentric_pool(
    records: Sequence[SampleRecord],
) -> dict[tuple[int, str], tuple[Path, ...]]:
    """Exocentric paths per (affordance, object) group of the training records."""
    pool: dict[tuple[int, str], tuple[Path, ...]] = {}
    for record in records:
        if record.split is SplitEnum.TRAIN and record.exo_paths:
            pool.setdefault(record.group, record.exo_paths)
    return pool


def sample_exocentric(
    pool: ExocentricPool,
    affordance: int,
    object_class: str,
    n: int,
    seed: int,
) -> list[Path]:
    """N paths of one group; without replacement when the pool allows, topped up otherwise."""
    if n < 1:
        raise InputException(f"N must be >= 1, got {n}")
    candidates = pool.get((affordance, object_class), ())
    if not candidates:
        raise DataException(
            f"Empty exocentric pool for group {affordance}/{object_class}",
            details={"affordance": affordance, "object": object_class},
        )
    generator = torch.Generator().manual_seed(seed)
    order = torch.randperm(len(candidates), generator=generator).tolist()
    if len(candidates) < n:
        extra = torch.randint(0, len(candidates), (n - len(candidates),), generator=generator)
        order.extend(extra.tolist())
    return [candidates[index] for index in order[:n]]


class PairedSampleDataset(Dataset):
    """One egocentric image with N sampled exocentric images per item.

    Every item draws from its own generator seeded by (seed, epoch, position), so the
    worker count never changes batch content.
    """

    def __init__(
        self,
        records: Sequence[SampleRecord],
        settings: Settings,
        epoch: int,
        pool: ExocentricPool | None = None,
    ) -> None:
        self.records = list(records)
        self.settings = settings
        self.epoch = epoch
        self.pool = pool if pool is not None else build_exocentric_pool(self.records)
        seed = settings.train.seed
        order_generator = torch.Generator().manual_seed(derive_seed(seed, epoch, "order"))
        self.order = torch.randperm(len(self.records), generator=order_generator).tolist()

    def __len__(self) -> int:
        return len(self.records)

    def _augment(self, path: Path, generator: torch.Generator) -> torch.Tensor:
        data = self.settings.data
        return augment_train(
            load_image(path),
            generator,
            resize_size=data.resize_size,
            crop_size=data.image_size,
            mean=data.mean,
            std=data.std,
        )

    def __getitem__(self, position: int) -> dict | None:
        record = self.records[self.order[position]]
        item_seed = derive_seed(self.settings.train.seed, self.epoch, position)
        exo_paths = sample_exocentric(
            self.pool,
            record.affordance,
            record.object_class,
            self.settings.train.N,
            item_seed,
        )
        generator = torch.Generator().manual_seed(item_seed)
        try:
            ego = self._augment(record.ego_path, generator)
            exo = torch.stack([self._augment(path, generator) for path in exo_paths])
        except DataException as exc:
            logger.warning("Sample skipped ego=%s reason=%s", record.ego_path, exc.message)
            return None
        return {
            "ego": ego,
            "exo": exo,
            "label": record.affordance,
            "object_class": record.object_class,
            "ego_path": record.ego_path,
        }


def collate_samples(items: Sequence[dict | None]) -> Batch | None:
    kept = [item for item in items if item is not None]
    if not kept:
        return None
    return Batch(
        ego_images=torch.stack([item["ego"] for item in kept]),
        exo_images=torch.stack([item["exo"] for item in kept]),
        labels=torch.tensor([item["label"] for item in kept], dtype=torch.long),
        object_classes=tuple(item["object_class"] for item in kept),
        ego_paths=tuple(item["ego_path"] for item in kept),
    )


def build_train_loader(
    records: Sequence[SampleRecord],
    settings: Settings,
    epoch: int,
    pool: ExocentricPool | None = None,
) -> DataLoader:
    """Loader over training records in the seeded order of one epoch."""
    train_records = [record for record in records if record.split is SplitEnum.TRAIN]
    if not train_records:
        raise DataException("no records in the train split")
    dataset = PairedSampleDataset(train_records, settings, epoch, pool)
    return DataLoader(
        dataset,
        batch_size=settings.train.batch_size,
        shuffle=False,
        num_workers=settings.train.num_workers,
        collate_fn=collate_samples,
    )
