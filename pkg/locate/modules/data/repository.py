"""Filesystem access for the affordance dataset tree.

Layout::

    <root>/<setting>/<split>/<view>/<affordance>/<object>/<image>
    <root>/<setting>/test/gt/<affordance>/<object>/<image stem>.txt|.npy
"""

from __future__ import annotations

import logging
from pathlib import Path

import torch
from PIL import Image, UnidentifiedImageError
from torchvision.transforms import functional as TF

from locate.core.enums import SettingEnum, SplitEnum, ViewEnum
from locate.modules.data.schemas import DatasetIndex, SampleRecord
from locate.shared.exceptions import DataException

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = frozenset({".png", ".jpg", ".jpeg", ".bmp"})
GT_SUFFIXES = (".txt", ".npy")
GT_DIRNAME = "gt"


def _subdirs(path: Path) -> list[Path]:
    return sorted(item for item in path.iterdir() if item.is_dir())


def _images(path: Path) -> list[Path]:
    return sorted(
        item for item in path.iterdir() if item.is_file() and item.suffix.lower() in IMAGE_SUFFIXES
    )


def _scan_view(view_dir: Path) -> dict[tuple[str, str], list[Path]]:
    """Map (affordance, object) to sorted image paths under one view directory."""
    groups: dict[tuple[str, str], list[Path]] = {}
    if not view_dir.is_dir():
        return groups
    for affordance_dir in _subdirs(view_dir):
        found = False
        for object_dir in _subdirs(affordance_dir):
            images = _images(object_dir)
            if images:
                groups[(affordance_dir.name, object_dir.name)] = images
                found = True
        if not found:
            raise DataException(
                f"Affordance class '{affordance_dir.name}' has no images under {view_dir}",
                details={"path": str(affordance_dir)},
            )
    return groups


def find_gt_file(setting_dir: Path, affordance: str, object_class: str, image: Path) -> Path | None:
    gt_dir = setting_dir / SplitEnum.TEST / GT_DIRNAME / affordance / object_class
    for suffix in GT_SUFFIXES:
        candidate = gt_dir / f"{image.stem}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def read_vocabulary(root: Path, setting: SettingEnum) -> tuple[str, ...]:
    """Affordance names of the training tree, sorted lexicographically."""
    train_dir = root / setting / SplitEnum.TRAIN
    names: set[str] = set()
    for view in ViewEnum:
        view_dir = train_dir / view
        if view_dir.is_dir():
            names.update(item.name for item in _subdirs(view_dir))
    if not names:
        raise DataException(
            f"No affordance classes found under {train_dir}",
            details={"path": str(train_dir)},
        )
    return tuple(sorted(names))


def index_dataset(root: Path, setting: SettingEnum | str) -> DatasetIndex:
    """Index train and test records of one setting in deterministic lexicographic order."""
    setting = SettingEnum(setting)
    if not root.is_dir():
        raise DataException(f"Dataset root does not exist: {root}", details={"path": str(root)})
    setting_dir = root / setting
    if not setting_dir.is_dir():
        raise DataException(
            f"no records: setting directory missing: {setting_dir}",
            details={"path": str(setting_dir)},
        )

    vocabulary = read_vocabulary(root, setting)
    class_index = {name: index for index, name in enumerate(vocabulary)}
    train_dir = setting_dir / SplitEnum.TRAIN
    test_dir = setting_dir / SplitEnum.TEST
    train_ego = _scan_view(train_dir / ViewEnum.EGOCENTRIC)
    train_exo = _scan_view(train_dir / ViewEnum.EXOCENTRIC)
    test_ego = _scan_view(test_dir / ViewEnum.EGOCENTRIC)

    records: list[SampleRecord] = []
    for (affordance, object_class), images in sorted(train_ego.items()):
        exo_paths = train_exo.get((affordance, object_class))
        if not exo_paths:
            raise DataException(
                f"No exocentric images for group {affordance}/{object_class}",
                details={"affordance": affordance, "object": object_class},
            )
        records.extend(
            SampleRecord(
                ego_path=image,
                exo_paths=tuple(exo_paths),
                affordance=class_index[affordance],
                affordance_name=affordance,
                object_class=object_class,
                split=SplitEnum.TRAIN,
                setting=setting,
            )
            for image in images
        )

    for (affordance, object_class), images in sorted(test_ego.items()):
        if affordance not in class_index:
            raise DataException(
                f"Test affordance '{affordance}' is not in the training vocabulary",
                details={"vocabulary": list(vocabulary)},
            )
        for image in images:
            gt_path = find_gt_file(setting_dir, affordance, object_class, image)
            if gt_path is None:
                logger.warning("Missing ground truth image=%s", image)
            records.append(
                SampleRecord(
                    ego_path=image,
                    exo_paths=(),
                    affordance=class_index[affordance],
                    affordance_name=affordance,
                    object_class=object_class,
                    split=SplitEnum.TEST,
                    setting=setting,
                    gt_path=gt_path,
                ),
            )

    if not records:
        raise DataException(f"no records under {setting_dir}", details={"path": str(setting_dir)})

    if setting is SettingEnum.UNSEEN:
        train_objects = {item.object_class for item in records if item.split is SplitEnum.TRAIN}
        test_objects = {item.object_class for item in records if item.split is SplitEnum.TEST}
        overlap = sorted(train_objects & test_objects)
        if overlap:
            raise DataException(
                "Unseen setting requires disjoint train/test object classes",
                details={"overlap": overlap},
            )

    logger.info(
        "Dataset indexed root=%s setting=%s records=%s vocabulary=%s",
        root,
        setting,
        len(records),
        len(vocabulary),
    )
    return DatasetIndex(vocabulary=vocabulary, records=tuple(records))


def load_image(path: Path) -> torch.Tensor:
    """Decode an image file into a float [3, H, W] tensor in [0, 1]."""
    try:
        with Image.open(path) as handle:
            image = handle.convert("RGB")
    except (OSError, UnidentifiedImageError) as exc:
        raise DataException(
            f"Cannot decode image {path}: {exc}",
            details={"path": str(path)},
        ) from exc
    return TF.pil_to_tensor(image).float() / 255.0


def save_image(pixels: torch.Tensor, path: Path) -> None:
    """Write a [3, H, W] tensor in [0, 1] as an 8-bit image."""
    path.parent.mkdir(parents=True, exist_ok=True)
    image = TF.to_pil_image((pixels.clamp(0.0, 1.0) * 255.0).round().to(torch.uint8))
    image.save(path)
