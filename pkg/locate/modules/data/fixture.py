"""Tiny synthetic on-disk dataset for CI and smoke runs.

Egocentric scenes show an object body (color slot per object) with an attached part
(color slot per affordance); exocentric scenes show the same part held by a human.
Test ground truth is a point file sampled inside the part rectangle.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import torch

from locate.core.enums import PatchRoleEnum, SettingEnum, SplitEnum, ViewEnum
from locate.modules.backbone.layout import PlantedLayout, PlantedRegion
from locate.modules.backbone.models import SyntheticBackbone
from locate.modules.data.repository import GT_DIRNAME, save_image
from locate.shared.exceptions import ConfigException
from locate.shared.utils import derive_seed

logger = logging.getLogger(__name__)

FIXTURE_MANIFEST = "fixture.json"
STORED_GRID = 16
PATCH_SIZE = 16
PART_SIZE = 3
BODY_SIZE = 5
GT_POINTS = 8

DEFAULT_AFFORDANCES = ("cut", "hold")
SEEN_OBJECTS = ("cup", "knife")
UNSEEN_OBJECTS = ("bowl", "scissors")


@dataclass(frozen=True, slots=True)
class FixtureSpec:
    seed: int = 0
    affordances: tuple[str, ...] = DEFAULT_AFFORDANCES
    seen_objects: tuple[str, ...] = SEEN_OBJECTS
    unseen_objects: tuple[str, ...] = UNSEEN_OBJECTS
    ego_per_group: int = 3
    exo_per_group: int = 4
    test_per_group: int = 2


def _randint(generator: torch.Generator, low: int, high: int) -> int:
    """Uniform integer in [low, high]."""
    return int(torch.randint(low, high + 1, (1,), generator=generator))


def ego_layout(generator: torch.Generator, part_slot: int, object_slot: int) -> PlantedLayout:
    """Object body with the part attached on its right."""
    row = _randint(generator, 2, STORED_GRID - BODY_SIZE - 2)
    col = _randint(generator, 2, STORED_GRID - BODY_SIZE - PART_SIZE - 2)
    body = PlantedRegion(
        PatchRoleEnum.OBJECT_OTHER, row, col, row + BODY_SIZE, col + BODY_SIZE, object_slot
    )
    part = PlantedRegion(
        PatchRoleEnum.OBJECT_PART,
        row + 1,
        col + BODY_SIZE,
        row + 1 + PART_SIZE,
        col + BODY_SIZE + PART_SIZE,
        part_slot,
    )
    return PlantedLayout(grid=(STORED_GRID, STORED_GRID), regions=(body, part))


def exo_layout(generator: torch.Generator, part_slot: int) -> PlantedLayout:
    """Part with a human standing on its left."""
    row = _randint(generator, 3, STORED_GRID - PART_SIZE - 5)
    col = _randint(generator, 5, STORED_GRID - PART_SIZE - 2)
    part = PlantedRegion(
        PatchRoleEnum.OBJECT_PART, row, col, row + PART_SIZE, col + PART_SIZE, part_slot
    )
    human = PlantedRegion(PatchRoleEnum.HUMAN, row - 1, col - 3, row + PART_SIZE + 2, col)
    return PlantedLayout(grid=(STORED_GRID, STORED_GRID), regions=(part, human))


def part_box(layout: PlantedLayout) -> tuple[int, int, int, int]:
    """Pixel box (x0, y0, x1, y1), half-open, of the planted part."""
    for region in layout.regions:
        if region.role is PatchRoleEnum.OBJECT_PART:
            return (
                region.col0 * PATCH_SIZE,
                region.row0 * PATCH_SIZE,
                region.col1 * PATCH_SIZE,
                region.row1 * PATCH_SIZE,
            )
    raise ConfigException("Layout has no object part")


def _scene_generator(seed: int, setting: SettingEnum, relative: Path) -> torch.Generator:
    return torch.Generator().manual_seed(derive_seed(seed, setting, relative.as_posix()))


def _sample_points(
    generator: torch.Generator,
    box: tuple[int, int, int, int],
    count: int,
) -> list[tuple[int, int]]:
    x0, y0, x1, y1 = box
    return [
        (_randint(generator, x0, x1 - 1), _randint(generator, y0, y1 - 1)) for _ in range(count)
    ]


def _write_setting(
    root: Path,
    setting: SettingEnum,
    spec: FixtureSpec,
    renderer: SyntheticBackbone,
    test_objects: Sequence[str],
) -> dict[str, list[int]]:
    boxes: dict[str, list[int]] = {}
    setting_dir = root / setting
    names = dict.fromkeys((*spec.seen_objects, *test_objects))
    object_slots = {name: index for index, name in enumerate(names)}

    def render(relative: Path, layout: PlantedLayout) -> None:
        save_image(renderer.render_pixels(str(relative), layout), setting_dir / relative)

    for part_slot, affordance in enumerate(spec.affordances):
        for object_class in spec.seen_objects:
            slot = object_slots[object_class]
            for index in range(spec.ego_per_group):
                relative = Path(SplitEnum.TRAIN, ViewEnum.EGOCENTRIC, affordance, object_class)
                relative = relative / f"{object_class}_{index:03d}.png"
                generator = _scene_generator(spec.seed, setting, relative)
                render(relative, ego_layout(generator, part_slot, slot))
            for index in range(spec.exo_per_group):
                relative = Path(SplitEnum.TRAIN, ViewEnum.EXOCENTRIC, affordance, object_class)
                relative = relative / f"{affordance}_{object_class}_{index:03d}.png"
                generator = _scene_generator(spec.seed, setting, relative)
                render(relative, exo_layout(generator, part_slot))

        for object_class in test_objects:
            slot = object_slots[object_class]
            for index in range(spec.test_per_group):
                relative = Path(SplitEnum.TEST, ViewEnum.EGOCENTRIC, affordance, object_class)
                relative = relative / f"{object_class}_{index:03d}.png"
                generator = _scene_generator(spec.seed, setting, relative)
                layout = ego_layout(generator, part_slot, slot)
                render(relative, layout)
                box = part_box(layout)
                gt_file = setting_dir / SplitEnum.TEST / GT_DIRNAME / affordance / object_class
                gt_file = gt_file / f"{relative.stem}.txt"
                gt_file.parent.mkdir(parents=True, exist_ok=True)
                points = _sample_points(generator, box, GT_POINTS)
                gt_file.write_text("".join(f"{x} {y}\n" for x, y in points), encoding="utf-8")
                boxes[f"{setting}/{relative.as_posix()}"] = list(box)
    return boxes


def generate_fixture(root: Path, spec: FixtureSpec | None = None) -> Path:
    """Write seen and unseen fixture trees under `root`; returns the manifest path."""
    spec = spec or FixtureSpec()
    object_count = len(spec.seen_objects) + len(spec.unseen_objects)
    if len(spec.affordances) > 12 or object_count > 12:
        raise ConfigException("Fixture supports at most 12 affordances and 12 object classes")
    renderer = SyntheticBackbone(seed=spec.seed, patch_size=PATCH_SIZE)

    root.mkdir(parents=True, exist_ok=True)
    boxes = _write_setting(root, SettingEnum.SEEN, spec, renderer, spec.seen_objects)
    boxes |= _write_setting(root, SettingEnum.UNSEEN, spec, renderer, spec.unseen_objects)

    manifest = {
        "seed": spec.seed,
        "image_size": STORED_GRID * PATCH_SIZE,
        "patch_size": PATCH_SIZE,
        "affordances": list(spec.affordances),
        "part_boxes": boxes,
    }
    manifest_path = root / FIXTURE_MANIFEST
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info("Fixture written root=%s test_images=%s", root, len(boxes))
    return manifest_path


def read_part_boxes(root: Path) -> dict[str, tuple[int, int, int, int]]:
    """Part boxes keyed by image path relative to the fixture root."""
    manifest = json.loads((root / FIXTURE_MANIFEST).read_text(encoding="utf-8"))
    return {key: tuple(value) for key, value in manifest["part_boxes"].items()}
