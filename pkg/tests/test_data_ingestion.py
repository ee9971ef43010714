from __future__ import annotations

import logging
from pathlib import Path

import pytest
import torch
from torchvision.transforms import functional as TF

from locate.core.enums import SettingEnum, SplitEnum
from locate.modules.data.fixture import (
    FixtureSpec,
    generate_fixture,
    read_part_boxes,
)
from locate.modules.data.repository import index_dataset, load_image, save_image
from locate.modules.data.schemas import DatasetIndex
from locate.modules.data.service import (
    PairedSampleDataset,
    build_exocentric_pool,
    build_train_loader,
    collate_samples,
    sample_exocentric,
)
from locate.modules.data.transforms import (
    augment_train,
    eval_transform,
    map_heatmap_eval,
    map_points_eval,
    predict_transform,
)
from locate.modules.evaluation.repository import read_points
from locate.shared.exceptions import DataException, InputException
from tests.synthetic_scenes import fixture_settings


@pytest.fixture(scope="module")
def fixture_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("fixture")
    generate_fixture(root, FixtureSpec(seed=0))
    return root


@pytest.fixture(scope="module")
def seen_index(fixture_root: Path) -> DatasetIndex:
    return index_dataset(fixture_root, SettingEnum.SEEN)


def _touch_image(path: Path, size: int = 32) -> None:
    save_image(torch.full((3, size, size), 0.5), path)


def _minimal_tree(root: Path, *, test_objects: tuple[str, ...] = ("knife",)) -> None:
    for view in ("egocentric", "exocentric"):
        _touch_image(root / "unseen" / "train" / view / "cut" / "cup" / f"{view}_0.png")
    for object_class in test_objects:
        _touch_image(root / "unseen" / "test" / "egocentric" / "cut" / object_class / "t_0.png")
        gt = root / "unseen" / "test" / "gt" / "cut" / object_class / "t_0.txt"
        gt.parent.mkdir(parents=True, exist_ok=True)
        gt.write_text("4 4\n", encoding="utf-8")


def test_seen_fixture_indexes_four_groups(seen_index: DatasetIndex) -> None:
    groups = {record.group for record in seen_index.train}

    assert seen_index.vocabulary == ("cut", "hold")
    assert groups == {(0, "cup"), (0, "knife"), (1, "cup"), (1, "knife")}
    assert len(seen_index.train) == 12
    assert len(seen_index.test) == 8
    assert all(record.gt_path is not None for record in seen_index.test)


def test_records_are_in_lexicographic_order(seen_index: DatasetIndex) -> None:
    train_paths = [record.ego_path for record in seen_index.train]

    assert train_paths == sorted(train_paths)
    assert seen_index.records[: len(seen_index.train)] == tuple(seen_index.train)


def test_every_train_record_pairs_with_its_own_group(seen_index: DatasetIndex) -> None:
    for record in seen_index.train:
        assert len(record.exo_paths) == 4
        for path in record.exo_paths:
            assert path.parent.name == record.object_class
            assert path.parent.parent.name == record.affordance_name


def test_unseen_fixture_keeps_object_classes_disjoint(fixture_root: Path) -> None:
    index = index_dataset(fixture_root, "unseen")
    train_objects = {record.object_class for record in index.train}
    test_objects = {record.object_class for record in index.test}

    assert train_objects == {"cup", "knife"}
    assert test_objects == {"bowl", "scissors"}


def test_unseen_overlap_is_rejected(tmp_path: Path) -> None:
    _minimal_tree(tmp_path, test_objects=("cup", "knife"))

    with pytest.raises(DataException) as exc_info:
        index_dataset(tmp_path, SettingEnum.UNSEEN)
    assert exc_info.value.details == {"overlap": ["cup"]}


def test_disjoint_unseen_tree_is_accepted(tmp_path: Path) -> None:
    _minimal_tree(tmp_path)

    index = index_dataset(tmp_path, SettingEnum.UNSEEN)
    assert [record.split for record in index.records] == [SplitEnum.TRAIN, SplitEnum.TEST]


def test_empty_root_has_no_records(tmp_path: Path) -> None:
    with pytest.raises(DataException, match="no records"):
        index_dataset(tmp_path, SettingEnum.SEEN)


def test_missing_root_is_reported(tmp_path: Path) -> None:
    with pytest.raises(DataException, match="does not exist"):
        index_dataset(tmp_path / "absent", SettingEnum.SEEN)


def test_empty_affordance_class_is_reported(tmp_path: Path) -> None:
    _minimal_tree(tmp_path)
    (tmp_path / "unseen" / "train" / "egocentric" / "hold" / "cup").mkdir(parents=True)

    with pytest.raises(DataException, match="'hold' has no images"):
        index_dataset(tmp_path, SettingEnum.UNSEEN)


def test_group_without_exocentric_images_is_reported(tmp_path: Path) -> None:
    _minimal_tree(tmp_path)
    _touch_image(tmp_path / "unseen" / "train" / "egocentric" / "cut" / "pan" / "e.png")

    with pytest.raises(DataException, match="No exocentric images"):
        index_dataset(tmp_path, SettingEnum.UNSEEN)


def test_unknown_test_affordance_is_reported(tmp_path: Path) -> None:
    _minimal_tree(tmp_path)
    _touch_image(tmp_path / "unseen" / "test" / "egocentric" / "pour" / "jug" / "t.png")

    with pytest.raises(DataException, match="not in the training vocabulary"):
        index_dataset(tmp_path, SettingEnum.UNSEEN)


def test_missing_ground_truth_is_logged(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    _minimal_tree(tmp_path)
    _touch_image(tmp_path / "unseen" / "test" / "egocentric" / "cut" / "knife" / "t_1.png")

    with caplog.at_level(logging.WARNING):
        index = index_dataset(tmp_path, SettingEnum.UNSEEN)

    missing = [record for record in index.test if record.gt_path is None]
    assert [record.ego_path.name for record in missing] == ["t_1.png"]
    assert "Missing ground truth" in caplog.text


def _pool(size: int) -> dict[tuple[int, str], tuple[Path, ...]]:
    return {(0, "cup"): tuple(Path(f"exo_{index}.png") for index in range(size))}


def test_large_pool_samples_without_replacement() -> None:
    paths = sample_exocentric(_pool(5), 0, "cup", 3, seed=9)

    assert len(paths) == 3
    assert len(set(paths)) == 3


def test_small_pool_tops_up_with_repeats() -> None:
    paths = sample_exocentric(_pool(2), 0, "cup", 3, seed=9)

    assert len(paths) == 3
    assert set(paths) == {Path("exo_0.png"), Path("exo_1.png")}


def test_sampling_is_seeded() -> None:
    first = sample_exocentric(_pool(8), 0, "cup", 3, seed=4)

    assert sample_exocentric(_pool(8), 0, "cup", 3, seed=4) == first


def test_sampling_rejects_empty_pool_and_bad_n() -> None:
    with pytest.raises(DataException):
        sample_exocentric(_pool(3), 1, "cup", 3, seed=0)
    with pytest.raises(InputException):
        sample_exocentric(_pool(3), 0, "cup", 0, seed=0)


def test_pool_draws_share_the_ego_group(seen_index: DatasetIndex) -> None:
    pool = build_exocentric_pool(seen_index.records)
    for position, record in enumerate(seen_index.train):
        for path in sample_exocentric(pool, record.affordance, record.object_class, 3, position):
            assert path.parent.parent.name == record.affordance_name
            assert path.parent.name == record.object_class


def test_train_augmentation_shape_and_flip_involution() -> None:
    image = torch.rand(3, 300, 280, generator=torch.Generator().manual_seed(0))

    flipped = augment_train(image, torch.Generator().manual_seed(5), flip=True)
    plain = augment_train(image, torch.Generator().manual_seed(5), flip=False)

    assert flipped.shape == (3, 224, 224)
    assert torch.allclose(TF.hflip(flipped), plain)


def test_eval_and_predict_transforms_are_deterministic() -> None:
    image = torch.rand(3, 120, 90, generator=torch.Generator().manual_seed(1))

    assert torch.equal(eval_transform(image), eval_transform(image))
    assert eval_transform(image).shape == (3, 224, 224)
    assert predict_transform(image).shape == (3, 224, 224)
    with pytest.raises(InputException):
        eval_transform(torch.rand(1, 32, 32))


def test_eval_point_mapping_follows_resize_and_center_crop() -> None:
    mapped = map_points_eval([(256.0, 256.0), (0.0, 0.0)], (512, 512))

    assert mapped == [(112.0, 112.0)]


def test_eval_heatmap_mapping_crops_to_network_input() -> None:
    heatmap = torch.rand(64, 48).numpy()

    assert map_heatmap_eval(heatmap).shape == (224, 224)


def test_undecodable_image_is_a_data_error(tmp_path: Path) -> None:
    path = tmp_path / "broken.png"
    path.write_bytes(b"not an image")

    with pytest.raises(DataException):
        load_image(path)


def test_loader_batches_are_reproducible(fixture_root: Path, tmp_path: Path) -> None:
    settings = fixture_settings(fixture_root, tmp_path)
    records = index_dataset(fixture_root, SettingEnum.SEEN).records

    first = list(build_train_loader(records, settings, epoch=0))
    second = list(build_train_loader(records, settings, epoch=0))

    assert len(first) == 3
    for left, right in zip(first, second, strict=True):
        assert left.ego_images.shape == (4, 3, 224, 224)
        assert left.exo_images.shape == (4, 3, 3, 224, 224)
        assert torch.equal(left.ego_images, right.ego_images)
        assert torch.equal(left.exo_images, right.exo_images)
        assert torch.equal(left.labels, right.labels)


def test_epochs_reshuffle_the_order(fixture_root: Path, tmp_path: Path) -> None:
    settings = fixture_settings(fixture_root, tmp_path)
    records = index_dataset(fixture_root, SettingEnum.SEEN).train

    orders = [PairedSampleDataset(records, settings, epoch).order for epoch in range(4)]

    assert sorted(orders[0]) == list(range(12))
    assert len({tuple(order) for order in orders}) > 1


def test_unreadable_samples_are_dropped_from_the_batch(tmp_path: Path) -> None:
    _minimal_tree(tmp_path / "data")
    bad = tmp_path / "data" / "unseen" / "train" / "egocentric" / "cut" / "cup" / "broken.png"
    bad.write_bytes(b"broken")
    settings = fixture_settings(
        tmp_path / "data",
        tmp_path / "out",
        data={"setting": "unseen"},
        train={"N": 1},
    )
    records = index_dataset(tmp_path / "data", SettingEnum.UNSEEN).train

    dataset = PairedSampleDataset(records, settings, epoch=0)
    items = [dataset[position] for position in range(len(dataset))]

    assert sum(item is None for item in items) == 1
    batch = collate_samples(items)
    assert batch is not None and batch.size == 1
    assert collate_samples([None]) is None


def test_fixture_ground_truth_lies_inside_part_boxes(fixture_root: Path) -> None:
    boxes = read_part_boxes(fixture_root)
    index = index_dataset(fixture_root, SettingEnum.SEEN)

    assert len(boxes) == 16
    for record in index.test:
        key = record.ego_path.relative_to(fixture_root).as_posix()
        x0, y0, x1, y1 = boxes[key]
        assert record.gt_path is not None
        for x, y in read_points(record.gt_path):
            assert x0 <= x < x1 and y0 <= y < y1


def test_fixture_generation_is_reproducible(tmp_path: Path) -> None:
    spec = FixtureSpec(seed=3, affordances=("cut",), ego_per_group=1, exo_per_group=1)
    generate_fixture(tmp_path / "a", spec)
    generate_fixture(tmp_path / "b", spec)

    files = sorted(path.relative_to(tmp_path / "a") for path in (tmp_path / "a").rglob("*.*"))
    assert files
    for relative in files:
        assert (tmp_path / "a" / relative).read_bytes() == (tmp_path / "b" / relative).read_bytes()
    assert load_image(tmp_path / "a" / files[-1]).shape[0] == 3
