from __future__ import annotations

import json
import math
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest
import torch

from locate.modules.evaluation.repository import read_heatmap, read_points, write_report
from locate.modules.evaluation.schemas import ImageMetricRow, SkippedRecord
from locate.modules.evaluation.service import (
    build_gt_heatmap,
    heatmap_from_density,
    kld,
    nss,
    score_prediction,
    sim,
    summarize,
)
from locate.modules.evaluation.visualization import render_overlay
from locate.shared.exceptions import DataException, InputException


def _random_maps(count: int, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.random((12, 9)) + 1e-3 for _ in range(count)]


def test_kld_of_a_map_with_itself_is_zero() -> None:
    for pred in _random_maps(100):
        assert abs(kld(pred, pred)) < 1e-6


def test_kld_is_non_negative_for_random_pairs() -> None:
    maps = _random_maps(100, seed=1)
    for first, second in zip(maps, maps[1:], strict=False):
        assert kld(first, second) >= -1e-12 * first.size


def test_kld_of_uniform_against_point_mass_is_log_of_size() -> None:
    gt = np.zeros((8, 8))
    gt[3, 5] = 1.0

    assert kld(np.ones((8, 8)), gt) == pytest.approx(math.log(64), rel=1e-6)


def test_kld_is_finite_for_disjoint_supports() -> None:
    pred = np.zeros((4, 4))
    pred[0, 0] = 1.0
    gt = np.zeros((4, 4))
    gt[3, 3] = 1.0

    value = kld(pred, gt)
    assert math.isfinite(value)
    assert value > 20


def test_sim_identities() -> None:
    maps = _random_maps(50, seed=2)
    for first, second in zip(maps, maps[1:], strict=False):
        assert sim(first, first) == pytest.approx(1.0, abs=1e-9)
        assert sim(first, second) == sim(second, first)
        assert 0.0 <= sim(first, second) <= 1.0


def test_sim_of_uniform_against_half_uniform() -> None:
    gt = np.zeros((4, 4))
    gt[:2] = 1.0

    assert sim(np.ones((4, 4)), gt) == pytest.approx(0.5)


def test_sim_of_disjoint_supports_is_zero() -> None:
    assert sim(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])) == 0.0


@pytest.mark.parametrize("metric", [kld, sim])
def test_distribution_metrics_reject_empty_or_negative_maps(
    metric: Callable[[np.ndarray, np.ndarray], float],
) -> None:
    with pytest.raises(InputException):
        metric(np.zeros((3, 3)), np.ones((3, 3)))
    with pytest.raises(InputException):
        metric(np.ones((3, 3)), -np.ones((3, 3)))


def test_distribution_metrics_ignore_positive_rescaling() -> None:
    pred, gt = _random_maps(2, seed=3)

    assert kld(7.5 * pred, gt) == pytest.approx(kld(pred, gt), abs=1e-9)
    assert sim(7.5 * pred, gt) == pytest.approx(sim(pred, gt), abs=1e-12)


def test_nss_examples() -> None:
    assert nss(np.array([[1.0, 3.0]]), [(1, 0)]) == pytest.approx(1.0)
    assert nss(np.full((5, 5), 0.4), [(2, 2), (0, 4)]) == 0.0

    pred = _random_maps(1, seed=4)[0]
    row, col = np.unravel_index(np.argmax(pred), pred.shape)
    assert nss(pred, [(int(col), int(row))]) > 0


def test_nss_is_affine_invariant() -> None:
    pred = _random_maps(1, seed=5)[0]
    points = [(0, 0), (4, 7), (8, 11)]

    assert nss(3.0 * pred + 2.0, points) == pytest.approx(nss(pred, points), abs=1e-6)


def test_nss_accepts_torch_predictions() -> None:
    assert nss(torch.tensor([[1.0, 3.0]]), [(1, 0)]) == pytest.approx(1.0)


@pytest.mark.parametrize("points", [[], [(5, 0)]])
def test_nss_rejects_missing_or_out_of_bounds_fixations(points: list[tuple[int, int]]) -> None:
    with pytest.raises(InputException):
        nss(np.ones((2, 2)), points)


def test_gt_heatmap_peaks_at_a_single_point() -> None:
    gt = build_gt_heatmap([(20.0, 10.0)], (32, 48), sigma=1.5)

    assert np.unravel_index(np.argmax(gt.density), gt.density.shape) == (10, 20)
    assert gt.fixation_points == ((20, 10),)


def test_duplicate_points_do_not_change_the_heatmap() -> None:
    single = build_gt_heatmap([(7.0, 7.0)], (16, 16), sigma=2.0)
    double = build_gt_heatmap([(7.0, 7.0), (7.0, 7.0)], (16, 16), sigma=2.0)

    assert np.allclose(single.density, double.density)


def test_gt_heatmap_always_sums_to_one() -> None:
    rng = np.random.default_rng(6)
    for _ in range(20):
        points = [(float(x), float(y)) for x, y in rng.integers(0, 24, size=(5, 2))]
        gt = build_gt_heatmap(points, (24, 24), sigma=float(rng.uniform(0.5, 6.0)))
        assert abs(gt.density.sum() - 1.0) < 1e-6
        assert gt.density.min() >= 0


@pytest.mark.parametrize(
    ("points", "sigma"),
    [([], 3.0), ([(1.0, 1.0)], 0.0), ([(40.0, 1.0)], 3.0)],
)
def test_gt_heatmap_rejects_bad_input(points: list[tuple[float, float]], sigma: float) -> None:
    with pytest.raises(InputException):
        build_gt_heatmap(points, (16, 16), sigma=sigma)


def test_pre_rendered_heatmap_is_used_verbatim() -> None:
    density = np.zeros((4, 4))
    density[1, 2] = 3.0
    density[3, 0] = 0.2
    density[0, 0] = 1.0

    gt = heatmap_from_density(density)

    assert np.allclose(gt.density, density / density.sum())
    assert sorted(gt.fixation_points) == [(0, 0), (2, 1)]


def test_score_prediction_bundles_three_metrics() -> None:
    gt = build_gt_heatmap([(3.0, 3.0)], (8, 8), sigma=1.0)
    triple = score_prediction(gt.density, gt)

    assert abs(triple.kld) < 1e-6
    assert triple.sim == pytest.approx(1.0)
    assert triple.nss > 0


def _rows() -> list[ImageMetricRow]:
    return [
        ImageMetricRow(image="a.png", affordance="cut", kld=1.0, sim=0.2, nss=1.0),
        ImageMetricRow(image="b.png", affordance="cut", kld=3.0, sim=0.4, nss=2.0),
        ImageMetricRow(image="c.png", affordance="hold", kld=2.0, sim=0.9, nss=0.0),
    ]


def test_summarize_reports_image_and_affordance_means() -> None:
    report = summarize("seen", _rows(), [SkippedRecord(image="d.png", reason="no ground truth")])

    assert report.image_mean is not None and report.affordance_mean is not None
    assert report.image_mean.kld == pytest.approx(2.0)
    assert report.image_mean.sim == pytest.approx(0.5)
    assert report.affordance_means["cut"].nss == pytest.approx(1.5)
    assert report.affordance_mean.kld == pytest.approx(2.0)
    assert report.affordance_mean.sim == pytest.approx(0.6)
    assert report.affordance_mean.nss == pytest.approx(0.75)
    assert (report.evaluated_count, report.skipped_count) == (3, 1)


def test_summarize_without_rows_has_no_means() -> None:
    report = summarize("unseen", [])

    assert report.image_mean is None
    assert report.affordance_means == {}


def test_report_files_are_written_and_reproducible(tmp_path: Path) -> None:
    report = summarize("seen", _rows())

    first = write_report(report, tmp_path / "first")
    second = write_report(report, tmp_path / "second")

    for key in ("per_image", "aggregate", "json"):
        assert first[key].read_bytes() == second[key].read_bytes()
    lines = first["per_image"].read_text(encoding="utf-8").splitlines()
    assert lines[0] == "image,affordance,kld,sim,nss"
    assert lines[1] == "a.png,cut,1.000000,0.200000,1.000000"
    aggregate = first["aggregate"].read_text(encoding="utf-8")
    assert "affordance:hold" in aggregate
    assert json.loads(first["json"].read_text(encoding="utf-8"))["setting"] == "seen"


def test_points_file_parsing(tmp_path: Path) -> None:
    path = tmp_path / "points.txt"
    path.write_text("# x y\n12 4\n\n3.5, 7\n", encoding="utf-8")

    assert read_points(path) == [(12.0, 4.0), (3.5, 7.0)]

    path.write_text("1 2 3\n", encoding="utf-8")
    with pytest.raises(DataException):
        read_points(path)


def test_heatmap_file_must_be_two_dimensional(tmp_path: Path) -> None:
    path = tmp_path / "heatmap.npy"
    np.save(path, np.ones((2, 3, 4)))

    with pytest.raises(DataException):
        read_heatmap(path)

    np.save(path, np.ones((2, 3), dtype=np.float32))
    assert read_heatmap(path).dtype == np.float64


def test_overlay_blends_colormap_at_half_strength() -> None:
    image = torch.zeros(3, 4, 5)
    heatmap = torch.linspace(0, 1, 20).reshape(4, 5)

    overlay = render_overlay(image, heatmap)

    assert overlay.shape == (3, 4, 5)
    assert float(overlay.max()) <= 0.5 + 1e-6
    assert float(overlay.min()) >= 0.0
