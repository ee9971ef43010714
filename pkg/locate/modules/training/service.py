"""Training loop: exocentric localization, PartSelect and egocentric supervision."""

from __future__ import annotations

import logging
import time
from collections import Counter
from collections.abc import Sequence
from pathlib import Path

import torch

from locate.core.config import Settings
from locate.core.enums import SelectionOutcomeEnum, SplitEnum, TransferModeEnum
from locate.core.metrics import PipelineMetrics
from locate.modules.backbone.models import Backbone
from locate.modules.backbone.schemas import FeatureMap, SaliencyMask
from locate.modules.backbone.service import extract_features, extract_saliency
from locate.modules.cam.models import LocateModel
from locate.modules.cam.schemas import LocalizationMaps
from locate.modules.cam.service import classification_loss, forward_cam, predict_affordance
from locate.modules.data.repository import load_image
from locate.modules.data.schemas import Batch, SampleRecord
from locate.modules.data.service import (
    ExocentricPool,
    build_exocentric_pool,
    build_train_loader,
    sample_exocentric,
)
from locate.modules.data.transforms import eval_transform, map_heatmap_eval, map_points_eval
from locate.modules.evaluation.repository import read_heatmap, read_points
from locate.modules.evaluation.schemas import EvaluationReport, ImageMetricRow, SkippedRecord
from locate.modules.evaluation.service import (
    build_gt_heatmap,
    heatmap_from_density,
    score_prediction,
    summarize,
)
from locate.modules.part_select.repository import write_selection_dump
from locate.modules.part_select.schemas import SelectionResult, SimilarityMaps
from locate.modules.part_select.service import select_part_prototype, similarity_maps
from locate.modules.regions.service import extract_interaction_embeddings
from locate.modules.training.repository import TrainLogWriter
from locate.modules.training.schemas import Checkpoint, TrainStepRecord
from locate.modules.transfer.schemas import LossReport, LossWeights
from locate.modules.transfer.service import (
    concentration_loss,
    cosine_margin_loss,
    global_average_target,
    masked_average_pool,
    regional_average_target,
    total_loss,
)
from locate.shared.exceptions import ConfigException, DataException, InputException
from locate.shared.utils import derive_seed

logger = logging.getLogger(__name__)


class Trainer:
    """Owns the trainable CAM heads and the SGD optimizer; the backbone stays frozen."""

    def __init__(
        self,
        settings: Settings,
        backbone: Backbone,
        vocabulary: Sequence[str],
        *,
        metrics: PipelineMetrics | None = None,
        log_writer: TrainLogWriter | None = None,
    ) -> None:
        if not vocabulary:
            raise ConfigException("Affordance vocabulary is empty")
        self.settings = settings
        self.backbone = backbone
        self.vocabulary = tuple(vocabulary)
        self.metrics = metrics or PipelineMetrics()
        self.log_writer = log_writer
        self.weights = LossWeights.from_settings(settings.loss)

        torch.manual_seed(settings.train.seed)
        self.model = LocateModel(
            backbone.feature_dim,
            len(self.vocabulary),
            shared=settings.cam.shared,
        )
        self.optimizer = torch.optim.SGD(
            self.model.parameters(),
            lr=settings.train.lr,
            momentum=settings.train.momentum,
            weight_decay=settings.train.weight_decay,
        )
        self.epoch = 0
        self.global_step = 0
        self.last_outcomes: list[SelectionOutcomeEnum] = []

    @classmethod
    def from_checkpoint(
        cls,
        checkpoint: Checkpoint,
        backbone: Backbone,
        *,
        settings: Settings | None = None,
        metrics: PipelineMetrics | None = None,
    ) -> Trainer:
        """Rebuild a trainer from a checkpoint; the stored config wins unless one is given."""
        resolved = settings or Settings.model_validate_json(checkpoint.config_json)
        if resolved.cam.shared != checkpoint.shared:
            cam = resolved.cam.model_copy(update={"shared": checkpoint.shared})
            resolved = resolved.model_copy(update={"cam": cam})
        if checkpoint.feature_dim and checkpoint.feature_dim != backbone.feature_dim:
            raise ConfigException(
                f"Checkpoint expects feature_dim {checkpoint.feature_dim}, "
                f"backbone has {backbone.feature_dim}",
            )
        trainer = cls(resolved, backbone, checkpoint.vocabulary, metrics=metrics)
        trainer.model.load_state_dict(checkpoint.state_dict)
        trainer.epoch = checkpoint.epoch
        trainer.global_step = checkpoint.global_step
        torch.set_rng_state(checkpoint.rng_state)
        return trainer

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            state_dict={
                name: tensor.detach().clone() for name, tensor in self.model.state_dict().items()
            },
            config_json=self.settings.model_dump_json(),
            vocabulary=self.vocabulary,
            epoch=self.epoch,
            global_step=self.global_step,
            rng_state=torch.get_rng_state(),
            feature_dim=self.backbone.feature_dim,
            shared=self.model.shared,
        )

    def _transfer_row(
        self,
        row: int,
        label: int,
        exo_features: torch.Tensor,
        exo_maps: torch.Tensor,
        exo_projected: torch.Tensor,
        ego_features: torch.Tensor,
        ego_maps: torch.Tensor,
        ego_projected: torch.Tensor,
        ego_saliency: torch.Tensor,
    ) -> tuple[torch.Tensor | None, SelectionOutcomeEnum]:
        """Cosine-margin term of one batch row and the selection outcome behind it."""
        settings = self.settings
        alpha = self.weights.alpha
        n = settings.train.N
        exo_slice = slice(row * n, (row + 1) * n)

        if settings.transfer.mode is TransferModeEnum.GKT:
            target = global_average_target(exo_projected[exo_slice])
            f_ego = ego_projected[row].mean(dim=(1, 2))
            return cosine_margin_loss(target, f_ego, alpha), SelectionOutcomeEnum.NOT_REQUESTED

        image_size = (settings.data.image_size, settings.data.image_size)
        row_features = [FeatureMap(item, image_size) for item in exo_features[exo_slice]]
        row_maps = [LocalizationMaps(item) for item in exo_maps[exo_slice]]
        ego_feature_map = FeatureMap(ego_features[row], image_size)
        if settings.transfer.part_select:
            bag = extract_interaction_embeddings(
                row_features,
                row_maps,
                label,
                settings.extract.tau,
            )
            saliency = SaliencyMask.from_weights(ego_saliency[row])
            result = select_part_prototype(
                bag,
                ego_feature_map,
                saliency,
                k=settings.select.K,
                mu=settings.select.mu,
                seed=derive_seed(settings.train.seed, self.global_step, row),
                max_iter=settings.select.max_iter,
            )
            if settings.select.debug_dir is not None:
                write_selection_dump(
                    settings.select.debug_dir / f"step_{self.global_step:06d}" / f"row_{row:02d}",
                    result,
                    saliency,
                    mu=settings.select.mu,
                )
            target, outcome = result.selected, result.outcome
        else:
            target = regional_average_target(row_features, row_maps, label)
            outcome = (
                SelectionOutcomeEnum.NOT_REQUESTED
                if target is not None
                else SelectionOutcomeEnum.EMPTY_BAG
            )

        if target is None:
            return None, outcome
        f_ego, empty = masked_average_pool(ego_feature_map, LocalizationMaps(ego_maps[row]), label)
        if empty:
            return None, outcome
        return cosine_margin_loss(target, f_ego, alpha), outcome

    def train_step(self, batch: Batch, *, epoch: int | None = None) -> LossReport:
        """One SGD update on a batch; returns the loss terms before the update."""
        settings = self.settings
        epoch = self.epoch if epoch is None else epoch
        warmup = epoch < settings.train.warmup_epochs
        n = settings.train.N
        if batch.exo_images.shape[1] != n:
            raise InputException(f"Batch carries {batch.exo_images.shape[1]} exo images, N={n}")
        started = time.perf_counter()
        self.model.train()

        with torch.no_grad():
            exo_features = self.backbone.features(batch.exo_images.flatten(0, 1))
            ego_features = self.backbone.features(batch.ego_images)
            ego_saliency = self.backbone.saliency(batch.ego_images)

        exo_projected = self.model.exo_head.project(exo_features)
        exo_maps, exo_logits = self.model.exo_head.localize(exo_projected)
        ego_projected = self.model.ego_head.project(ego_features)
        ego_maps, ego_logits = self.model.ego_head.localize(ego_projected)

        labels = batch.labels.long()
        l_cls_exo = classification_loss(exo_logits, labels.repeat_interleave(n))
        l_cls_ego = classification_loss(ego_logits, labels)

        cos_terms: list[torch.Tensor] = []
        outcomes: list[SelectionOutcomeEnum] = []
        for row, label in enumerate(labels.tolist()):
            if warmup or not settings.loss.use_cos:
                outcomes.append(SelectionOutcomeEnum.NOT_REQUESTED)
                continue
            term, outcome = self._transfer_row(
                row,
                label,
                exo_features,
                exo_maps,
                exo_projected,
                ego_features,
                ego_maps,
                ego_projected,
                ego_saliency,
            )
            outcomes.append(outcome)
            if term is not None:
                cos_terms.append(term)
        l_cos = torch.stack(cos_terms).mean() if cos_terms else None

        if settings.loss.use_concentration:
            l_c = torch.stack(
                [
                    concentration_loss(
                        LocalizationMaps(ego_maps[row]),
                        channels=[label] if settings.loss.lc_gt_only else None,
                    )
                    for row, label in enumerate(labels.tolist())
                ],
            ).mean()
        else:
            l_c = torch.zeros((), dtype=ego_maps.dtype)

        report = total_loss(l_cls_exo, l_cls_ego, l_cos, l_c, self.weights, warmup=warmup)
        self.optimizer.zero_grad(set_to_none=True)
        report.total.backward()
        self.optimizer.step()

        duration = time.perf_counter() - started
        self.global_step += 1
        self.last_outcomes = outcomes
        self.metrics.train_steps_total.inc()
        self.metrics.train_step_duration_seconds.observe(duration)
        for outcome in outcomes:
            self.metrics.prototype_selection_total.labels(outcome=outcome.value).inc()

        if self.log_writer is not None:
            self.log_writer.write(
                TrainStepRecord(
                    epoch=epoch,
                    step=self.global_step,
                    batch_size=batch.size,
                    warmup=warmup,
                    outcomes=dict(Counter(outcomes)),
                    duration_seconds=round(duration, 6),
                    **report.to_record(),
                ),
            )
        return report

    def fit(self, records: Sequence[SampleRecord]) -> list[LossReport]:
        """Train until `train.epochs` or `train.max_steps`, whichever comes first."""
        epochs = self.settings.train.epochs
        if epochs is None:
            raise ConfigException("train.epochs is required to start training")
        max_steps = self.settings.train.max_steps
        pool = build_exocentric_pool(records)
        reports: list[LossReport] = []

        logger.info(
            "Training start config=%s epochs=%s max_steps=%s records=%s",
            self.settings.config_tag(),
            epochs,
            max_steps,
            len(records),
        )
        while self.epoch < epochs:
            for batch in build_train_loader(records, self.settings, self.epoch, pool):
                if max_steps is not None and self.global_step >= max_steps:
                    break
                if batch is None:
                    continue
                reports.append(self.train_step(batch))
            logger.info(
                "Epoch done epoch=%s step=%s last_total=%.4f",
                self.epoch,
                self.global_step,
                reports[-1].total.item() if reports else float("nan"),
            )
            self.epoch += 1
            if max_steps is not None and self.global_step >= max_steps:
                break
        return reports

    def predict(self, image: torch.Tensor, label: int, out_size: tuple[int, int]) -> torch.Tensor:
        """Egocentric heatmap in [0, 1] for a standardized image."""
        self.model.eval()
        with torch.no_grad():
            maps, _ = forward_cam(extract_features(self.backbone, image), self.model.ego_head)
            return predict_affordance(maps, label, out_size)

    def _image_key(self, path: Path) -> str:
        root = self.settings.data.root
        if root is not None and path.is_relative_to(root):
            return path.relative_to(root).as_posix()
        return path.as_posix()

    def evaluate(self, records: Sequence[SampleRecord]) -> EvaluationReport:
        """Score egocentric predictions of the test records against their ground truth."""
        data = self.settings.data
        crop = data.image_size
        rows: list[ImageMetricRow] = []
        skipped: list[SkippedRecord] = []

        def skip(key: str, reason: str) -> None:
            logger.warning("Evaluation skipped image=%s reason=%s", key, reason)
            skipped.append(SkippedRecord(image=key, reason=reason))
            self.metrics.eval_images_total.labels(status="skipped").inc()

        for record in records:
            if record.split is not SplitEnum.TEST:
                continue
            key = self._image_key(record.ego_path)
            if record.gt_path is None or not record.gt_path.is_file():
                skip(key, "missing ground truth")
                continue
            try:
                image = load_image(record.ego_path)
                if record.gt_path.suffix == ".npy":
                    heatmap = map_heatmap_eval(
                        read_heatmap(record.gt_path),
                        resize_size=data.resize_size,
                        crop_size=crop,
                    )
                    gt = heatmap_from_density(heatmap)
                else:
                    points = map_points_eval(
                        read_points(record.gt_path),
                        (int(image.shape[1]), int(image.shape[2])),
                        resize_size=data.resize_size,
                        crop_size=crop,
                    )
                    gt = build_gt_heatmap(points, (crop, crop), self.settings.gt.sigma)
            except (DataException, InputException) as exc:
                skip(key, exc.message)
                continue

            tensor = eval_transform(
                image,
                resize_size=data.resize_size,
                crop_size=crop,
                mean=data.mean,
                std=data.std,
            )
            prediction = self.predict(tensor, record.affordance, (crop, crop))
            if not prediction.sum() > 0:
                # constant map: no preferred location
                prediction = torch.ones_like(prediction)
            triple = score_prediction(prediction, gt)
            rows.append(
                ImageMetricRow(
                    image=key,
                    affordance=record.affordance_name,
                    kld=triple.kld,
                    sim=triple.sim,
                    nss=triple.nss,
                ),
            )
            self.metrics.eval_images_total.labels(status="evaluated").inc()

        return summarize(str(data.setting), rows, skipped)

    def inspect(
        self,
        record: SampleRecord,
        pool: ExocentricPool | None = None,
        *,
        seed: int | None = None,
    ) -> tuple[SelectionResult, SaliencyMask, list[SimilarityMaps]]:
        """Run PartSelect on one training record with deterministic eval-time transforms."""
        settings = self.settings
        data = settings.data
        seed = settings.train.seed if seed is None else seed
        pool = pool if pool is not None else build_exocentric_pool([record])
        exo_paths = sample_exocentric(
            pool,
            record.affordance,
            record.object_class,
            settings.train.N,
            derive_seed(seed, "inspect", record.ego_path.as_posix()),
        )

        def prepare(path: Path) -> torch.Tensor:
            return eval_transform(
                load_image(path),
                resize_size=data.resize_size,
                crop_size=data.image_size,
                mean=data.mean,
                std=data.std,
            )

        self.model.eval()
        with torch.no_grad():
            ego = prepare(record.ego_path)
            ego_features = extract_features(self.backbone, ego)
            saliency = extract_saliency(self.backbone, ego)
            exo_features = [extract_features(self.backbone, prepare(path)) for path in exo_paths]
            exo_maps = [forward_cam(item, self.model.exo_head)[0] for item in exo_features]

        bag = extract_interaction_embeddings(
            exo_features,
            exo_maps,
            record.affordance,
            settings.extract.tau,
        )
        result = select_part_prototype(
            bag,
            ego_features,
            saliency,
            k=settings.select.K,
            mu=settings.select.mu,
            seed=derive_seed(seed, "inspect"),
            max_iter=settings.select.max_iter,
        )
        exo_similarity = (
            [similarity_maps(result.prototypes, item) for item in exo_features]
            if result.prototypes is not None
            else []
        )
        return result, saliency, exo_similarity
