"""Pipeline settings loaded from environment, config file and flag overrides."""

from __future__ import annotations

import hashlib
import os
from collections.abc import Mapping
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    JsonConfigSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from locate.core.enums import BackboneKindEnum, SettingEnum, TransferModeEnum
from locate.shared.exceptions import ConfigException, config_exception_from_validation

OUTPUT_DIR_ENV = "LOCATE_OUTPUT_DIR"


class BackboneSettings(BaseModel):
    """Frozen dense feature extractor."""

    kind: BackboneKindEnum = BackboneKindEnum.SYNTHETIC
    patch_size: int = Field(default=16, ge=1)
    feature_dim: int = Field(default=32, ge=2)
    noise_scale: float = Field(default=0.01, ge=0.0)
    seed: int = 0
    layout_path: Path | None = None
    hub_repo: str = "facebookresearch/dino:main"
    hub_model: str = "dino_vits16"
    frozen: Literal[True] = True

    @field_validator("kind", mode="before")
    @classmethod
    def normalize_kind(cls, value: object) -> object:
        """Accept case-insensitive backbone kind tokens."""
        if isinstance(value, str):
            return value.strip().lower().replace("_", "-")
        return value


class CamSettings(BaseModel):
    shared: bool = True


class ExtractSettings(BaseModel):
    tau: float = Field(default=0.6, gt=0.0, lt=1.0)


class SelectSettings(BaseModel):
    """Prototype clustering and PartIoU gate."""

    K: int = Field(default=3, ge=1)
    mu: float = Field(default=0.65, ge=0.0, le=1.0)
    max_iter: int = Field(default=100, ge=1)
    debug_dir: Path | None = None


class LossSettings(BaseModel):
    """Loss weights, margin and ablation toggles."""

    lambda_cos: float = Field(default=1.0, ge=0.0)
    lambda_c: float = Field(default=0.07, ge=0.0)
    alpha: float = Field(default=0.5, ge=0.0, lt=1.0)
    lc_gt_only: bool = False
    use_cos: bool = True
    use_concentration: bool = True


class TransferSettings(BaseModel):
    mode: TransferModeEnum = TransferModeEnum.RKT
    part_select: bool = True

    @field_validator("mode", mode="before")
    @classmethod
    def normalize_mode(cls, value: object) -> object:
        """Accept lower-case transfer mode tokens."""
        if isinstance(value, str):
            return value.strip().upper()
        return value


class GtSettings(BaseModel):
    sigma: float = Field(default=3.0, gt=0.0)


class TrainSettings(BaseModel):
    """Optimization loop parameters."""

    lr: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=5e-4, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(default=16, ge=1)
    epochs: int | None = Field(default=None, ge=1)
    warmup_epochs: int = Field(default=1, ge=0)
    N: int = Field(default=3, ge=1)
    seed: int = 0
    max_steps: int | None = Field(default=None, ge=1)
    num_workers: int = Field(default=0, ge=0)


class DataSettings(BaseModel):
    """Dataset location and image preprocessing constants."""

    root: Path | None = None
    setting: SettingEnum = SettingEnum.SEEN
    image_size: int = Field(default=224, ge=1)
    resize_size: int = Field(default=256, ge=1)
    mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    std: tuple[float, float, float] = (0.229, 0.224, 0.225)

    @field_validator("setting", mode="before")
    @classmethod
    def normalize_setting(cls, value: object) -> object:
        if isinstance(value, str):
            return value.strip().lower()
        return value

    @field_validator("std")
    @classmethod
    def validate_std(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        """Standardization divisors must be positive."""
        if any(item <= 0 for item in value):
            raise ValueError("data.std entries must be positive")
        return value


class PathSettings(BaseModel):
    output_dir: Path = Path("runs/latest")
    checkpoint: Path | None = None


class Settings(BaseSettings):
    """Runtime pipeline settings."""

    model_config = SettingsConfigDict(
        env_prefix="LOCATE_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = "INFO"
    backbone: BackboneSettings = Field(default_factory=BackboneSettings)
    cam: CamSettings = Field(default_factory=CamSettings)
    extract: ExtractSettings = Field(default_factory=ExtractSettings)
    select: SelectSettings = Field(default_factory=SelectSettings)
    loss: LossSettings = Field(default_factory=LossSettings)
    transfer: TransferSettings = Field(default_factory=TransferSettings)
    gt: GtSettings = Field(default_factory=GtSettings)
    train: TrainSettings = Field(default_factory=TrainSettings)
    data: DataSettings = Field(default_factory=DataSettings)
    paths: PathSettings = Field(default_factory=PathSettings)

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, value: object) -> object:
        if isinstance(value, str):
            return value.strip().upper()
        return value

    @model_validator(mode="after")
    def validate_geometry(self) -> Settings:
        """Crop must fit in the resized image and tile exactly into patches."""
        if self.data.resize_size < self.data.image_size:
            raise ValueError("data.resize_size must be >= data.image_size")
        if self.data.image_size % self.backbone.patch_size != 0:
            raise ValueError(
                "data.image_size must be divisible by backbone.patch_size "
                f"({self.data.image_size} % {self.backbone.patch_size} != 0)",
            )
        return self

    def resolved_json(self) -> str:
        """Return the fully-resolved configuration as JSON text."""
        return self.model_dump_json(indent=2)

    def config_tag(self) -> str:
        """Short stable digest identifying this configuration in logs."""
        payload = self.model_dump_json(
            exclude={"paths": True, "log_level": True, "select": {"debug_dir": True}},
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _deep_merge(base: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(dict(merged[key]), value)
        else:
            merged[key] = value
    return merged


def read_config_file(path: Path) -> dict[str, Any]:
    """Read nested settings values from a TOML or JSON config file."""
    if not path.is_file():
        raise ConfigException(f"Config file not found: {path}", details={"path": str(path)})

    suffix = path.suffix.lower()
    if suffix == ".toml":
        source = TomlConfigSettingsSource(Settings, toml_file=path)
    elif suffix == ".json":
        source = JsonConfigSettingsSource(Settings, json_file=path)
    else:
        raise ConfigException(
            f"Unsupported config file type: {path.suffix or '<none>'}",
            details={"path": str(path), "supported": [".toml", ".json"]},
        )
    try:
        return dict(source())
    except ValueError as exc:
        raise ConfigException(f"Cannot parse config file {path}: {exc}") from exc


def load_settings(
    config_path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    *,
    base: Mapping[str, Any] | None = None,
    env_file: str | None = ".env",
) -> Settings:
    """Resolve settings with precedence defaults < env < base < file < flags.

    `base` carries a previously resolved configuration, e.g. the one stored in a checkpoint.
    """
    values = _deep_merge(dict(base or {}), read_config_file(config_path) if config_path else {})
    env_output_dir = os.getenv(OUTPUT_DIR_ENV)
    if env_output_dir:
        values = _deep_merge(values, {"paths": {"output_dir": env_output_dir}})
    values = _deep_merge(values, overrides or {})
    try:
        return Settings(_env_file=env_file, **values)
    except ValidationError as exc:
        raise config_exception_from_validation(exc) from exc


@lru_cache
def get_settings() -> Settings:
    """Return cached settings instance."""
    return Settings()
