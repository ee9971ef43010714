from __future__ import annotations

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from locate.core.config import Settings, get_settings, load_settings, read_config_file
from locate.core.enums import BackboneKindEnum, SettingEnum, TransferModeEnum
from locate.shared.exceptions import ConfigException


def _build_settings(**values: object) -> Settings:
    return Settings(_env_file=None, **values)


def test_defaults_follow_reference_hyperparameters() -> None:
    settings = _build_settings()

    assert settings.extract.tau == 0.6
    assert settings.select.mu == 0.65
    assert settings.select.K == 3
    assert settings.train.N == 3
    assert (settings.loss.lambda_cos, settings.loss.lambda_c, settings.loss.alpha) == (
        1.0,
        0.07,
        0.5,
    )
    assert (settings.train.lr, settings.train.weight_decay) == (1e-3, 5e-4)
    assert settings.train.batch_size == 16
    assert settings.train.warmup_epochs == 1
    assert settings.train.epochs is None
    assert settings.gt.sigma == 3.0
    assert settings.transfer.mode is TransferModeEnum.RKT


def test_tokens_are_normalized() -> None:
    settings = _build_settings(
        transfer={"mode": "gkt"},
        backbone={"kind": "VIT_ADAPTER"},
        data={"setting": " Unseen "},
        log_level="debug",
    )

    assert settings.transfer.mode is TransferModeEnum.GKT
    assert settings.backbone.kind is BackboneKindEnum.VIT_ADAPTER
    assert settings.data.setting is SettingEnum.UNSEEN
    assert settings.log_level == "DEBUG"


@pytest.mark.parametrize(
    "values",
    [
        {"extract": {"tau": 1.0}},
        {"extract": {"tau": 0.0}},
        {"select": {"mu": 1.2}},
        {"select": {"K": 0}},
        {"loss": {"alpha": 1.0}},
        {"loss": {"lambda_c": -0.1}},
        {"train": {"warmup_epochs": -1}},
        {"data": {"std": (0.2, 0.0, 0.2)}},
        {"data": {"image_size": 300, "resize_size": 256}},
        {"data": {"image_size": 200}},
    ],
)
def test_out_of_range_values_are_rejected(values: dict[str, dict[str, object]]) -> None:
    with pytest.raises(ValidationError):
        _build_settings(**values)


def test_backbone_is_always_frozen() -> None:
    with pytest.raises(ValidationError):
        _build_settings(backbone={"frozen": False})


def test_environment_overrides_nested_values(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("LOCATE_SELECT__K", "5")
    monkeypatch.setenv("LOCATE_TRAIN__SEED", "11")

    settings = load_settings(env_file=None)

    assert settings.select.K == 5
    assert settings.train.seed == 11


def test_file_then_flags_take_precedence(tmp_path: Path) -> None:
    config = tmp_path / "run.toml"
    config.write_text("[select]\nK = 4\nmu = 0.7\n\n[train]\nepochs = 3\n", encoding="utf-8")

    settings = load_settings(
        config,
        {"select": {"mu": 0.5}},
        base={"select": {"K": 2, "max_iter": 10}, "train": {"epochs": 9}},
        env_file=None,
    )

    assert settings.select.K == 4
    assert settings.select.mu == 0.5
    assert settings.select.max_iter == 10
    assert settings.train.epochs == 3


def test_output_dir_environment_sits_between_file_and_flags(
    tmp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    monkeypatch.setenv("LOCATE_OUTPUT_DIR", str(tmp_path / "env"))
    base = {"paths": {"output_dir": str(tmp_path / "checkpoint")}}

    from_env = load_settings(base=base, env_file=None)
    from_flag = load_settings(
        overrides={"paths": {"output_dir": str(tmp_path / "flag")}},
        base=base,
        env_file=None,
    )

    assert from_env.paths.output_dir == tmp_path / "env"
    assert from_flag.paths.output_dir == tmp_path / "flag"


def test_json_config_files_are_read(tmp_path: Path) -> None:
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"transfer": {"mode": "GKT"}}), encoding="utf-8")

    assert read_config_file(config) == {"transfer": {"mode": "GKT"}}


@pytest.mark.parametrize("name", ["missing.toml", "run.yaml"])
def test_unreadable_config_files_are_config_errors(tmp_path: Path, name: str) -> None:
    path = tmp_path / name
    if name.endswith(".yaml"):
        path.write_text("select: {}\n", encoding="utf-8")

    with pytest.raises(ConfigException):
        read_config_file(path)


def test_invalid_values_become_config_errors() -> None:
    with pytest.raises(ConfigException) as exc_info:
        load_settings(overrides={"select": {"K": "many"}}, env_file=None)

    errors = exc_info.value.details["errors"]
    assert errors[0]["loc"] == ["select", "K"]


def test_config_tag_ignores_output_locations(tmp_path: Path) -> None:
    first = _build_settings(paths={"output_dir": str(tmp_path / "a")})
    second = _build_settings(paths={"output_dir": str(tmp_path / "b")})
    third = _build_settings(select={"K": 5})
    dumping = _build_settings(select={"debug_dir": str(tmp_path / "dumps")})

    assert first.config_tag() == second.config_tag()
    assert first.config_tag() == dumping.config_tag()
    assert first.config_tag() != third.config_tag()


def test_resolved_json_round_trips() -> None:
    settings = _build_settings(select={"K": 5}, transfer={"mode": "GKT"})

    restored = Settings.model_validate_json(settings.resolved_json())

    assert restored == settings


def test_get_settings_is_cached() -> None:
    get_settings.cache_clear()
    try:
        assert get_settings() is get_settings()
    finally:
        get_settings.cache_clear()
