#!/usr/bin/env python3
"""Run the fixture training once per ablation axis value and print one summary line per run."""

from __future__ import annotations

import argparse
import json
import logging
import tempfile
from pathlib import Path
from typing import Any

from locate.core.config import load_settings
from locate.modules.backbone.service import build_backbone
from locate.modules.data.fixture import FixtureSpec, generate_fixture
from locate.modules.data.repository import index_dataset
from locate.modules.training.service import Trainer
from locate.shared.exceptions import handle_cli_exception

DEFAULT_STEPS = 60
DEFAULT_LR = 0.02
DEFAULT_BATCH_SIZE = 4

NO_LC: dict[str, Any] = {"loss": {"use_concentration": False}}

# (axis, value, overrides)
SWEEP: list[tuple[str, str, dict[str, Any]]] = [
    *[("N", str(n), {"train": {"N": n}}) for n in (1, 2, 3)],
    *[("K", str(k), {"select": {"K": k}}) for k in (2, 3, 5)],
    ("mode", "GKT", {"transfer": {"mode": "GKT"}, **NO_LC}),
    ("mode", "RKT", {"transfer": {"mode": "RKT", "part_select": False}, **NO_LC}),
    ("mode", "RKT+S", {"transfer": {"mode": "RKT"}, **NO_LC}),
    ("mode", "RKT+S+Lc", {"transfer": {"mode": "RKT"}}),
    ("loss", "no_cos", {"loss": {"use_cos": False}}),
    ("loss", "no_concentration", {"loss": {"use_concentration": False}}),
]


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Fixture-scale ablation sweep.")
    parser.add_argument("--data", type=Path, help="Fixture root; generated when omitted")
    parser.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lr", type=float, default=DEFAULT_LR)
    parser.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    parser.add_argument("--axis", choices=sorted({axis for axis, _, _ in SWEEP}))
    return parser.parse_args()


def _merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    merged = {key: dict(value) if isinstance(value, dict) else value for key, value in base.items()}
    for key, value in extra.items():
        merged.setdefault(key, {}).update(value)
    return merged


def run_one(root: Path, args: argparse.Namespace, overrides: dict[str, Any]) -> dict[str, Any]:
    base = {
        "data": {"root": str(root)},
        "train": {
            "epochs": args.steps,
            "max_steps": args.steps,
            "seed": args.seed,
            "lr": args.lr,
            "batch_size": args.batch_size,
        },
    }
    settings = load_settings(overrides=_merge(base, overrides), env_file=None)
    index = index_dataset(root, settings.data.setting)
    trainer = Trainer(settings, build_backbone(settings), index.vocabulary)
    reports = trainer.fit(index.train)
    report = trainer.evaluate(index.test)
    return {
        "config": settings.config_tag(),
        "steps": trainer.global_step,
        "final_total": round(reports[-1].total.item(), 6) if reports else None,
        "kld": round(report.image_mean.kld, 6) if report.image_mean else None,
        "sim": round(report.image_mean.sim, 6) if report.image_mean else None,
        "nss": round(report.image_mean.nss, 6) if report.image_mean else None,
    }


def main() -> int:
    args = parse_args()
    logging.basicConfig(level=logging.WARNING)
    try:
        with tempfile.TemporaryDirectory(prefix="locate-fixture-") as scratch:
            root = args.data
            if root is None:
                root = Path(scratch)
                generate_fixture(root, FixtureSpec(seed=args.seed))
            for axis, value, overrides in SWEEP:
                if args.axis and axis != args.axis:
                    continue
                summary = run_one(root, args, overrides)
                print(json.dumps({"axis": axis, "value": value, **summary}), flush=True)
    except Exception as exc:
        return handle_cli_exception(exc)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
