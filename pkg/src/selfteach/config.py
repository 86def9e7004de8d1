"""Run configuration: JSON loading, defaults, and cross-field validation.

Unknown fields are hard errors (typo protection for experiment configs);
constraint violations name the offending field. An empty object is a valid
config and yields all defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from . import decoder as dec
from . import mask_schedule as sched
from . import scenario as scen
from . import thresholds as thr
from .errors import ConfigError
from .training import LoopConfig

SECTIONS = ("seed", "output_dir", "scheduler", "thresholds", "loop", "scenario",
            "decoder", "fixed_mask_ratio", "fixed_threshold", "no_teacher")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    output_dir: str | None = None
    scheduler: sched.SchedulerConfig = None  # type: ignore[assignment]
    thresholds: thr.ThresholdConfig = None  # type: ignore[assignment]
    loop: LoopConfig = None  # type: ignore[assignment]
    scenario: scen.ScenarioConfig = None  # type: ignore[assignment]
    decoder: dec.DecoderConfig = None  # type: ignore[assignment]
    fixed_mask_ratio: float | None = None
    fixed_threshold: float | None = None
    no_teacher: bool = False


def _check_unknown(section: str, data: dict, allowed: tuple[str, ...]) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{section}: unknown field {key!r}")


def _dataclass_fields(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls))


def config_from_dict(data: dict) -> RunConfig:
    """Build a validated RunConfig from a parsed JSON object.

    Defaults cascade: the run seed seeds the scenario and loop unless those
    sections set their own; loop total counts propagate into the scheduler
    horizon and threshold total_iters unless set explicitly (in which case
    they must agree).
    """
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    _check_unknown("config", data, SECTIONS)
    try:
        seed = int(data.get("seed", 42))
    except (TypeError, ValueError):
        raise ConfigError(f"seed: must be an integer, got {data.get('seed')!r}") from None
    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir: must be a string path")

    loop_data = dict(data.get("loop", {}))
    _check_unknown("loop", loop_data, _dataclass_fields(LoopConfig))
    loop_data.setdefault("seed", seed)
    if "srs_epochs" in loop_data and loop_data["srs_epochs"] is not None:
        loop_data["srs_epochs"] = tuple(loop_data["srs_epochs"])
    loop = LoopConfig(**loop_data)

    sched_data = dict(data.get("scheduler", {}))
    _check_unknown("scheduler", sched_data, _dataclass_fields(sched.SchedulerConfig))
    if "total_epochs" in sched_data and sched_data["total_epochs"] != loop.total_epochs:
        raise ConfigError(
            f"scheduler.total_epochs: {sched_data['total_epochs']} conflicts with "
            f"loop.total_epochs={loop.total_epochs}"
        )
    sched_data.setdefault("total_epochs", loop.total_epochs)
    scheduler = sched.SchedulerConfig(**sched_data)

    thr_data = dict(data.get("thresholds", {}))
    _check_unknown("thresholds", thr_data, _dataclass_fields(thr.ThresholdConfig))
    if "total_iters" in thr_data and thr_data["total_iters"] != loop.total_iters:
        raise ConfigError(
            f"thresholds.total_iters: {thr_data['total_iters']} conflicts with "
            f"loop total_epochs*iters_per_epoch={loop.total_iters}"
        )
    thr_data.setdefault("total_iters", loop.total_iters)
    thresholds_cfg = thr.ThresholdConfig(**thr_data)

    scen_data = dict(data.get("scenario", {}))
    allowed = _dataclass_fields(scen.ScenarioConfig)
    _check_unknown("scenario", scen_data, allowed)
    scen_data.setdefault("seed", seed)
    scenario = scen.config_from_dict(scen_data)

    dec_data = dict(data.get("decoder", {}))
    _check_unknown("decoder", dec_data, _dataclass_fields(dec.DecoderConfig))
    decoder = dec.DecoderConfig(**dec_data)

    fixed_mask_ratio = data.get("fixed_mask_ratio")
    if fixed_mask_ratio is not None:
        fixed_mask_ratio = float(fixed_mask_ratio)
        if not 0.0 <= fixed_mask_ratio <= 1.0:
            raise ConfigError(f"fixed_mask_ratio: must lie in [0, 1], got {fixed_mask_ratio}")
    fixed_threshold = data.get("fixed_threshold")
    if fixed_threshold is not None:
        fixed_threshold = float(fixed_threshold)
        if not 0.0 <= fixed_threshold <= 1.0:
            raise ConfigError(f"fixed_threshold: must lie in [0, 1], got {fixed_threshold}")
    no_teacher = data.get("no_teacher", False)
    if not isinstance(no_teacher, bool):
        raise ConfigError(f"no_teacher: must be a boolean, got {no_teacher!r}")

    return RunConfig(
        seed=seed,
        output_dir=output_dir,
        scheduler=scheduler,
        thresholds=thresholds_cfg,
        loop=loop,
        scenario=scenario,
        decoder=decoder,
        fixed_mask_ratio=fixed_mask_ratio,
        fixed_threshold=fixed_threshold,
        no_teacher=no_teacher,
    )


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON run config."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    """Full explicit dump; load(dump(x)) == x."""
    return {
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "scheduler": sched.config_to_dict(cfg.scheduler),
        "thresholds": thr.config_to_dict(cfg.thresholds),
        "loop": {
            "total_epochs": cfg.loop.total_epochs,
            "iters_per_epoch": cfg.loop.iters_per_epoch,
            "srs_epochs": list(cfg.loop.srs_epochs),
            "momentum": cfg.loop.momentum,
            "seed": cfg.loop.seed,
            "backbone_size": cfg.loop.backbone_size,
            "encoder_size": cfg.loop.encoder_size,
            "other_size": cfg.loop.other_size,
            "drift_scale": cfg.loop.drift_scale,
        },
        "scenario": scen.config_to_dict(cfg.scenario),
        "decoder": {"hidden_dim": cfg.decoder.hidden_dim, "lr": cfg.decoder.lr},
        "fixed_mask_ratio": cfg.fixed_mask_ratio,
        "fixed_threshold": cfg.fixed_threshold,
        "no_teacher": cfg.no_teacher,
    }


def default_config() -> RunConfig:
    return config_from_dict({})
