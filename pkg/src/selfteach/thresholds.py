"""Per-class pseudo-label thresholds with variance feedback and smoothing.

Each class keeps a threshold N that blends its previous value with a target
computed from the class's current confidence statistics: alpha_dt*sqrt(mean)
minus a variance penalty beta*var, clamped to [min_dt, max_dt]. The blend
weight gamma follows a sigmoid in training progress.

``gamma_mode`` exists because the two available definitions disagree:

* ``"literal"``   - 1 / (1 + exp(-alpha_at * x)), which rises 0.5 -> ~1
  over the run;
* ``"described"`` - 1 / (1 + exp(alpha_at * (x - 0.5))), which falls ~1 -> ~0
  so early training leans on history and late training on fresh statistics.

The described behavior is the default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InputError

GAMMA_MODES = ("described", "literal")


@dataclass(frozen=True)
class ThresholdConfig:
    alpha_dt: float = 0.5
    beta: float = 0.2
    min_dt: float = 0.25
    max_dt: float = 0.45
    alpha_at: float = 10.0
    gamma_mode: str = "described"
    stats_floor: float = 0.05
    n_init: float = 0.3
    total_iters: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 <= self.min_dt <= self.n_init <= self.max_dt <= 1.0:
            raise ConfigError(
                f"threshold bounds: need 0 <= min_dt <= n_init <= max_dt <= 1, got "
                f"min_dt={self.min_dt}, n_init={self.n_init}, max_dt={self.max_dt}"
            )
        if self.alpha_dt < 0:
            raise ConfigError(f"alpha_dt: must be >= 0, got {self.alpha_dt}")
        if self.beta < 0:
            raise ConfigError(f"beta: must be >= 0, got {self.beta}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ConfigError(f"gamma_mode: must be one of {GAMMA_MODES}, got {self.gamma_mode!r}")
        if not 0.0 <= self.stats_floor <= 1.0:
            raise ConfigError(f"stats_floor: must lie in [0, 1], got {self.stats_floor}")
        if self.total_iters < 1:
            raise ConfigError(f"total_iters: must be >= 1, got {self.total_iters}")


@dataclass(frozen=True)
class ClassThresholdState:
    """Current and previous threshold plus the last admitted statistics."""

    class_id: int
    n: float
    n_old: float
    last_mean: float | None = None
    last_var: float | None = None
    sample_count: int = 0


def init_states(class_ids: list[int], cfg: ThresholdConfig) -> dict[int, ClassThresholdState]:
    """One state per class, thresholds at n_init."""
    return {
        cid: ClassThresholdState(class_id=cid, n=cfg.n_init, n_old=cfg.n_init)
        for cid in class_ids
    }


def smoothing_coefficient(current_iter: int, total_iters: int, cfg: ThresholdConfig) -> float:
    """Blend weight gamma at progress current_iter/total_iters."""
    if total_iters <= 0:
        raise InputError(f"total_iters must be > 0, got {total_iters}")
    if not 0 <= current_iter <= total_iters:
        raise InputError(
            f"current_iter must lie in [0, {total_iters}], got {current_iter}"
        )
    x = current_iter / total_iters
    if cfg.gamma_mode == "literal":
        return 1.0 / (1.0 + math.exp(-cfg.alpha_at * x))
    return 1.0 / (1.0 + math.exp(cfg.alpha_at * (x - 0.5)))


def class_stats(confidences: list[float]) -> tuple[float, float] | None:
    """Arithmetic mean and population variance (divide by n).

    Returns None for an empty list - the class gets no update this round.
    """
    if not confidences:
        return None
    for c in confidences:
        if not (math.isfinite(c) and 0.0 <= c <= 1.0):
            raise InputError(f"confidence must lie in [0, 1], got {c}")
    mean = sum(confidences) / len(confidences)
    var = sum((c - mean) ** 2 for c in confidences) / len(confidences)
    return mean, var


def update_threshold(
    n_old: float, mean: float, var: float, gamma: float, cfg: ThresholdConfig
) -> float:
    """clamp(gamma*n_old + (1-gamma)*(alpha_dt*sqrt(mean) - beta*var))."""
    for name, value in (("n_old", n_old), ("mean", mean), ("var", var), ("gamma", gamma)):
        if not math.isfinite(value):
            raise InputError(f"{name} must be finite, got {value}")
    if not 0.0 <= mean <= 1.0:
        raise InputError(f"mean must lie in [0, 1], got {mean}")
    if var < 0.0:
        raise InputError(f"var must be >= 0, got {var}")
    if not 0.0 <= gamma <= 1.0:
        raise InputError(f"gamma must lie in [0, 1], got {gamma}")
    target = cfg.alpha_dt * math.sqrt(mean) - cfg.beta * var
    n = gamma * n_old + (1.0 - gamma) * target
    return min(max(n, cfg.min_dt), cfg.max_dt)


def update_all(
    states: dict[int, ClassThresholdState],
    batch: dict[int, list[float]],
    current_iter: int,
    cfg: ThresholdConfig,
) -> dict[int, ClassThresholdState]:
    """Update every class that has admissible confidences this round.

    Confidences below ``stats_floor`` are excluded from the statistics;
    classes with no admissible samples keep their threshold unchanged.
    Classes are independent given gamma, so the result does not depend on
    evaluation order.
    """
    gamma = smoothing_coefficient(current_iter, cfg.total_iters, cfg)
    out = dict(states)
    for cid in batch:
        if cid not in states:
            raise InputError(f"unknown class id in batch: {cid}")
    for cid, confidences in batch.items():
        admitted = [c for c in confidences if c >= cfg.stats_floor]
        stats = class_stats(admitted)
        if stats is None:
            continue
        mean, var = stats
        prev = states[cid]
        out[cid] = ClassThresholdState(
            class_id=cid,
            n=update_threshold(prev.n, mean, var, gamma, cfg),
            n_old=prev.n,
            last_mean=mean,
            last_var=var,
            sample_count=prev.sample_count + len(admitted),
        )
    return out


def config_to_dict(cfg: ThresholdConfig) -> dict:
    return {
        "alpha_dt": cfg.alpha_dt,
        "beta": cfg.beta,
        "min_dt": cfg.min_dt,
        "max_dt": cfg.max_dt,
        "alpha_at": cfg.alpha_at,
        "gamma_mode": cfg.gamma_mode,
        "stats_floor": cfg.stats_floor,
        "n_init": cfg.n_init,
        "total_iters": cfg.total_iters,
    }


def config_from_dict(data: dict) -> ThresholdConfig:
    return ThresholdConfig(**data)


def state_to_dict(state: ClassThresholdState) -> dict:
    return {
        "class_id": state.class_id,
        "n": state.n,
        "n_old": state.n_old,
        "last_mean": state.last_mean,
        "last_var": state.last_var,
        "sample_count": state.sample_count,
    }


def state_from_dict(data: dict) -> ClassThresholdState:
    return ClassThresholdState(
        class_id=int(data["class_id"]),
        n=float(data["n"]),
        n_old=float(data["n_old"]),
        last_mean=None if data["last_mean"] is None else float(data["last_mean"]),
        last_var=None if data["last_var"] is None else float(data["last_var"]),
        sample_count=int(data["sample_count"]),
    )
