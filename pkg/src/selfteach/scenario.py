"""Seeded synthetic self-training scenarios.

Each iteration emits a batch of scored detections from a class-imbalanced,
drifting Beta confidence model, ground-truth boxes for the true positives,
and a feature pyramid for masking. Everything is derived from
(seed, iteration), so streams are reproducible and resumable without any
mutable generator state.

Geometry: one synthetic image per iteration, divided into a grid of cells.
Every detection occupies its own cell; a true positive's box jitters around
that cell's ground-truth box (overlap stays >= 0.7 IoU by construction),
while a false positive sits centered in a cell that has no ground truth, so
it is disjoint from every ground-truth box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .labels import Detection, GroundTruthBox
from .masking import FeatureMap


@dataclass(frozen=True)
class ClassSpec:
    """Prevalence weight and linear confidence drift for one class."""

    class_id: int
    weight: float
    mean_start: float
    mean_end: float
    var_start: float
    var_end: float

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ConfigError(f"class {self.class_id}: weight must be > 0, got {self.weight}")
        for name, mean in (("mean_start", self.mean_start), ("mean_end", self.mean_end)):
            if not 0.0 < mean < 1.0:
                raise ConfigError(f"class {self.class_id}: {name} must lie in (0, 1), got {mean}")
        for name, var, mean in (
            ("var_start", self.var_start, self.mean_start),
            ("var_end", self.var_end, self.mean_end),
        ):
            if var < 0:
                raise ConfigError(f"class {self.class_id}: {name} must be >= 0, got {var}")
            if var > 0 and var >= mean * (1.0 - mean):
                raise ConfigError(
                    f"class {self.class_id}: {name}={var} is infeasible for a Beta "
                    f"distribution with mean {mean} (needs var < mean*(1-mean))"
                )


@dataclass(frozen=True)
class GridSpec:
    """Cell grid a scene's boxes are laid out on."""

    rows: int = 8
    cols: int = 8
    cell: float = 80.0
    box_w: float = 44.0
    box_h: float = 36.0
    jitter: float = 0.08

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid: rows/cols must be >= 1, got {self.rows}x{self.cols}")
        if self.box_w <= 0 or self.box_h <= 0 or self.cell <= 0:
            raise ConfigError("grid: cell and box extents must be > 0")
        if not 0.0 <= self.jitter <= 0.08:
            raise ConfigError(
                f"grid: jitter must lie in [0, 0.08] to keep true-positive overlap >= 0.7, got {self.jitter}"
            )
        # jittered boxes must stay inside their cell so cross-cell boxes stay disjoint
        if self.box_w * (1 + 2 * self.jitter) > self.cell or self.box_h * (1 + 2 * self.jitter) > self.cell:
            raise ConfigError("grid: jittered box does not fit inside one cell")


def _default_classes() -> tuple[ClassSpec, ...]:
    # heavy class imbalance with the rare classes starting least confident
    return (
        ClassSpec(class_id=1, weight=10.0, mean_start=0.40, mean_end=0.62, var_start=0.020, var_end=0.020),
        ClassSpec(class_id=2, weight=3.0, mean_start=0.32, mean_end=0.58, var_start=0.030, var_end=0.025),
        ClassSpec(class_id=3, weight=2.0, mean_start=0.28, mean_end=0.55, var_start=0.030, var_end=0.030),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    classes: tuple[ClassSpec, ...] = field(default_factory=_default_classes)
    rho: float = 1.0
    detections_per_iter: int = 60
    grid: GridSpec = field(default_factory=GridSpec)
    pyramid: tuple[tuple[int, int, int], ...] = ((8, 32, 32), (12, 16, 16), (16, 8, 8))
    field_rank: int = 4
    field_scale: float = 3.0
    teach_scale: float = 1.5
    label_gain: float = 0.25
    recon_gain: float = 0.15
    bonus_cap: float = 0.5
    seed: int = 42

    def __post_init__(self) -> None:
        if not self.classes:
            raise ConfigError("scenario: needs at least one class")
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"scenario: duplicate class ids in {ids}")
        if self.rho < 0:
            raise ConfigError(f"rho: must be >= 0, got {self.rho}")
        if self.detections_per_iter < 1:
            raise ConfigError(f"detections_per_iter: must be >= 1, got {self.detections_per_iter}")
        if self.detections_per_iter > self.grid.rows * self.grid.cols:
            raise ConfigError(
                f"detections_per_iter={self.detections_per_iter} exceeds the "
                f"{self.grid.rows * self.grid.cols} grid cells"
            )
        if not self.pyramid:
            raise ConfigError("pyramid: needs at least one level")
        for shape in self.pyramid:
            if len(shape) != 3 or min(shape) < 1:
                raise ConfigError(f"pyramid: levels must be (C, H, W) with dims >= 1, got {shape}")
        if self.field_rank < 1:
            raise ConfigError(f"field_rank: must be >= 1, got {self.field_rank}")
        if self.field_scale <= 0:
            raise ConfigError(f"field_scale: must be > 0, got {self.field_scale}")
        for name, value in (
            ("teach_scale", self.teach_scale),
            ("label_gain", self.label_gain),
            ("recon_gain", self.recon_gain),
            ("bonus_cap", self.bonus_cap),
        ):
            if value < 0:
                raise ConfigError(f"{name}: must be >= 0, got {value}")

    @property
    def class_ids(self) -> list[int]:
        return [c.class_id for c in self.classes]


@dataclass
class IterationBatch:
    """Everything one training iteration consumes."""

    iteration: int
    detections: list[Detection]
    tp_flags: list[bool]
    ground_truth: list[GroundTruthBox]
    pyramid: list[FeatureMap]
    l_teach: float


def drifted_params(cfg: ScenarioConfig, run_fraction: float) -> dict[int, tuple[float, float]]:
    """Per-class (mean, var) linearly interpolated over the run fraction."""
    if not 0.0 <= run_fraction <= 1.0:
        raise InputError(f"run_fraction must lie in [0, 1], got {run_fraction}")
    out = {}
    for spec in cfg.classes:
        mean = spec.mean_start + (spec.mean_end - spec.mean_start) * run_fraction
        var = spec.var_start + (spec.var_end - spec.var_start) * run_fraction
        out[spec.class_id] = (mean, var)
    return out


def beta_from_moments(mean: float, var: float) -> tuple[float, float]:
    """Shape parameters of the Beta distribution with the given moments."""
    if not 0.0 < mean < 1.0:
        raise InputError(f"mean must lie in (0, 1), got {mean}")
    if not 0.0 < var < mean * (1.0 - mean):
        raise ConfigError(
            f"var={var} infeasible for Beta with mean={mean} (needs 0 < var < mean*(1-mean))"
        )
    common = mean * (1.0 - mean) / var - 1.0
    return mean * common, (1.0 - mean) * common


def moments_from_beta(a: float, b: float) -> tuple[float, float]:
    """Mean and variance of Beta(a, b)."""
    if a <= 0 or b <= 0:
        raise InputError(f"shape parameters must be > 0, got ({a}, {b})")
    mean = a / (a + b)
    var = a * b / ((a + b) ** 2 * (a + b + 1.0))
    return mean, var


def iteration_rng(seed: int, iteration: int, tag: int = 0) -> np.random.Generator:
    """Fresh generator for one iteration of one stream."""
    return np.random.default_rng([seed, iteration, tag])


def field_mixing(cfg: ScenarioConfig) -> list[np.ndarray]:
    """Per-level channel-mixing matrices, fixed for a run.

    Feature values are scale * M @ z with z iid standard normal, i.e. a
    Gaussian field with a fixed low-rank channel covariance - something a
    streaming decoder can actually learn across iterations.
    """
    mats = []
    for level, (channels, _, _) in enumerate(cfg.pyramid, start=1):
        rng = np.random.default_rng([cfg.seed, 0, 100 + level])
        mats.append(rng.normal(size=(channels, cfg.field_rank)) / np.sqrt(cfg.field_rank))
    return mats


def _shifted_params(
    cfg: ScenarioConfig, run_fraction: float, mean_shift: float
) -> dict[int, tuple[float, float]]:
    params = drifted_params(cfg, run_fraction)
    if mean_shift == 0.0:
        return params
    out = {}
    for cid, (mean, var) in params.items():
        mean = min(max(mean + mean_shift, 0.02), 0.98)
        cap = 0.9 * mean * (1.0 - mean)
        out[cid] = (mean, min(var, cap))
    return out


def generate_iteration(
    cfg: ScenarioConfig,
    iteration: int,
    total_iters: int,
    mean_shift: float = 0.0,
    mixing: list[np.ndarray] | None = None,
) -> IterationBatch:
    """Deterministic batch for one iteration.

    Draw order is fixed (classes, cells, per-detection score/flag/jitter,
    pyramid, teaching loss); do not reorder, or resumed runs will diverge.
    """
    if total_iters < 1:
        raise InputError(f"total_iters must be >= 1, got {total_iters}")
    if not 1 <= iteration <= total_iters:
        raise InputError(f"iteration must lie in [1, {total_iters}], got {iteration}")
    rng = iteration_rng(cfg.seed, iteration)
    params = _shifted_params(cfg, iteration / total_iters, mean_shift)
    grid = cfg.grid

    ids = np.array(cfg.class_ids)
    weights = np.array([c.weight for c in cfg.classes], dtype=np.float64)
    chosen = rng.choice(ids, size=cfg.detections_per_iter, p=weights / weights.sum())
    cells = rng.choice(grid.rows * grid.cols, size=cfg.detections_per_iter, replace=False)

    detections: list[Detection] = []
    tp_flags: list[bool] = []
    ground_truth: list[GroundTruthBox] = []
    for class_id, cell in zip(chosen.tolist(), cells.tolist()):
        mean, var = params[class_id]
        if var > 0.0:
            a, b = beta_from_moments(mean, var)
            score = float(rng.beta(a, b))
        else:
            score = mean
        is_tp = bool(rng.random() < score**cfg.rho)
        row, col = divmod(cell, grid.cols)
        gx = col * grid.cell + (grid.cell - grid.box_w) / 2.0
        gy = row * grid.cell + (grid.cell - grid.box_h) / 2.0
        if is_tp:
            dx = float(rng.uniform(-grid.jitter, grid.jitter)) * grid.box_w
            dy = float(rng.uniform(-grid.jitter, grid.jitter)) * grid.box_h
            bbox = (gx + dx, gy + dy, grid.box_w, grid.box_h)
            ground_truth.append(
                GroundTruthBox(image_id=iteration, class_id=class_id, bbox=(gx, gy, grid.box_w, grid.box_h))
            )
        else:
            bbox = (gx, gy, grid.box_w, grid.box_h)
        detections.append(
            Detection(image_id=iteration, class_id=class_id, score=score, bbox=bbox)
        )
        tp_flags.append(is_tp)

    if mixing is None:
        mixing = field_mixing(cfg)
    pyramid = []
    for level, ((channels, height, width), mat) in enumerate(zip(cfg.pyramid, mixing), start=1):
        z = rng.normal(size=(cfg.field_rank, height * width))
        values = (cfg.field_scale * (mat @ z)).reshape(channels, height, width)
        pyramid.append(FeatureMap(level=level, values=values))

    wsum = float(weights.sum())
    wmean = float(sum(w * params[c][0] for w, c in zip(weights.tolist(), ids.tolist()))) / wsum
    l_teach = cfg.teach_scale * (1.0 - wmean) * (0.9 + 0.2 * float(rng.random()))
    return IterationBatch(
        iteration=iteration,
        detections=detections,
        tp_flags=tp_flags,
        ground_truth=ground_truth,
        pyramid=pyramid,
        l_teach=l_teach,
    )


class SyntheticPredictor:
    """Detection source whose confidence distributions respond to feedback.

    Good pseudo-labels (high macro-F1) and mastered reconstruction of the
    visible feature positions both push the class means upward, making the
    control loops observable without a real detector. ``mu_used`` is part
    of the feedback interface for custom predictors; the default coupling
    reads only quality and skill (a high fixed mask ratio hurts indirectly,
    by slowing skill growth on the thinner visible fraction).
    """

    def __init__(self, cfg: ScenarioConfig, total_iters: int):
        self.cfg = cfg
        self.total_iters = total_iters
        self.drift_bonus = 0.0
        self._mixing = field_mixing(cfg)

    def predict(self, iteration: int) -> IterationBatch:
        return generate_iteration(
            self.cfg,
            iteration,
            self.total_iters,
            mean_shift=self.drift_bonus,
            mixing=self._mixing,
        )

    def absorb_feedback(self, f1: float, mu_used: float, recon_skill: float) -> None:
        gain = self.cfg.label_gain * f1 + self.cfg.recon_gain * recon_skill
        self.drift_bonus = min(self.cfg.bonus_cap, self.drift_bonus + gain / self.total_iters)

    def state_to_dict(self) -> dict:
        return {"drift_bonus": self.drift_bonus}

    def state_from_dict(self, data: dict) -> None:
        self.drift_bonus = float(data["drift_bonus"])


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "classes": [
            {
                "class_id": c.class_id,
                "weight": c.weight,
                "mean_start": c.mean_start,
                "mean_end": c.mean_end,
                "var_start": c.var_start,
                "var_end": c.var_end,
            }
            for c in cfg.classes
        ],
        "rho": cfg.rho,
        "detections_per_iter": cfg.detections_per_iter,
        "grid": {
            "rows": cfg.grid.rows,
            "cols": cfg.grid.cols,
            "cell": cfg.grid.cell,
            "box_w": cfg.grid.box_w,
            "box_h": cfg.grid.box_h,
            "jitter": cfg.grid.jitter,
        },
        "pyramid": [list(shape) for shape in cfg.pyramid],
        "field_rank": cfg.field_rank,
        "field_scale": cfg.field_scale,
        "teach_scale": cfg.teach_scale,
        "label_gain": cfg.label_gain,
        "recon_gain": cfg.recon_gain,
        "bonus_cap": cfg.bonus_cap,
        "seed": cfg.seed,
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    if "classes" in data:
        data["classes"] = tuple(ClassSpec(**c) for c in data["classes"])
    if "grid" in data:
        data["grid"] = GridSpec(**data["grid"])
    if "pyramid" in data:
        data["pyramid"] = tuple(tuple(int(v) for v in shape) for shape in data["pyramid"])
    return ScenarioConfig(**data)
