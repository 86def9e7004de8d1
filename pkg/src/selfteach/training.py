"""Mean-teacher loop wiring: EMA updates, selective resets, and the
per-iteration chain teacher prediction -> threshold update -> filtering ->
student step -> masking/reconstruction -> loss feedback.

The teacher/student "networks" are named segments of plain parameter
vectors; their drift is synthetic (seeded, quality-scaled) because the loop
is about the control dynamics, not about detector training itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import decoder as dec
from . import mask_schedule as sched
from . import thresholds as thr
from .errors import ConfigError, InputError, StateError
from .labels import ClassMetrics, filter_detections, macro_f1, match_metrics
from .masking import apply_mask, derived_seed, generate_mask, region_mse, total_loss
from .scenario import ScenarioConfig, SyntheticPredictor

SEGMENTS = ("backbone", "encoder", "other")


@dataclass
class ParamVector:
    """Named parameter segments, each a finite 1-D float64 vector."""

    backbone: np.ndarray
    encoder: np.ndarray
    other: np.ndarray

    def __post_init__(self) -> None:
        for name in SEGMENTS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise InputError(f"segment {name} must be 1-D")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"segment {name} must be finite")
            setattr(self, name, arr)

    def copy(self) -> "ParamVector":
        return ParamVector(self.backbone.copy(), self.encoder.copy(), self.other.copy())

    def shapes(self) -> tuple[int, ...]:
        return tuple(getattr(self, name).size for name in SEGMENTS)


@dataclass
class TeacherStudentState:
    teacher: ParamVector
    student: ParamVector
    source: ParamVector
    momentum: float
    iteration: int = 0
    epoch: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.momentum < 1.0:
            raise InputError(f"momentum must lie in (0, 1), got {self.momentum}")
        if not self.teacher.shapes() == self.student.shapes() == self.source.shapes():
            raise StateError("teacher/student/source segment shapes differ")


@dataclass(frozen=True)
class LoopConfig:
    total_epochs: int = 8
    iters_per_epoch: int = 25
    srs_epochs: tuple[int, ...] | None = None  # default: one reset at ceil(total/2)
    momentum: float = 0.999
    seed: int = 42
    backbone_size: int = 32
    encoder_size: int = 32
    other_size: int = 16
    drift_scale: float = 0.02

    def __post_init__(self) -> None:
        if self.total_epochs < 1:
            raise ConfigError(f"total_epochs: must be >= 1, got {self.total_epochs}")
        if self.iters_per_epoch < 1:
            raise ConfigError(f"iters_per_epoch: must be >= 1, got {self.iters_per_epoch}")
        if not 0.0 < self.momentum < 1.0:
            raise ConfigError(f"momentum: must lie in (0, 1), got {self.momentum}")
        if self.srs_epochs is None:
            object.__setattr__(self, "srs_epochs", (math.ceil(self.total_epochs / 2),))
        else:
            object.__setattr__(self, "srs_epochs", tuple(sorted(int(e) for e in self.srs_epochs)))
        for e in self.srs_epochs:
            if not 1 <= e <= self.total_epochs:
                raise ConfigError(
                    f"srs_epochs: epoch {e} outside [1, {self.total_epochs}]"
                )
        for name in ("backbone_size", "encoder_size", "other_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.drift_scale < 0:
            raise ConfigError(f"drift_scale: must be >= 0, got {self.drift_scale}")

    @property
    def total_iters(self) -> int:
        return self.total_epochs * self.iters_per_epoch


def init_teacher_student(cfg: LoopConfig) -> TeacherStudentState:
    """Source weights seeded once; student and teacher start as copies."""
    rng = np.random.default_rng([cfg.seed, 0, 1])
    source = ParamVector(
        backbone=rng.normal(size=cfg.backbone_size),
        encoder=rng.normal(size=cfg.encoder_size),
        other=rng.normal(size=cfg.other_size),
    )
    return TeacherStudentState(
        teacher=source.copy(), student=source.copy(), source=source, momentum=cfg.momentum
    )


def ema_update(state: TeacherStudentState) -> TeacherStudentState:
    """teacher <- m*teacher + (1-m)*student, elementwise, all segments."""
    if state.teacher.shapes() != state.student.shapes():
        raise StateError("teacher/student segment shapes differ")
    m = state.momentum
    teacher = ParamVector(
        *(m * getattr(state.teacher, s) + (1.0 - m) * getattr(state.student, s) for s in SEGMENTS)
    )
    return replace(state, teacher=teacher)


def srs_reset(state: TeacherStudentState, cfg: LoopConfig) -> TeacherStudentState:
    """Reset the student's backbone and encoder to the source weights.

    Only valid in a scheduled epoch; the student's other segment and the
    teacher are untouched.
    """
    if state.epoch not in cfg.srs_epochs:
        raise StateError(
            f"selective reset not scheduled for epoch {state.epoch} (schedule: {cfg.srs_epochs})"
        )
    student = ParamVector(
        backbone=state.source.backbone.copy(),
        encoder=state.source.encoder.copy(),
        other=state.student.other,
    )
    return replace(state, student=student)


@dataclass
class MetricsRow:
    """One iteration of the run; `thresholds` maps class id -> N."""

    iteration: int
    epoch: int
    mu: float
    eta: float
    gamma: float | None
    l_mask: float
    l_teach: float
    l_total: float
    kept: int
    total: int
    precision: float
    recall: float
    f1: float
    thresholds: dict[int, float]
    per_class: dict[int, ClassMetrics]
    stats: dict[int, tuple[float, float] | None]  # class -> (mean, var) if updated


@dataclass
class MetricsLog:
    class_ids: list[int]
    rows: list[MetricsRow] = field(default_factory=list)


class TrainingEngine:
    """Drives one simulated self-training run, one iteration per step().

    All state lives on the engine and serializes into the checkpoint dict;
    randomness is re-derived from (seed, iteration) streams each step, so a
    restored engine continues bit-identically.
    """

    def __init__(
        self,
        scenario_cfg: ScenarioConfig,
        scheduler_cfg: sched.SchedulerConfig,
        threshold_cfg: thr.ThresholdConfig,
        loop_cfg: LoopConfig,
        decoder_cfg: dec.DecoderConfig | None = None,
        fixed_mask_ratio: float | None = None,
        fixed_threshold: float | None = None,
        no_teacher: bool = False,
        predictor: SyntheticPredictor | None = None,
    ):
        if threshold_cfg.total_iters != loop_cfg.total_iters:
            raise ConfigError(
                f"thresholds total_iters={threshold_cfg.total_iters} must equal "
                f"loop total_epochs*iters_per_epoch={loop_cfg.total_iters}"
            )
        if scheduler_cfg.total_epochs != loop_cfg.total_epochs:
            raise ConfigError(
                f"scheduler total_epochs={scheduler_cfg.total_epochs} must equal "
                f"loop total_epochs={loop_cfg.total_epochs}"
            )
        if fixed_mask_ratio is not None and not 0.0 <= fixed_mask_ratio <= 1.0:
            raise ConfigError(f"fixed_mask_ratio: must lie in [0, 1], got {fixed_mask_ratio}")
        if fixed_threshold is not None and not 0.0 <= fixed_threshold <= 1.0:
            raise ConfigError(f"fixed_threshold: must lie in [0, 1], got {fixed_threshold}")
        self.scenario_cfg = scenario_cfg
        self.scheduler_cfg = scheduler_cfg
        self.threshold_cfg = threshold_cfg
        self.loop_cfg = loop_cfg
        self.decoder_cfg = decoder_cfg or dec.DecoderConfig()
        self.fixed_mask_ratio = fixed_mask_ratio
        self.fixed_threshold = fixed_threshold
        self.no_teacher = no_teacher

        self.predictor = predictor or SyntheticPredictor(scenario_cfg, loop_cfg.total_iters)
        self.scheduler = sched.init_state(scheduler_cfg)
        self.thr_states = thr.init_states(scenario_cfg.class_ids, threshold_cfg)
        self.ts = init_teacher_student(loop_cfg)
        channels = scenario_cfg.pyramid[-1][0]
        self.decoder = dec.init_params(
            channels, self.decoder_cfg.hidden_dim, seed=derived_seed(loop_cfg.seed, 0, 2)
        )
        self.iteration = 0
        self.epoch_losses: list[float] = []  # feedback losses of the open epoch
        self.epoch_counts: dict[int, list[int]] = {
            cid: [0, 0, 0] for cid in scenario_cfg.class_ids
        }
        self.log = MetricsLog(class_ids=list(scenario_cfg.class_ids))
        self.confidence_trace: list[dict] | None = None  # set to [] to record

    @property
    def total_iters(self) -> int:
        return self.loop_cfg.total_iters

    def step(self) -> MetricsRow:
        if self.iteration >= self.total_iters:
            raise StateError(f"run already complete at iteration {self.iteration}")
        i = self.iteration + 1
        epoch = (i - 1) // self.loop_cfg.iters_per_epoch + 1

        if (i - 1) % self.loop_cfg.iters_per_epoch == 0:
            self.scheduler = sched.advance_epoch(self.scheduler, self.scheduler_cfg)
            self.ts = replace(self.ts, epoch=epoch)
            if epoch in self.loop_cfg.srs_epochs:
                self.ts = srs_reset(self.ts, self.loop_cfg)
            self.epoch_counts = {cid: [0, 0, 0] for cid in self.scenario_cfg.class_ids}

        try:
            batch = self.predictor.predict(i)
        except Exception as exc:
            raise StateError(f"predictor failed at iteration {i}: {exc}") from exc

        # threshold update from the full teacher batch, then filtering
        conf_batch: dict[int, list[float]] = {cid: [] for cid in self.scenario_cfg.class_ids}
        for det in batch.detections:
            conf_batch.setdefault(det.class_id, []).append(det.score)
        gamma: float | None
        stats: dict[int, tuple[float, float] | None]
        if self.fixed_threshold is None:
            before = {cid: st.sample_count for cid, st in self.thr_states.items()}
            self.thr_states = thr.update_all(self.thr_states, conf_batch, i, self.threshold_cfg)
            gamma = thr.smoothing_coefficient(i, self.threshold_cfg.total_iters, self.threshold_cfg)
            thresholds = {cid: st.n for cid, st in self.thr_states.items()}
            stats = {
                cid: (st.last_mean, st.last_var) if st.sample_count > before[cid] else None
                for cid, st in self.thr_states.items()
            }
        else:
            gamma = None
            thresholds = {cid: self.fixed_threshold for cid in self.scenario_cfg.class_ids}
            stats = {cid: None for cid in self.scenario_cfg.class_ids}
        if self.confidence_trace is not None:
            self.confidence_trace.append(
                {"iteration": i, "confidences": {str(c): v for c, v in conf_batch.items()}}
            )
        report = filter_detections(batch.detections, thresholds)
        metrics = match_metrics(report.kept, batch.ground_truth)
        for cid, m in metrics.items():
            tally = self.epoch_counts[cid]
            tally[0] += m.tp
            tally[1] += m.fp
            tally[2] += m.fn
        f1 = macro_f1(metrics, self.scenario_cfg.class_ids)
        prec = sum(
            metrics[c].precision if c in metrics else 0.0 for c in self.scenario_cfg.class_ids
        ) / len(self.scenario_cfg.class_ids)
        rec = sum(
            metrics[c].recall if c in metrics else 0.0 for c in self.scenario_cfg.class_ids
        ) / len(self.scenario_cfg.class_ids)

        # mask every level at the current ratio; reconstruct the last level only
        mu_used = self.scheduler.mu if self.fixed_mask_ratio is None else self.fixed_mask_ratio
        plans = [
            generate_mask(f.height, f.width, mu_used, derived_seed(self.loop_cfg.seed, f.level, i), f.level)
            for f in batch.pyramid
        ]
        masked = [apply_mask(f, plan) for f, plan in zip(batch.pyramid, plans)]
        target = batch.pyramid[-1]
        recon = dec.forward(self.decoder, masked[-1])
        l_mask, grads = dec.loss_and_grad(self.decoder, masked[-1], target)
        self.decoder = dec.sgd_step(self.decoder, grads, self.decoder_cfg.lr)
        _, unmasked_mse = region_mse(recon, target, plans[-1])
        target_var = float(target.values.var())
        skill = min(1.0, max(0.0, 1.0 - unmasked_mse / target_var)) if target_var > 0 else 0.0

        # student: quality-scaled synthetic drift, then the teacher EMA
        self.predictor.absorb_feedback(f1, mu_used, skill)
        walk = np.random.default_rng([self.loop_cfg.seed, i, 3])
        scale = self.loop_cfg.drift_scale * (0.25 + f1)
        student = ParamVector(
            *(getattr(self.ts.student, s) + scale * walk.normal(size=getattr(self.ts.student, s).size) for s in SEGMENTS)
        )
        self.ts = replace(self.ts, student=student, iteration=i)
        if not self.no_teacher:
            self.ts = ema_update(self.ts)

        pair = total_loss(l_mask, batch.l_teach)
        feedback = l_mask if self.scheduler_cfg.loss_source == "mask" else pair.total
        if self.fixed_mask_ratio is None:
            if self.scheduler_cfg.mu_cadence == "iteration":
                self.scheduler = sched.update_mask_ratio(self.scheduler, feedback, self.scheduler_cfg)
            else:
                self.epoch_losses.append(feedback)
                if i % self.loop_cfg.iters_per_epoch == 0:
                    epoch_mean = sum(self.epoch_losses) / len(self.epoch_losses)
                    self.scheduler = sched.update_mask_ratio(self.scheduler, epoch_mean, self.scheduler_cfg)
                    self.epoch_losses = []

        row = MetricsRow(
            iteration=i,
            epoch=epoch,
            mu=mu_used,
            eta=self.scheduler.eta,
            gamma=gamma,
            l_mask=l_mask,
            l_teach=batch.l_teach,
            l_total=pair.total,
            kept=len(report.kept),
            total=len(batch.detections),
            precision=prec,
            recall=rec,
            f1=f1,
            thresholds=dict(thresholds),
            per_class=metrics,
            stats=stats,
        )
        self.iteration = i
        self.log.rows.append(row)
        return row

    def run(self, max_iterations: int | None = None) -> MetricsLog:
        """Run to completion (or for ``max_iterations`` more steps)."""
        end = self.total_iters if max_iterations is None else min(
            self.total_iters, self.iteration + max_iterations
        )
        while self.iteration < end:
            self.step()
        return self.log

    def epoch_summary(self) -> dict[int, ClassMetrics]:
        """Aggregate per-class counts over the most recent (open) epoch."""
        return {
            cid: ClassMetrics(tp=t[0], fp=t[1], fn=t[2])
            for cid, t in self.epoch_counts.items()
        }

    # --- checkpoint fragments ------------------------------------------------

    def states_to_dict(self) -> dict:
        return {
            "scheduler": sched.state_to_dict(self.scheduler),
            "thresholds": {str(cid): thr.state_to_dict(st) for cid, st in self.thr_states.items()},
            "teacher_student": {
                "momentum": self.ts.momentum,
                "iteration": self.ts.iteration,
                "epoch": self.ts.epoch,
                **{
                    f"{role}_{seg}": getattr(getattr(self.ts, role), seg).tolist()
                    for role in ("teacher", "student", "source")
                    for seg in SEGMENTS
                },
            },
            "decoder": dec.params_to_dict(self.decoder),
            "predictor": self.predictor.state_to_dict(),
            "cursor": {"iteration": self.iteration},
            "epoch_losses": list(self.epoch_losses),
            "epoch_counts": {str(cid): list(t) for cid, t in self.epoch_counts.items()},
        }

    def restore_states(self, data: dict) -> None:
        self.scheduler = sched.state_from_dict(data["scheduler"])
        self.thr_states = {
            int(cid): thr.state_from_dict(st) for cid, st in data["thresholds"].items()
        }
        ts = data["teacher_student"]
        vectors = {
            role: ParamVector(*(np.array(ts[f"{role}_{seg}"], dtype=np.float64) for seg in SEGMENTS))
            for role in ("teacher", "student", "source")
        }
        self.ts = TeacherStudentState(
            teacher=vectors["teacher"],
            student=vectors["student"],
            source=vectors["source"],
            momentum=float(ts["momentum"]),
            iteration=int(ts["iteration"]),
            epoch=int(ts["epoch"]),
        )
        self.decoder = dec.params_from_dict(data["decoder"])
        self.predictor.state_from_dict(data["predictor"])
        self.iteration = int(data["cursor"]["iteration"])
        self.epoch_losses = [float(x) for x in data["epoch_losses"]]
        self.epoch_counts = {int(cid): [int(v) for v in t] for cid, t in data["epoch_counts"].items()}


def run_training(
    predictor: SyntheticPredictor,
    scheduler_cfg: sched.SchedulerConfig,
    threshold_cfg: thr.ThresholdConfig,
    loop_cfg: LoopConfig,
    scenario_cfg: ScenarioConfig,
    **engine_kwargs,
) -> MetricsLog:
    """Wire the full loop over a predictor and run every iteration."""
    engine = TrainingEngine(
        scenario_cfg, scheduler_cfg, threshold_cfg, loop_cfg, predictor=predictor, **engine_kwargs
    )
    return engine.run()
