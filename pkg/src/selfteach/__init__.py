"""Feedback controllers for mean-teacher self-training, plus a deterministic
simulation harness to audit their dynamics.

The two controllers:

* :mod:`selfteach.mask_schedule` - sigmoid-stepped, loss-feedback mask-ratio
  scheduling for masked feature reconstruction;
* :mod:`selfteach.thresholds` - smoothed, variance-penalized per-class
  pseudo-label confidence thresholds.

Supporting machinery: spatial feature masking and reconstruction losses
(:mod:`selfteach.masking`), a two-layer reconstruction head with analytic
gradients (:mod:`selfteach.decoder`), detection filtering and quality
metrics (:mod:`selfteach.labels`), the mean-teacher loop with EMA updates
and selective retraining (:mod:`selfteach.training`), synthetic scenarios
(:mod:`selfteach.scenario`), and run/config/checkpoint plumbing
(:mod:`selfteach.config`, :mod:`selfteach.runner`, :mod:`selfteach.cli`).
"""

from .decoder import (
    DecoderConfig,
    DecoderGrads,
    DecoderParams,
    forward,
    init_params,
    loss_and_grad,
    sgd_step,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    InputError,
    SelfTeachError,
    StateError,
)
from .labels import (
    ClassMetrics,
    Detection,
    FilterReport,
    GroundTruthBox,
    filter_detections,
    iou,
    macro_f1,
    match_metrics,
)
from .mask_schedule import (
    SchedulerConfig,
    SchedulerState,
    advance_epoch,
    init_state,
    loss_baseline,
    replay_epoch_losses,
    step_size,
    update_mask_ratio,
)
from .masking import (
    FeatureMap,
    LossPair,
    MaskPlan,
    apply_mask,
    derived_seed,
    generate_mask,
    mse_loss,
    total_loss,
)
from .scenario import (
    ClassSpec,
    GridSpec,
    IterationBatch,
    ScenarioConfig,
    SyntheticPredictor,
    beta_from_moments,
    drifted_params,
    generate_iteration,
    moments_from_beta,
)
from .thresholds import (
    ClassThresholdState,
    ThresholdConfig,
    class_stats,
    init_states,
    smoothing_coefficient,
    update_all,
    update_threshold,
)
from .training import (
    LoopConfig,
    MetricsLog,
    MetricsRow,
    ParamVector,
    TeacherStudentState,
    TrainingEngine,
    ema_update,
    init_teacher_student,
    run_training,
    srs_reset,
)

__version__ = "0.1.0"
