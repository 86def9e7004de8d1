"""Loss-feedback mask-ratio scheduling.

Two coupled rules drive the mask ratio used for feature masking:

* a sigmoid-shaped step size that starts near its maximum and shrinks as
  training progresses, so early epochs adapt fast and late epochs fine-tune;
* a direction rule that compares the current loss against the mean of a
  short loss history - the ratio is lowered when the loss is not improving
  (refocus on easier reconstruction) and raised when it is (add difficulty).

States are plain values: every update returns a new ``SchedulerState``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError, InputError, StateError

MU_CADENCES = ("iteration", "epoch")
LOSS_SOURCES = ("mask", "total")


@dataclass(frozen=True)
class SchedulerConfig:
    """Knobs of the mask-ratio controller.

    ``total_epochs`` is the horizon the epoch fraction is measured against;
    ``mu_cadence`` selects whether the ratio moves every training iteration
    (default) or once per epoch (strict single-loop replay), and
    ``loss_source`` selects which loss the feedback consumes.
    """

    eta_min: float = 0.01
    eta_max: float = 0.02
    k: float = 10.0
    midpoint: float = 0.5
    mu_0: float = 0.5
    mu_min: float = 0.1
    mu_max: float = 0.9
    loss_window: int = 3
    total_epochs: int = 100
    mu_cadence: str = "iteration"
    loss_source: str = "mask"

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta_min <= self.eta_max:
            raise ConfigError(
                f"eta_min/eta_max: need 0 <= eta_min <= eta_max, got "
                f"eta_min={self.eta_min}, eta_max={self.eta_max}"
            )
        if not 0.0 <= self.mu_min <= self.mu_0 <= self.mu_max <= 1.0:
            raise ConfigError(
                f"mu bounds: need 0 <= mu_min <= mu_0 <= mu_max <= 1, got "
                f"mu_min={self.mu_min}, mu_0={self.mu_0}, mu_max={self.mu_max}"
            )
        if self.loss_window < 1:
            raise ConfigError(f"loss_window: must be >= 1, got {self.loss_window}")
        if self.total_epochs < 1:
            raise ConfigError(f"total_epochs: must be >= 1, got {self.total_epochs}")
        if not self.k > 0:
            raise ConfigError(f"k: must be > 0, got {self.k}")
        if not 0.0 <= self.midpoint <= 1.0:
            raise ConfigError(f"midpoint: must lie in [0, 1], got {self.midpoint}")
        if self.mu_cadence not in MU_CADENCES:
            raise ConfigError(f"mu_cadence: must be one of {MU_CADENCES}, got {self.mu_cadence!r}")
        if self.loss_source not in LOSS_SOURCES:
            raise ConfigError(f"loss_source: must be one of {LOSS_SOURCES}, got {self.loss_source!r}")


@dataclass(frozen=True)
class SchedulerState:
    """Mask ratio, current step size, epoch counter and recent-loss window."""

    mu: float
    eta: float
    epoch: int = 0
    loss_history: tuple[float, ...] = ()
    update_count: int = 0


def init_state(cfg: SchedulerConfig) -> SchedulerState:
    """Fresh state: ratio at mu_0, step at eta_max, empty history."""
    return SchedulerState(mu=cfg.mu_0, eta=cfg.eta_max)


def _check_loss(l_current: float) -> float:
    l_current = float(l_current)
    if not math.isfinite(l_current) or l_current < 0.0:
        raise InputError(f"loss must be finite and >= 0, got {l_current}")
    return l_current


def step_size(x: float, cfg: SchedulerConfig) -> float:
    """Sigmoid-scheduled step size at epoch fraction ``x`` in [0, 1].

    Decreasing in ``x``: eta_max end at x=0, eta_min end at x=1.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise InputError(f"epoch fraction must lie in [0, 1], got {x}")
    sig = 1.0 / (1.0 + math.exp(-cfg.k * (x - cfg.midpoint)))
    return cfg.eta_min + (cfg.eta_max - cfg.eta_min) * (1.0 - sig)


def loss_baseline(state: SchedulerState, l_current: float, cfg: SchedulerConfig) -> float:
    """Mean of the newest ``loss_window`` history entries, or ``l_current``
    itself while the history is still shorter than the window."""
    l_current = _check_loss(l_current)
    if len(state.loss_history) >= cfg.loss_window:
        recent = state.loss_history[-cfg.loss_window:]
        return sum(recent) / len(recent)
    return l_current


def update_mask_ratio(state: SchedulerState, l_current: float, cfg: SchedulerConfig) -> SchedulerState:
    """One feedback update of the mask ratio.

    Ties (l_current == baseline) take the decrease branch, which is also why
    a too-short history - baseline falls back to l_current - decreases.
    The moved ratio is clamped to [mu_min, mu_max]; the loss is appended to
    the history afterwards, evicting the oldest entry when full.
    """
    l_current = _check_loss(l_current)
    l_mean = loss_baseline(state, l_current, cfg)
    if l_current >= l_mean:
        mu = state.mu - state.eta
    else:
        mu = state.mu + state.eta
    mu = min(max(mu, cfg.mu_min), cfg.mu_max)
    history = (state.loss_history + (l_current,))[-cfg.loss_window:]
    return replace(state, mu=mu, loss_history=history, update_count=state.update_count + 1)


def advance_epoch(state: SchedulerState, cfg: SchedulerConfig) -> SchedulerState:
    """Enter the next epoch and recompute the step size at its fraction."""
    if state.epoch >= cfg.total_epochs:
        raise StateError(
            f"cannot advance past total_epochs={cfg.total_epochs} (epoch={state.epoch})"
        )
    epoch = state.epoch + 1
    return replace(state, epoch=epoch, eta=step_size(epoch / cfg.total_epochs, cfg))


def replay_epoch_losses(
    losses: list[float], cfg: SchedulerConfig
) -> list[tuple[int, float, float, float]]:
    """Strict single-loop replay: one loss per epoch, one ratio move per epoch.

    Returns one row per epoch: (epoch, x, eta, mu) after the update.
    ``cfg.total_epochs`` must cover ``len(losses)``.
    """
    if len(losses) > cfg.total_epochs:
        raise InputError(
            f"{len(losses)} losses exceed total_epochs={cfg.total_epochs}"
        )
    state = init_state(cfg)
    rows = []
    for loss in losses:
        state = advance_epoch(state, cfg)
        state = update_mask_ratio(state, loss, cfg)
        rows.append((state.epoch, state.epoch / cfg.total_epochs, state.eta, state.mu))
    return rows


def config_to_dict(cfg: SchedulerConfig) -> dict:
    return {
        "eta_min": cfg.eta_min,
        "eta_max": cfg.eta_max,
        "k": cfg.k,
        "midpoint": cfg.midpoint,
        "mu_0": cfg.mu_0,
        "mu_min": cfg.mu_min,
        "mu_max": cfg.mu_max,
        "loss_window": cfg.loss_window,
        "total_epochs": cfg.total_epochs,
        "mu_cadence": cfg.mu_cadence,
        "loss_source": cfg.loss_source,
    }


def config_from_dict(data: dict) -> SchedulerConfig:
    return SchedulerConfig(**data)


def state_to_dict(state: SchedulerState) -> dict:
    return {
        "mu": state.mu,
        "eta": state.eta,
        "epoch": state.epoch,
        "loss_history": list(state.loss_history),
        "update_count": state.update_count,
    }


def state_from_dict(data: dict) -> SchedulerState:
    return SchedulerState(
        mu=float(data["mu"]),
        eta=float(data["eta"]),
        epoch=int(data["epoch"]),
        loss_history=tuple(float(x) for x in data["loss_history"]),
        update_count=int(data["update_count"]),
    )
