"""Two-layer per-position reconstruction head with hand-derived gradients.

Each spatial position is decoded independently: a ReLU hidden layer followed
by a linear projection back to the input channel count. The hidden layer is
half the channel width by default, keeping the head lighter than whatever
produced the features. Gradients are exact analytic derivatives of the mean
squared reconstruction error; see the finite-difference tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .masking import FeatureMap


@dataclass
class DecoderParams:
    """Weights: w1 (hidden, C), b1 (hidden,), w2 (C, hidden), b2 (C,)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        hidden, channels = self.w1.shape
        if self.b1.shape != (hidden,) or self.w2.shape != (channels, hidden) or self.b2.shape != (channels,):
            raise InputError("decoder parameter shapes are inconsistent")
        for arr in (self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise InputError("decoder parameters must be finite")

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def channels(self) -> int:
        return self.w1.shape[1]


@dataclass
class DecoderGrads:
    """Gradient of the reconstruction loss w.r.t. every parameter."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class DecoderConfig:
    """hidden_dim defaults to half the channel count; lr drives sgd_step."""

    hidden_dim: int | None = None
    lr: float = 0.01

    def __post_init__(self) -> None:
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim: must be >= 1, got {self.hidden_dim}")
        if not self.lr > 0:
            raise ConfigError(f"lr: must be > 0, got {self.lr}")


def init_params(channels: int, hidden_dim: int | None = None, seed: int = 0) -> DecoderParams:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    if channels < 1:
        raise InputError(f"channels must be >= 1, got {channels}")
    if hidden_dim is None:
        hidden_dim = max(1, channels // 2)
    if hidden_dim < 1:
        raise InputError(f"hidden_dim must be >= 1, got {hidden_dim}")
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / np.sqrt(channels)
    lim2 = 1.0 / np.sqrt(hidden_dim)
    return DecoderParams(
        w1=rng.uniform(-lim1, lim1, (hidden_dim, channels)),
        b1=rng.uniform(-lim1, lim1, hidden_dim),
        w2=rng.uniform(-lim2, lim2, (channels, hidden_dim)),
        b2=rng.uniform(-lim2, lim2, channels),
    )


def _flatten(fmap: FeatureMap) -> np.ndarray:
    return fmap.values.reshape(fmap.channels, fmap.height * fmap.width)


def forward(params: DecoderParams, masked: FeatureMap) -> FeatureMap:
    """Per position p: w2 @ relu(w1 @ in(p) + b1) + b2, shape preserved."""
    if masked.channels != params.channels:
        raise InputError(
            f"feature map has {masked.channels} channels, decoder expects {params.channels}"
        )
    x = _flatten(masked)
    hidden = np.maximum(params.w1 @ x + params.b1[:, None], 0.0)
    out = params.w2 @ hidden + params.b2[:, None]
    return FeatureMap(level=masked.level, values=out.reshape(masked.values.shape))


def loss_and_grad(
    params: DecoderParams, masked: FeatureMap, target: FeatureMap
) -> tuple[float, DecoderGrads]:
    """MSE between the reconstruction and ``target``, plus exact gradients."""
    if masked.values.shape != target.values.shape:
        raise InputError(
            f"shape mismatch: {masked.values.shape} vs {target.values.shape}"
        )
    if masked.channels != params.channels:
        raise InputError(
            f"feature map has {masked.channels} channels, decoder expects {params.channels}"
        )
    x = _flatten(masked)
    t = _flatten(target)
    pre = params.w1 @ x + params.b1[:, None]
    act = np.maximum(pre, 0.0)
    out = params.w2 @ act + params.b2[:, None]
    resid = out - t
    loss = float(np.mean(resid * resid))

    g_out = (2.0 / resid.size) * resid
    g_b2 = g_out.sum(axis=1)
    g_w2 = g_out @ act.T
    g_act = params.w2.T @ g_out
    g_pre = g_act * (pre > 0.0)
    g_b1 = g_pre.sum(axis=1)
    g_w1 = g_pre @ x.T
    return loss, DecoderGrads(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2)


def sgd_step(params: DecoderParams, grads: DecoderGrads, lr: float) -> DecoderParams:
    """params - lr * grads, elementwise."""
    if not lr > 0:
        raise InputError(f"lr must be > 0, got {lr}")
    return DecoderParams(
        w1=params.w1 - lr * grads.w1,
        b1=params.b1 - lr * grads.b1,
        w2=params.w2 - lr * grads.w2,
        b2=params.b2 - lr * grads.b2,
    )


def train(
    params: DecoderParams,
    masked: FeatureMap,
    target: FeatureMap,
    steps: int,
    lr: float,
) -> tuple[DecoderParams, list[float]]:
    """Run ``steps`` full-batch SGD steps on one (masked, target) pair.

    Returns the final params and the loss before each step (length ``steps``).
    """
    losses = []
    for _ in range(steps):
        loss, grads = loss_and_grad(params, masked, target)
        params = sgd_step(params, grads, lr)
        losses.append(loss)
    return params, losses


def params_to_dict(params: DecoderParams) -> dict:
    return {
        "hidden_dim": params.hidden_dim,
        "w1": params.w1.tolist(),
        "b1": params.b1.tolist(),
        "w2": params.w2.tolist(),
        "b2": params.b2.tolist(),
    }


def params_from_dict(data: dict) -> DecoderParams:
    params = DecoderParams(
        w1=np.array(data["w1"], dtype=np.float64),
        b1=np.array(data["b1"], dtype=np.float64),
        w2=np.array(data["w2"], dtype=np.float64),
        b2=np.array(data["b2"], dtype=np.float64),
    )
    if params.hidden_dim != int(data["hidden_dim"]):
        raise InputError("hidden_dim does not match stored weight shapes")
    return params
