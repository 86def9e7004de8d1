"""Binary spatial masking of feature maps and the reconstruction losses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass
class FeatureMap:
    """One pyramid level: a dense (channels, height, width) float64 grid."""

    level: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or min(values.shape) < 1:
            raise InputError(f"feature map must be (C, H, W) with all dims >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("feature map values must be finite")
        self.values = values

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass
class MaskPlan:
    """A binary (height, width) mask; 1 marks a masked position."""

    level: int
    mask: np.ndarray
    ratio_used: float
    seed: int


@dataclass(frozen=True)
class LossPair:
    """Reconstruction loss, teaching loss and their sum."""

    l_mask: float
    l_teach: float
    total: float

    def __post_init__(self) -> None:
        if self.total != self.l_mask + self.l_teach:
            raise InputError("LossPair total must equal l_mask + l_teach")


def derived_seed(run_seed: int, level: int, step: int) -> int:
    """Per-(level, step) mask seed: run_seed XOR level XOR step."""
    return run_seed ^ level ^ step


def generate_mask(h: int, w: int, mu: float, seed: int, level: int = 0) -> MaskPlan:
    """Mask exactly floor(mu*h*w) positions, chosen uniformly without
    replacement by a generator seeded with ``seed``."""
    if not 0.0 <= mu <= 1.0:
        raise InputError(f"mask ratio must lie in [0, 1], got {mu}")
    if h < 1 or w < 1:
        raise InputError(f"mask dims must be >= 1, got ({h}, {w})")
    count = math.floor(mu * h * w)
    flat = np.zeros(h * w, dtype=np.uint8)
    if count > 0:
        rng = np.random.default_rng(seed)
        flat[rng.choice(h * w, size=count, replace=False)] = 1
    return MaskPlan(level=level, mask=flat.reshape(h, w), ratio_used=float(mu), seed=seed)


def apply_mask(f: FeatureMap, plan: MaskPlan, token: float = 0.0) -> FeatureMap:
    """Replace every channel at each masked position with ``token``;
    unmasked positions are copied bit-exactly."""
    if plan.mask.shape != (f.height, f.width):
        raise InputError(
            f"mask shape {plan.mask.shape} does not match feature map ({f.height}, {f.width})"
        )
    out = f.values.copy()
    out[:, plan.mask == 1] = token
    return FeatureMap(level=f.level, values=out)


def mse_loss(recon: FeatureMap, target: FeatureMap) -> float:
    """Mean squared error over all C*H*W elements."""
    if recon.values.shape != target.values.shape:
        raise InputError(
            f"shape mismatch: {recon.values.shape} vs {target.values.shape}"
        )
    diff = recon.values - target.values
    return float(np.mean(diff * diff))


def region_mse(recon: FeatureMap, target: FeatureMap, plan: MaskPlan) -> tuple[float, float]:
    """Diagnostic split of the reconstruction error into (masked, unmasked)
    per-element MSE. An empty region contributes 0.0."""
    if recon.values.shape != target.values.shape:
        raise InputError(
            f"shape mismatch: {recon.values.shape} vs {target.values.shape}"
        )
    if plan.mask.shape != (target.height, target.width):
        raise InputError("mask shape does not match feature maps")
    diff = (recon.values - target.values) ** 2
    masked = plan.mask == 1
    out = []
    for region in (masked, ~masked):
        out.append(float(np.mean(diff[:, region])) if region.any() else 0.0)
    return out[0], out[1]


def total_loss(l_mask: float, l_teach: float) -> LossPair:
    """Combine reconstruction and teaching losses into a LossPair."""
    for name, value in (("l_mask", l_mask), ("l_teach", l_teach)):
        if not math.isfinite(value) or value < 0.0:
            raise InputError(f"{name} must be finite and >= 0, got {value}")
    return LossPair(l_mask=float(l_mask), l_teach=float(l_teach), total=float(l_mask) + float(l_teach))
