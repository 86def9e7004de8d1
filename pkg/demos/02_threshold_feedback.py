"""Per-class confidence thresholds with variance feedback.

Walks through the worked confidence sequence [0.2, 0.5, 0.6, 0.9], shows
both smoothing-coefficient modes, and then runs 60 iterations of drifting
per-class confidence batches so the thresholds visibly track the statistics
while staying inside their clamp band.
"""

import numpy as np

from selfteach import (
    ThresholdConfig,
    class_stats,
    init_states,
    smoothing_coefficient,
    update_all,
    update_threshold,
)

sequence = [0.2, 0.5, 0.6, 0.9]
mean, var = class_stats(sequence)
print(f"confidence sequence {sequence}: mean={mean:.4f} var={var:.4f}")

cfg = ThresholdConfig(total_iters=60)
print("\nsmoothing coefficient over progress (described mode falls 1 -> 0):")
for it in (0, 15, 30, 45, 60):
    desc = smoothing_coefficient(it, 60, cfg)
    lit = smoothing_coefficient(it, 60, ThresholdConfig(gamma_mode="literal", total_iters=60))
    print(f"  iter {it:2d}: described={desc:.4f}  literal={lit:.4f}")

print("\none update from the worked stats (gamma=0.5, N_old=0.35):")
n = update_threshold(0.35, 0.64, 0.04, gamma=0.5, cfg=cfg)
print(f"  new threshold N = {n:.4f}")

print("\n60 iterations of drifting two-class batches:")
states = init_states([1, 2], cfg)
rng = np.random.default_rng(1)
for it in range(1, 61):
    drift = it / 60
    batch = {
        1: list(rng.uniform(0.3 + 0.3 * drift, 0.9, 12)),       # common, confident
        2: list(rng.uniform(0.1, 0.5 + 0.4 * drift, 4)),         # rare, noisy
    }
    states = update_all(states, batch, current_iter=it, cfg=cfg)
    if it % 12 == 0:
        print(
            f"  iter {it:2d}: N1={states[1].n:.4f} (mean {states[1].last_mean:.3f}) "
            f"N2={states[2].n:.4f} (mean {states[2].last_mean:.3f})"
        )
