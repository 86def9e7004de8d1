"""Mask-ratio feedback scheduling, step by step.

The controller has two parts: a sigmoid step-size schedule over training
progress (big steps early, fine steps late), and a direction rule that
compares the current loss to the mean of the last few losses. This script
prints the step-size curve and then replays the controller against two
synthetic loss profiles so the feedback is visible.
"""

import numpy as np

from selfteach import SchedulerConfig, init_state, advance_epoch, update_mask_ratio, step_size

cfg = SchedulerConfig(total_epochs=40)

print("step size over training progress (eta_max -> eta_min):")
for x in (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0):
    print(f"  x={x:0.2f}  eta={step_size(x, cfg):.6f}")

rng = np.random.default_rng(0)
profiles = {
    # steadily improving: the ratio should climb (keep raising difficulty)
    "improving": [2.0 * 0.97**i + 0.02 * rng.standard_normal() for i in range(40)],
    # stalled: the ratio should drop back (refocus on easier reconstruction)
    "stalled": [1.0 + 0.05 * rng.standard_normal() for i in range(40)],
}

for name, losses in profiles.items():
    state = init_state(cfg)
    print(f"\n{name} loss profile:")
    for epoch, loss in enumerate(losses, start=1):
        state = advance_epoch(state, cfg)
        state = update_mask_ratio(state, max(loss, 0.0), cfg)
        if epoch % 8 == 0:
            print(f"  epoch {epoch:2d}: loss={loss:6.3f}  eta={state.eta:.5f}  mu={state.mu:.3f}")
