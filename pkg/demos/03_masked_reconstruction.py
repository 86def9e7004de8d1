"""Spatial masking and reconstruction training.

Builds a channel-correlated feature map, hides 30% of its positions, and
trains the two-layer reconstruction head on the masked view. The loss curve
separates into the visible-position error (learnable) and the hidden-position
error (irreducible for a per-position decoder), which is what makes the
mask ratio a genuine difficulty knob.
"""

import numpy as np

from selfteach import FeatureMap, apply_mask, generate_mask, mse_loss
from selfteach.decoder import forward, init_params, loss_and_grad, sgd_step
from selfteach.masking import region_mse

rng = np.random.default_rng(3)
mixing = rng.normal(size=(16, 4)) / 2.0
target = FeatureMap(level=1, values=(3.0 * mixing @ rng.normal(size=(4, 64))).reshape(16, 8, 8))

plan = generate_mask(8, 8, mu=0.3, seed=5, level=1)
masked = apply_mask(target, plan)
print(f"masked {int(plan.mask.sum())} of 64 positions (ratio 0.3)")

params = init_params(16, seed=9)
for step in range(201):
    loss, grads = loss_and_grad(params, masked, target)
    if step % 40 == 0:
        recon = forward(params, masked)
        hidden_mse, visible_mse = region_mse(recon, target, plan)
        print(
            f"  step {step:3d}: loss={loss:7.4f}  visible={visible_mse:7.4f}  hidden={hidden_mse:7.4f}"
        )
    params = sgd_step(params, grads, lr=1e-2)

recon = forward(params, masked)
print(f"final reconstruction error: {mse_loss(recon, target):.4f}")
