import numpy as np
import pytest

from selfteach.decoder import (
    DecoderGrads,
    DecoderParams,
    forward,
    init_params,
    loss_and_grad,
    params_from_dict,
    params_to_dict,
    sgd_step,
    train,
)
from selfteach.errors import InputError
from selfteach.masking import FeatureMap, mse_loss


def fmap(values, level=3):
    return FeatureMap(level=level, values=np.asarray(values, dtype=np.float64))


def random_pair(channels=6, h=4, w=5, seed=0):
    rng = np.random.default_rng(seed)
    masked = fmap(rng.normal(size=(channels, h, w)))
    target = fmap(rng.normal(size=(channels, h, w)))
    params = init_params(channels, seed=seed + 100)
    return params, masked, target


def finite_difference_grads(params, masked, target, step=1e-6):
    """Central differences on every parameter entry."""
    arrays = {name: getattr(params, name).copy() for name in ("w1", "b1", "w2", "b2")}
    grads = {}
    for name, base in arrays.items():
        grad = np.zeros_like(base)
        flat = base.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            for sign in (+1.0, -1.0):
                perturbed = {k: v.copy() for k, v in arrays.items()}
                perturbed[name].reshape(-1)[idx] += sign * step
                loss, _ = loss_and_grad(DecoderParams(**perturbed), masked, target)
                gflat[idx] += sign * loss
            gflat[idx] /= 2.0 * step
        grads[name] = grad
    return grads


def relative_error(a, b, floor=1e-10):
    scale = max(abs(a), abs(b))
    if scale < floor:
        return 0.0
    return abs(a - b) / scale


class TestForward:
    def test_zero_params_give_zero_output(self):
        channels = 4
        params = DecoderParams(
            w1=np.zeros((2, channels)), b1=np.zeros(2), w2=np.zeros((channels, 2)), b2=np.zeros(channels)
        )
        rng = np.random.default_rng(1)
        target = fmap(rng.normal(size=(channels, 3, 3)))
        out = forward(params, target)
        assert np.all(out.values == 0.0)
        assert mse_loss(out, target) == pytest.approx(float(np.mean(target.values**2)), abs=1e-15)

    def test_identity_on_nonnegative_input(self):
        channels = 4
        params = DecoderParams(
            w1=np.eye(channels), b1=np.zeros(channels), w2=np.eye(channels), b2=np.zeros(channels)
        )
        rng = np.random.default_rng(2)
        x = fmap(rng.uniform(0.0, 2.0, size=(channels, 3, 2)))
        out = forward(params, x)
        assert np.allclose(out.values, x.values, atol=0)
        assert mse_loss(out, x) == 0.0

    def test_matches_per_position_oracle(self):
        params, masked, _ = random_pair(seed=3)
        out = forward(params, masked)
        for i in range(masked.height):
            for j in range(masked.width):
                x = masked.values[:, i, j]
                hidden = np.maximum(params.w1 @ x + params.b1, 0.0)
                expected = params.w2 @ hidden + params.b2
                assert np.max(np.abs(out.values[:, i, j] - expected)) <= 1e-12

    def test_channel_mismatch(self):
        params = init_params(4, seed=0)
        with pytest.raises(InputError):
            forward(params, fmap(np.zeros((5, 2, 2))))


class TestLossAndGrad:
    def test_zero_grads_at_exact_minimum(self):
        params, masked, _ = random_pair(seed=4)
        target = forward(params, masked)  # output == target by construction
        loss, grads = loss_and_grad(params, masked, target)
        assert loss == 0.0
        for name in ("w1", "b1", "w2", "b2"):
            assert np.all(getattr(grads, name) == 0.0)

    def test_finite_difference_check(self):
        for seed in range(3):
            params, masked, target = random_pair(channels=5, h=3, w=3, seed=seed)
            _, analytic = loss_and_grad(params, masked, target)
            numeric = finite_difference_grads(params, masked, target)
            for name in ("w1", "b1", "w2", "b2"):
                a = getattr(analytic, name).reshape(-1)
                n = numeric[name].reshape(-1)
                worst = max(relative_error(x, y) for x, y in zip(a, n))
                assert worst < 1e-4, f"{name} rel err {worst} at seed {seed}"

    def test_doubling_residual_doubles_bias_grad(self):
        params, masked, target = random_pair(seed=5)
        out = forward(params, masked)
        doubled = fmap(out.values - 2.0 * (out.values - target.values))
        _, g1 = loss_and_grad(params, masked, target)
        _, g2 = loss_and_grad(params, masked, doubled)
        assert np.allclose(g2.b2, 2.0 * g1.b2, rtol=1e-12, atol=1e-15)


class TestSgdStep:
    def test_zero_grads_leave_params(self):
        params, _, _ = random_pair(seed=6)
        zeros = DecoderGrads(
            w1=np.zeros_like(params.w1),
            b1=np.zeros_like(params.b1),
            w2=np.zeros_like(params.w2),
            b2=np.zeros_like(params.b2),
        )
        stepped = sgd_step(params, zeros, lr=0.5)
        for name in ("w1", "b1", "w2", "b2"):
            assert np.array_equal(getattr(stepped, name), getattr(params, name))

    def test_unit_lr_subtracts_grad(self):
        params = DecoderParams(w1=np.array([[2.0]]), b1=np.array([0.0]), w2=np.array([[1.0]]), b2=np.array([3.0]))
        grads = DecoderGrads(w1=np.array([[0.5]]), b1=np.array([0.0]), w2=np.array([[0.0]]), b2=np.array([1.0]))
        stepped = sgd_step(params, grads, lr=1.0)
        assert stepped.w1[0, 0] == 1.5
        assert stepped.b2[0] == 2.0

    def test_rejects_nonpositive_lr(self):
        params, _, _ = random_pair(seed=7)
        grads = DecoderGrads(params.w1 * 0, params.b1 * 0, params.w2 * 0, params.b2 * 0)
        with pytest.raises(InputError):
            sgd_step(params, grads, lr=0.0)


class TestTraining:
    def test_loss_trend_non_increasing_at_small_lr(self):
        params, masked, target = random_pair(channels=8, h=4, w=4, seed=8)
        _, losses = train(params, masked, target, steps=11, lr=1e-3)
        violations = sum(1 for a, b in zip(losses, losses[1:]) if b > a + 1e-12)
        assert violations <= 1

    def test_default_hidden_is_half_channels(self):
        params = init_params(16, seed=0)
        assert params.hidden_dim == 8

    def test_init_is_seeded(self):
        a = init_params(6, seed=5)
        b = init_params(6, seed=5)
        assert np.array_equal(a.w1, b.w1) and np.array_equal(a.b2, b.b2)


class TestSerialization:
    def test_round_trip(self):
        params = init_params(6, seed=9)
        restored = params_from_dict(params_to_dict(params))
        for name in ("w1", "b1", "w2", "b2"):
            assert np.array_equal(getattr(restored, name), getattr(params, name))
