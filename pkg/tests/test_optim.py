import numpy as np
import pytest

from rac.nn import OptimConfig, ParamSet, optimizer_step


def scalar_adam_reference(grad_fn, w0, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Independent scalar Adam, written directly from the update rule."""
    w, m, v = w0, 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1**t)
        vh = v / (1 - beta2**t)
        w -= lr * mh / (np.sqrt(vh) + eps)
    return w


def test_zero_gradient_is_identity():
    params = ParamSet()
    params.add("w", np.array([1.0, -2.0, 3.5]))
    params.accumulate_grad("w", np.zeros(3))
    before = params.values["w"].copy()
    optimizer_step(params, OptimConfig(learning_rate=0.1), step_index=1)
    np.testing.assert_array_equal(params.values["w"], before)


def test_first_step_magnitude_is_learning_rate():
    params = ParamSet()
    params.add("w", np.array([0.0]))
    params.accumulate_grad("w", np.array([0.37]))
    cfg = OptimConfig(learning_rate=0.01)
    optimizer_step(params, cfg, step_index=1)
    # bias correction makes the first step lr * g / (|g| + eps) ~= lr
    assert params.values["w"][0] == pytest.approx(-0.01, rel=1e-6)


def test_quadratic_convergence_matches_scalar_reference():
    cfg = OptimConfig(learning_rate=0.1)
    params = ParamSet()
    params.add("w", np.array([1.0]))
    for t in range(1, 101):
        w = params.values["w"][0]
        params.accumulate_grad("w", np.array([2.0 * (w - 3.0)]))
        optimizer_step(params, cfg, step_index=t)
    w_final = params.values["w"][0]
    ref = scalar_adam_reference(lambda w: 2.0 * (w - 3.0), 1.0, 0.1, 100)
    assert w_final == pytest.approx(ref, abs=1e-12)
    assert abs(w_final - 3.0) < 1e-2


def test_missing_gradients_raise():
    params = ParamSet()
    params.add("a", np.zeros(2))
    params.add("b", np.zeros(2))
    params.accumulate_grad("a", np.ones(2))
    with pytest.raises(ValueError, match="missing gradients"):
        optimizer_step(params, OptimConfig(), step_index=1)


def test_gradients_cleared_after_step():
    params = ParamSet()
    params.add("w", np.ones(2))
    params.accumulate_grad("w", np.ones(2))
    optimizer_step(params, OptimConfig(), step_index=1)
    assert params.grads["w"] is None


def test_optim_config_validation():
    with pytest.raises(ValueError):
        OptimConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        OptimConfig(beta1=1.0)
    with pytest.raises(ValueError):
        OptimConfig(batch_size=0)
