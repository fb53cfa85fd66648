"""Adaptive-moment (Adam) parameter update."""

from __future__ import annotations

import numpy as np

from .params import OptimConfig, ParamSet


def optimizer_step(params: ParamSet, cfg: OptimConfig, step_index: int) -> ParamSet:
    """Apply one Adam update in place; step_index is 1-based for bias correction.

    Gradients must be populated for every parameter and are cleared after
    the update.
    """
    if step_index < 1:
        raise ValueError("step_index is 1-based")
    missing = [n for n in params.names() if params.grads[n] is None]
    if missing:
        raise ValueError(f"missing gradients for parameters: {missing}")
    bc1 = 1.0 - cfg.beta1**step_index
    bc2 = 1.0 - cfg.beta2**step_index
    for name in params.names():
        g = params.grads[name]
        params.m[name] = cfg.beta1 * params.m[name] + (1.0 - cfg.beta1) * g
        params.v[name] = cfg.beta2 * params.v[name] + (1.0 - cfg.beta2) * (g * g)
        m_hat = params.m[name] / bc1
        v_hat = params.v[name] / bc2
        params.values[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    params.clear_grads()
    return params
