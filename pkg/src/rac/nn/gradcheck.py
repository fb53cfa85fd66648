"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .network import backward
from .params import ParamSet


def finite_difference_check(params: ParamSet, loss_fn, x: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Perturbs every parameter entry by +-h. Relative error is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    backward(params, loss_fn, x)
    worst = 0.0
    for name in params.names():
        analytic = params.grads[name]
        val = params.values[name]
        flat = val.reshape(-1)
        aflat = analytic.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_fn(params, x)
            flat[idx] = orig - h
            down = loss_fn(params, x)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(aflat[idx]), abs(numeric), 1e-8)
            worst = max(worst, abs(aflat[idx] - numeric) / denom)
    params.clear_grads()
    return worst
