"""Named parameter store with gradient and Adam moment buffers.

All tensors are float64 numpy arrays. Iteration over parameters is always
in sorted-name order so training and checkpointing are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimConfig:
    learning_rate: float = 3e-4
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    total_steps: int = 5000

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1/beta2 must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ParamSet:
    """Parameters plus per-parameter gradient and first/second moment buffers."""

    values: dict = field(default_factory=dict)
    grads: dict = field(default_factory=dict)
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def names(self):
        return sorted(self.values.keys())

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.values:
            raise ValueError(f"duplicate parameter name {name!r}")
        value = np.asarray(value, dtype=np.float64)
        self.values[name] = value
        self.grads[name] = None
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)

    def accumulate_grad(self, name: str, grad: np.ndarray) -> None:
        if grad.shape != self.values[name].shape:
            raise ValueError(
                f"gradient shape {grad.shape} does not match parameter "
                f"{name!r} shape {self.values[name].shape}"
            )
        if self.grads[name] is None:
            self.grads[name] = grad.astype(np.float64, copy=True)
        else:
            self.grads[name] += grad

    def clear_grads(self) -> None:
        for name in self.values:
            self.grads[name] = None

    def has_grads(self) -> bool:
        return all(self.grads[n] is not None for n in self.values)

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for n in self.names():
            out.values[n] = self.values[n].copy()
            out.grads[n] = None if self.grads[n] is None else self.grads[n].copy()
            out.m[n] = self.m[n].copy()
            out.v[n] = self.v[n].copy()
        return out


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
