"""Dense tensor math, conv predictor, analytic gradients, Adam optimizer."""

from .checkpoint import load_params, save_params
from .gradcheck import finite_difference_check
from .network import ArchSpec, backward, forward, init_params, make_loss_fn
from .optim import optimizer_step
from .params import OptimConfig, ParamSet

__all__ = [
    "ArchSpec",
    "OptimConfig",
    "ParamSet",
    "backward",
    "finite_difference_check",
    "forward",
    "init_params",
    "load_params",
    "make_loss_fn",
    "optimizer_step",
    "save_params",
]
