from . import functional
from .functional import (
    activation,
    conv2d,
    conv_transpose2d,
    leaky_relu,
    linear,
    relu,
    softmax_normalize,
)
from .gradcheck import EvaluationError, grad_check
from .optim import ParamStore, adam_step, uniform_init
from .rng import RngState
from .tensor import ContractViolation, DimensionError, Tape, Tensor, backward

__all__ = [
    "ContractViolation",
    "DimensionError",
    "EvaluationError",
    "ParamStore",
    "RngState",
    "Tape",
    "Tensor",
    "activation",
    "adam_step",
    "backward",
    "conv2d",
    "conv_transpose2d",
    "functional",
    "grad_check",
    "leaky_relu",
    "linear",
    "relu",
    "softmax_normalize",
    "uniform_init",
]
