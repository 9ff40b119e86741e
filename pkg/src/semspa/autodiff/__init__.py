from . import ops
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check, grad_check_params
from .nn import Linear, Module, RunningNorm
from .ops import primitive_forward
from .tensor import (
    GraphError,
    NumericalError,
    Parameter,
    Tensor,
    as_tensor,
    backward,
    is_grad_enabled,
    no_grad,
)

__all__ = [
    "GradCheckReport",
    "GraphError",
    "Linear",
    "Module",
    "NumericalError",
    "Parameter",
    "RunningNorm",
    "Tensor",
    "as_tensor",
    "backward",
    "grad_check",
    "grad_check_params",
    "is_grad_enabled",
    "load_checkpoint",
    "no_grad",
    "ops",
    "primitive_forward",
    "save_checkpoint",
]
