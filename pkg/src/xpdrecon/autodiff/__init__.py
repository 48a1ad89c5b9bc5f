"""Minimal reverse-mode automatic differentiation over real numpy arrays."""
from . import cplx, ops
from .gradcheck import GradcheckResult, check_gradients
from .tensor import Parameter, Tape, Tensor, active_tape, backward

__all__ = [
    "GradcheckResult",
    "Parameter",
    "Tape",
    "Tensor",
    "active_tape",
    "backward",
    "check_gradients",
    "cplx",
    "ops",
]
