from currlab.nn.backend import get_backend, set_backend, kernels
from currlab.nn.core import (
    ArchSpec,
    Batch,
    Model,
    OptimizerState,
    cosine_lr,
    evaluate,
    forward,
    init_model,
    loss_and_grad,
    param_count,
    sgd_step,
    softmax_xent,
)

__all__ = [
    "ArchSpec", "Batch", "Model", "OptimizerState", "cosine_lr", "evaluate",
    "forward", "init_model", "loss_and_grad", "param_count", "sgd_step",
    "softmax_xent", "get_backend", "set_backend", "kernels",
]
