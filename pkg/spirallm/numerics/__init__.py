from .tensor import (
    MASK_VALUE,
    NdValue,
    add,
    as_value,
    bce_with_logits,
    check_mode,
    concat,
    cross_entropy,
    default_dtype,
    dropout,
    embedding,
    gelu,
    grad_enabled,
    log_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    parameter,
    relu,
    reshape,
    rms_norm,
    scale,
    sigmoid,
    slice_,
    softmax,
    sum_,
    transpose,
)
from .module import Module
from .optim import AdamState, adam_step
from .checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, max_relative_error

__all__ = [
    "MASK_VALUE",
    "NdValue",
    "add",
    "as_value",
    "bce_with_logits",
    "check_mode",
    "concat",
    "cross_entropy",
    "default_dtype",
    "dropout",
    "embedding",
    "gelu",
    "grad_enabled",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "parameter",
    "relu",
    "reshape",
    "rms_norm",
    "scale",
    "sigmoid",
    "slice_",
    "softmax",
    "sum_",
    "transpose",
    "Module",
    "AdamState",
    "adam_step",
    "FORMAT_VERSION",
    "MAGIC",
    "load_checkpoint",
    "save_checkpoint",
    "check_gradients",
    "max_relative_error",
]
