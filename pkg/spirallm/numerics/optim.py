import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..errors import ConfigError, NumericError, UsageError
from .tensor import NdValue, stack_grads

logger = logging.getLogger(__name__)

LR_SCHEDULES = ("inverse_sqrt", "constant")


@dataclass
class AdamState:
    """Moment buffers and schedule for Adam with linear warmup."""

    lr: float = 9e-5
    warmup_steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    schedule: str = "inverse_sqrt"
    max_grad_norm: Optional[float] = None
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.schedule not in LR_SCHEDULES:
            raise ConfigError(f"unknown lr schedule {self.schedule!r}; expected {LR_SCHEDULES}")
        if self.warmup_steps < 1:
            raise ConfigError("warmup_steps must be >= 1")

    def effective_lr(self, step: Optional[int] = None) -> float:
        """Learning rate applied at 1-indexed ``step``.

        ``inverse_sqrt`` gives ``base * min(step / warmup, (warmup / step) ** 0.5)``;
        ``constant`` applies the same warmup and then holds ``base``.
        """
        step = self.step if step is None else step
        if step < 1:
            return 0.0
        warm = step / self.warmup_steps
        if self.schedule == "constant":
            return self.lr * min(warm, 1.0)
        return self.lr * min(warm, (self.warmup_steps / step) ** 0.5)


def adam_step(params: Dict[str, NdValue], state: AdamState) -> float:
    """Apply one Adam update in place and clear gradients.

    Args:
        params (Dict[str, NdValue]): Named trainable values.
        state (AdamState): Optimizer state, advanced by one step.

    Returns:
        float: The global gradient norm before any clipping.

    Raises:
        UsageError: if no parameter holds a gradient.
        NumericError: if any gradient is NaN or infinite; no parameter is touched.
    """
    if not any(p.grad is not None for p in params.values()):
        raise UsageError("adam_step called before backward populated any gradient")

    norm = stack_grads(params.values())
    if not np.isfinite(norm):
        bad = [n for n, p in params.items() if p.grad is not None and not np.all(np.isfinite(p.grad))]
        raise NumericError(f"non-finite gradient in {bad}")
    clip = 1.0
    if state.max_grad_norm is not None and norm > state.max_grad_norm:
        clip = state.max_grad_norm / (norm + 1e-12)

    state.step += 1
    lr = state.effective_lr()
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.step
    bias2 = 1.0 - b2**state.step

    for name, p in params.items():
        if p.grad is None:
            continue
        g = p.grad * clip
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        p.data = (p.data - update).astype(p.dtype, copy=False)
        p.grad = None
    return norm
