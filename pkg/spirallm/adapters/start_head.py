"""Auto-alignment head that scores which target tokens the output contains.

Every source position proposes a potential per target-vocabulary token;
attention along the source axis, computed independently for each vocab
token, pools the potentials into one logit per token.
"""

from typing import NamedTuple, Optional

import numpy as np

from ..numerics import MASK_VALUE, Module, NdValue, add, mul, sigmoid, softmax, sum_
from .projector import Projector


class StartHeadOutput(NamedTuple):
    logits: NdValue  # (B, V) pooled potentials
    probs: NdValue  # (B, V) sigmoid of the logits
    alpha: NdValue  # (B, S, V) attention over source positions


class StartHead(Module):
    def __init__(self, dim: int, vocab_size: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = self.add_module("hidden", Projector(dim, dim, rng))
        self.out = self.add_module("out", Projector(dim, vocab_size, rng, bias=False))

    def potentials(self, h: NdValue) -> NdValue:
        """``(h W + b) W'`` per source position: ``(B, S, D) -> (B, S, V)``."""
        return self.out(self.hidden(h))

    @staticmethod
    def pool(v: NdValue, src_mask: Optional[np.ndarray] = None) -> StartHeadOutput:
        """Softmax each vocab column over source positions and pool."""
        scores = v
        if src_mask is not None:
            bias = np.where(np.asarray(src_mask, dtype=bool), 0.0, MASK_VALUE)[..., None]
            scores = add(v, bias.astype(v.dtype))
        alpha = softmax(scores, axis=-2)
        logits = sum_(mul(alpha, v), axis=-2)
        return StartHeadOutput(logits, sigmoid(logits), alpha)

    def __call__(self, h: NdValue, src_mask: Optional[np.ndarray] = None) -> StartHeadOutput:
        return self.pool(self.potentials(h), src_mask)
