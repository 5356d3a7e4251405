from typing import Optional

import numpy as np

from ..errors import ConfigError, DimensionError
from ..numerics import (
    MASK_VALUE,
    Module,
    NdValue,
    add,
    dropout,
    matmul,
    reshape,
    scale,
    softmax,
    transpose,
)
from .projector import Projector


def padding_bias(key_mask: np.ndarray) -> np.ndarray:
    """Additive bias ``(B, 1, 1, Lk)`` that blocks padded keys."""
    key_mask = np.asarray(key_mask, dtype=bool)
    return np.where(key_mask, 0.0, MASK_VALUE)[:, None, None, :]


def causal_bias(length: int) -> np.ndarray:
    """Additive bias ``(1, 1, L, L)`` that blocks attention to later steps."""
    upper = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(upper, MASK_VALUE, 0.0)[None, None, :, :]


class MultiHeadAttention(Module):
    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator, dropout: float = 0.1):
        super().__init__()
        if dim % n_heads:
            raise ConfigError(f"d_model={dim} is not divisible by n_heads={n_heads}")
        self.dim = dim
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.p = dropout
        self.q = self.add_module("q", Projector(dim, dim, rng))
        self.k = self.add_module("k", Projector(dim, dim, rng))
        self.v = self.add_module("v", Projector(dim, dim, rng))
        self.o = self.add_module("o", Projector(dim, dim, rng))

    def _split(self, x: NdValue) -> NdValue:
        b, length, _ = x.shape
        return transpose(reshape(x, (b, length, self.n_heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(
        self,
        query: NdValue,
        memory: Optional[NdValue] = None,
        bias: Optional[np.ndarray] = None,
    ) -> NdValue:
        """Scaled dot-product attention.

        Args:
            query (NdValue): ``(B, Lq, D)`` states that attend.
            memory (NdValue, optional): ``(B, Lk, D)`` states attended to;
                ``query`` itself for self-attention.
            bias (np.ndarray, optional): Additive score bias broadcastable to
                ``(B, H, Lq, Lk)``.

        Returns:
            NdValue: ``(B, Lq, D)`` attended states.
        """
        memory = query if memory is None else memory
        if query.ndim != 3 or memory.ndim != 3 or query.shape[0] != memory.shape[0]:
            raise DimensionError(
                f"attention expects (B, L, D) inputs, got {query.shape} and {memory.shape}"
            )
        b, lq, _ = query.shape
        q = self._split(self.q(query))
        k = self._split(self.k(memory))
        v = self._split(self.v(memory))
        scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(self.head_dim))
        if bias is not None:
            scores = add(scores, bias.astype(scores.dtype))
        weights = dropout(softmax(scores, axis=-1), self.p, self.training, self.rng)
        out = transpose(matmul(weights, v), (0, 2, 1, 3))
        return self.o(reshape(out, (b, lq, self.dim)))
