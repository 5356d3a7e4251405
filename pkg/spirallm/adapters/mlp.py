import numpy as np

from ..numerics import Module, NdValue, dropout, gelu
from .projector import Projector


class MLP(Module):
    """Position-wise feed-forward block: Linear, GELU, Dropout, Linear."""

    def __init__(self, dim: int, hidden_dim: int, rng: np.random.Generator, dropout: float = 0.1):
        super().__init__()
        self.p = dropout
        self.fc1 = self.add_module("fc1", Projector(dim, hidden_dim, rng))
        self.fc2 = self.add_module("fc2", Projector(hidden_dim, dim, rng))

    def __call__(self, x: NdValue) -> NdValue:
        h = gelu(self.fc1(x))
        h = dropout(h, self.p, self.training, self.rng)
        return self.fc2(h)
