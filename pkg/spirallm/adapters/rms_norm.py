import numpy as np

from ..numerics import Module, NdValue, parameter, rms_norm


class RMSNorm(Module):
    """Scale-only RMS normalisation, no bias."""

    def __init__(self, dim: int, rng: np.random.Generator, eps: float = 1e-6):
        super().__init__()
        self.eps = eps
        self.weight = self.register("weight", parameter(rng, (dim,), init="ones"))

    def __call__(self, x: NdValue) -> NdValue:
        return rms_norm(x, self.weight, eps=self.eps)
