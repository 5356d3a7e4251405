import numpy as np

from ..numerics import Module, NdValue, add, matmul, parameter


class Projector(Module):
    """Affine map ``x @ W + b`` over the last axis."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        bias: bool = True,
        std: float = 0.02,
    ):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = self.register("weight", parameter(rng, (in_dim, out_dim), std=std))
        self.bias = self.register("bias", parameter(rng, (out_dim,), init="zeros")) if bias else None

    def __call__(self, x: NdValue) -> NdValue:
        y = matmul(x, self.weight)
        if self.bias is not None:
            y = add(y, self.bias)
        return y
