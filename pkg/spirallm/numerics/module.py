from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .tensor import NdValue


class Module:
    """Container of named trainable values and child modules.

    Parameter names are dotted paths (``decoder.layers.0.ff.fc1.weight``)
    built from attribute names, so ``state_dict`` keys are stable and map
    one-to-one onto checkpoint records.
    """

    def __init__(self):
        self._params: Dict[str, NdValue] = {}
        self._children: Dict[str, "Module"] = {}
        self.training = True
        self.rng: Optional[np.random.Generator] = None

    def register(self, name: str, value: NdValue) -> NdValue:
        self._params[name] = value
        return value

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, NdValue]]:
        for name, value in self._params.items():
            yield prefix + name, value
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> Dict[str, NdValue]:
        return dict(self.named_parameters())

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def set_rng(self, rng: Optional[np.random.Generator]) -> None:
        """Share one dropout stream with every child."""
        self.rng = rng
        for child in self._children.values():
            child.set_rng(rng)

    def zero_grad(self) -> None:
        for _, value in self.named_parameters():
            value.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.data for name, value in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, value in params.items():
            array = np.asarray(state[name])
            if array.shape != value.shape:
                raise ValueError(
                    f"{name}: stored shape {array.shape} != expected {value.shape}"
                )
            value.data = array.astype(value.dtype)

    def num_parameters(self) -> int:
        return sum(v.data.size for _, v in self.named_parameters())
