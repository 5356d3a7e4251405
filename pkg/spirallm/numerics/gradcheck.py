from typing import Callable, Dict, List, NamedTuple

import numpy as np

from .tensor import NdValue


class GradSample(NamedTuple):
    name: str
    index: tuple
    analytic: float
    numeric: float

    @property
    def relative_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric), 1e-6)
        return abs(self.analytic - self.numeric) / scale


def check_gradients(
    loss_fn: Callable[[], NdValue],
    params: Dict[str, NdValue],
    rng: np.random.Generator,
    n_samples: int = 200,
    step: float = 1e-4,
) -> List[GradSample]:
    """Compare backprop gradients with central finite differences.

    ``loss_fn`` must rebuild the loss from the current parameter buffers and
    be deterministic; run it under ``check_mode`` with float64 parameters.
    Sampled entries are drawn uniformly over all parameter elements.
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}

    names = list(params)
    sizes = np.array([params[n].data.size for n in names], dtype=np.int64)
    flat = rng.choice(int(sizes.sum()), size=min(n_samples, int(sizes.sum())), replace=False)
    bounds = np.cumsum(sizes)

    samples = []
    for f in np.sort(flat):
        which = int(np.searchsorted(bounds, f, side="right"))
        name = names[which]
        offset = int(f - (bounds[which] - sizes[which]))
        p = params[name]
        index = np.unravel_index(offset, p.shape)
        original = p.data[index]
        p.data[index] = original + step
        plus = loss_fn().item()
        p.data[index] = original - step
        minus = loss_fn().item()
        p.data[index] = original
        samples.append(
            GradSample(name, index, float(analytic[name][index]), (plus - minus) / (2 * step))
        )
    for p in params.values():
        p.zero_grad()
    return samples


def max_relative_error(samples: List[GradSample]) -> float:
    return max((p.relative_error for p in samples), default=0.0)
