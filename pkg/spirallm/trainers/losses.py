from typing import NamedTuple, Optional

import numpy as np

from ..numerics import NdValue, add, bce_with_logits, cross_entropy


class LossParts(NamedTuple):
    total: NdValue
    translation: NdValue
    start: NdValue


def translation_loss(
    logits: NdValue, targets: np.ndarray, mask: Optional[np.ndarray] = None
) -> NdValue:
    """Mean cross-entropy over non-padding decode steps."""
    return cross_entropy(logits, targets, mask)


def start_loss(start_logits: NdValue, labels: np.ndarray) -> NdValue:
    """Mean binary cross-entropy over every vocab entry and batch row."""
    return bce_with_logits(start_logits, labels)


def total_loss(
    logits: NdValue,
    targets: np.ndarray,
    start_logits: NdValue,
    labels: np.ndarray,
    mask: Optional[np.ndarray] = None,
) -> LossParts:
    ce = translation_loss(logits, targets, mask)
    bce = start_loss(start_logits, labels)
    return LossParts(add(ce, bce), ce, bce)
