import logging
from typing import Collection, List

import numpy as np

from ..algorithms.beam_search import SpecialIds
from ..algorithms.ordering import (
    SpiralOrdering,
    l2r_ordering,
    r2l_ordering,
    sample_constrained_ordering,
    sample_uniform_ordering,
)
from .instances import EncodedPair

logger = logging.getLogger(__name__)


def stage_of(step: int, total_steps: int, boundary: float) -> int:
    """1 or 2 for the 1-based ``step`` (as written to the metrics file).

    Step ``ceil(boundary * total_steps)`` is the first stage-2 step.
    """
    return 2 if step >= first_stage2_step(total_steps, boundary) else 1


def first_stage2_step(total_steps: int, boundary: float) -> int:
    # round first: 0.7 * 10 is 7.000000000000001 in floating point
    return int(np.ceil(round(boundary * total_steps, 9)))


def sample_ordering_stage1(pair: EncodedPair, rng: np.random.Generator) -> SpiralOrdering:
    return sample_uniform_ordering(len(pair.target), rng)


def top_start_tokens(
    start_probs: np.ndarray,
    k: int,
    stopword_ids: Collection[int] = (),
    specials: SpecialIds = SpecialIds(),
) -> np.ndarray:
    """Ids of the ``k`` most probable start tokens, skipping stop words and reserved ids."""
    probs = np.asarray(start_probs, dtype=np.float64)
    eligible = np.ones(probs.shape[0], dtype=bool)
    eligible[list(specials)] = False
    if stopword_ids:
        eligible[list(stopword_ids)] = False
    candidates = np.flatnonzero(eligible)
    return candidates[np.argsort(-probs[candidates], kind="stable")[:k]]


def sample_orderings_stage2(
    start_probs: np.ndarray,
    pair: EncodedPair,
    k: int,
    rng: np.random.Generator,
    stopword_ids: Collection[int] = (),
    specials: SpecialIds = SpecialIds(),
) -> List[SpiralOrdering]:
    """Orderings that open at the model's top-``k`` predicted start tokens.

    Args:
        start_probs (np.ndarray): ``(V,)`` start-head probabilities for the pair's source.
        pair (EncodedPair): The training pair.
        k (int): How many ranked tokens to consider.
        rng (np.random.Generator): Random source.
        stopword_ids (Collection[int], optional): Ids never used as start tokens.
        specials (SpecialIds, optional): Reserved ids, never used as start tokens.

    Returns:
        List[SpiralOrdering]: One ordering per top-``k`` token that occurs in
        the target, in rank order; a single uniform ordering when none does.
    """
    ranked = top_start_tokens(start_probs, k, stopword_ids, specials)
    target = np.asarray(pair.target)
    T = len(target)
    orderings = []
    for token in ranked:
        positions = np.flatnonzero(target == token) + 1
        if positions.size == 0:
            continue
        start = int(positions[rng.integers(0, positions.size)])
        orderings.append(sample_constrained_ordering(T, (start, start), rng))
    if not orderings:
        orderings.append(sample_uniform_ordering(T, rng))
    return orderings


def fixed_ordering(strategy: str, T: int) -> SpiralOrdering:
    return l2r_ordering(T) if strategy == "l2r" else r2l_ordering(T)
