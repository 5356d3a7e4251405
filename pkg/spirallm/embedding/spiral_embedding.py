from typing import Union

import numpy as np

from ..algorithms.ordering import Direction
from ..errors import InputError
from ..numerics import Module, NdValue, add, embedding, parameter


def _check_ids(ids: np.ndarray, size: int, what: str) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= size):
        raise InputError(f"{what} id out of range [0, {size}): {ids.min()}..{ids.max()}")
    return ids


class SourceEmbedding(Module):
    """Token plus absolute position embedding for encoder inputs."""

    def __init__(self, vocab_size: int, dim: int, max_len: int, rng: np.random.Generator):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.token = self.register("token", parameter(rng, (vocab_size, dim)))
        self.position = self.register("position", parameter(rng, (max_len, dim)))

    def __call__(self, ids: np.ndarray) -> NdValue:
        ids = _check_ids(ids, self.vocab_size, "source token")
        length = ids.shape[-1]
        if length > self.max_len:
            raise InputError(f"source length {length} exceeds max_steps={self.max_len}")
        return add(embedding(self.token, ids), embedding(self.position, np.arange(length)))


class TupleEmbedding(Module):
    """Embedding of ``<token, direction>`` decode tuples.

    The vector at decode step ``s`` is the sum of the token row, the row of
    the direction in which the next token attaches, and the row of ``s``.
    Positions index decode steps, not slots in the written sentence.
    """

    def __init__(self, vocab_size: int, dim: int, max_steps: int, rng: np.random.Generator):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_steps = max_steps
        self.token = self.register("token", parameter(rng, (vocab_size, dim)))
        self.direction = self.register("direction", parameter(rng, (2, dim)))
        self.position = self.register("position", parameter(rng, (max_steps, dim)))

    def __call__(self, token_ids: np.ndarray, direction_ids: np.ndarray) -> NdValue:
        """Embed ``(B, L)`` tuples at decode steps ``0..L-1``."""
        token_ids = _check_ids(token_ids, self.vocab_size, "target token")
        direction_ids = _check_ids(direction_ids, 2, "direction")
        length = token_ids.shape[-1]
        if length > self.max_steps:
            raise InputError(f"decode prefix of {length} steps exceeds max_steps={self.max_steps}")
        x = add(embedding(self.token, token_ids), embedding(self.direction, direction_ids))
        return add(x, embedding(self.position, np.arange(length)))

    def embed_tuple(
        self, token_id: int, direction: Union[Direction, int], step: int
    ) -> NdValue:
        direction_id = direction.index if isinstance(direction, Direction) else int(direction)
        _check_ids(np.array([token_id]), self.vocab_size, "target token")
        _check_ids(np.array([direction_id]), 2, "direction")
        _check_ids(np.array([step]), self.max_steps, "decode step")
        return add(
            add(
                embedding(self.token, np.array(token_id)),
                embedding(self.direction, np.array(direction_id)),
            ),
            embedding(self.position, np.array(step)),
        )
