import logging
from typing import Dict, Hashable, Iterable, List, Optional, Sequence

import numpy as np

from ..algorithms.beam_search import SpecialIds
from ..algorithms.ordering import EOL, EOR
from ..errors import InputError

logger = logging.getLogger(__name__)

PAD = "[PAD]"
RESERVED = (PAD, EOL, EOR)


class Vocab:
    """Token/id bijection with ``[PAD]``, ``[EOL]`` and ``[EOR]`` at ids 0, 1, 2."""

    def __init__(self, tokens: Iterable[str] = (), frozen: bool = False):
        self._itos: List[str] = list(RESERVED)
        self._stoi: Dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        self.frozen = False
        for token in tokens:
            self.add(token)
        self.frozen = frozen

    def __len__(self) -> int:
        return len(self._itos)

    def __contains__(self, token: Hashable) -> bool:
        return token in self._stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._itos == other._itos

    def __repr__(self) -> str:
        return f"Vocab(size={len(self)}, frozen={self.frozen})"

    @property
    def specials(self) -> SpecialIds:
        return SpecialIds(pad=0, eol=1, eor=2)

    def add(self, token: str) -> int:
        if token in self._stoi:
            return self._stoi[token]
        if self.frozen:
            raise InputError(f"unknown token {token!r} (vocabulary is frozen)")
        self._stoi[token] = len(self._itos)
        self._itos.append(token)
        return self._stoi[token]

    def freeze(self) -> "Vocab":
        self.frozen = True
        return self

    def id(self, token: str) -> int:
        try:
            return self._stoi[token]
        except KeyError:
            if self.frozen:
                raise InputError(f"unknown token {token!r}") from None
            return self.add(token)

    def token(self, idx: int) -> str:
        if not 0 <= int(idx) < len(self._itos):
            raise InputError(f"token id {idx} outside [0, {len(self._itos)})")
        return self._itos[int(idx)]

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.id(t) for t in tokens], dtype=np.int64)

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> List[str]:
        out = [self.token(i) for i in ids]
        if strip_special:
            out = [t for t in out if t not in RESERVED]
        return out

    def ids_of(self, tokens: Iterable[str]) -> List[int]:
        """Ids of the known tokens among ``tokens``; unknown ones are skipped."""
        return [self._stoi[t] for t in tokens if t in self._stoi]

    def to_list(self) -> List[str]:
        return list(self._itos)

    @classmethod
    def from_list(cls, tokens: Sequence[str], frozen: bool = True) -> "Vocab":
        if tuple(tokens[:3]) != RESERVED:
            raise InputError(f"vocabulary must start with {RESERVED}, got {tuple(tokens[:3])}")
        if len(set(tokens)) != len(tokens):
            raise InputError("vocabulary list holds duplicate tokens")
        return cls(tokens[3:], frozen=frozen)

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], extra: Optional[Iterable[str]] = None) -> "Vocab":
        """Frozen vocabulary over every token in ``sentences``, sorted for stability."""
        seen = set(extra or ())
        for sentence in sentences:
            seen.update(sentence)
        seen.difference_update(RESERVED)
        return cls(sorted(seen), frozen=True)
