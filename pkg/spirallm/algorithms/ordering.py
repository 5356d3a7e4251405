"""Spiral generation orderings and the reformed tuple encoding.

An ordering of a sentence with ``T`` tokens is a permutation of the extended
positions ``0..T+1`` (``0`` is ``[EOL]``, ``T+1`` is ``[EOR]``) whose every
prefix is a contiguous interval: generation starts somewhere inside the
sentence and only ever grows the current segment by one neighbour.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Hashable, List, NamedTuple, Sequence, Tuple, FrozenSet

import numpy as np

from ..errors import (
    InvalidOrderingError,
    MalformedSequenceError,
    OrderingSizeError,
)

EOL = "[EOL]"
EOR = "[EOR]"

MAX_ENUMERATION_LENGTH = 10
MAX_COUNTABLE_LENGTH = 62


class Direction(Enum):
    """Side on which the next element attaches."""

    LEFT = "-"
    RIGHT = "+"

    @property
    def index(self) -> int:
        """Row of this direction in the direction embedding table."""
        return 0 if self is Direction.LEFT else 1

    @classmethod
    def parse(cls, symbol: str) -> "Direction":
        try:
            return cls(symbol)
        except ValueError as e:
            raise MalformedSequenceError(f"unknown direction symbol {symbol!r}") from e

    def __str__(self) -> str:
        return self.value


class DirectedToken(NamedTuple):
    token: Hashable
    direction: Direction


@dataclass(frozen=True, order=True)
class SpiralOrdering:
    """A valid generation ordering ``z`` for a sentence of ``T`` tokens."""

    z: Tuple[int, ...]
    T: int

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(int(i) for i in self.z))
        if not is_valid_ordering(self.z, self.T):
            raise InvalidOrderingError(
                f"{list(self.z)} is not a valid ordering for T={self.T}"
            )

    def __iter__(self):
        return iter(self.z)

    def __len__(self) -> int:
        return len(self.z)

    def __getitem__(self, i):
        return self.z[i]

    @property
    def start(self) -> int:
        return self.z[0]

    def mirrored(self) -> "SpiralOrdering":
        """Map every position ``i`` to ``T+1-i``."""
        return SpiralOrdering(tuple(self.T + 1 - i for i in self.z), self.T)


@dataclass(frozen=True)
class ReformedSequence:
    """A sentence rewritten in decode order as ``<token, next-direction>`` tuples."""

    elements: Tuple[DirectedToken, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "elements",
            tuple(DirectedToken(t, Direction(d)) for t, d in self.elements),
        )

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    @property
    def tokens(self) -> List[Hashable]:
        return [e.token for e in self.elements]

    @property
    def directions(self) -> List[Direction]:
        return [e.direction for e in self.elements]

    def to_text(self) -> str:
        return format_trace(self)

    @classmethod
    def from_text(cls, text: str) -> "ReformedSequence":
        return parse_trace(text)


def is_valid_ordering(z: Sequence[int], T: int) -> bool:
    """Check the permutation and prefix-contiguity properties.

    Args:
        z (Sequence[int]): Candidate ordering over extended positions.
        T (int): Number of real tokens in the sentence.

    Returns:
        bool: True iff ``z`` is a permutation of ``0..T+1`` and every prefix
        of it is a contiguous integer interval.
    """
    try:
        z = [int(i) for i in z]
        T = int(T)
    except (TypeError, ValueError):
        return False
    if T < 0 or len(z) != T + 2 or sorted(z) != list(range(T + 2)):
        return False
    lo = hi = z[0]
    for i in z[1:]:
        if i == lo - 1:
            lo = i
        elif i == hi + 1:
            hi = i
        else:
            return False
    return True


def l2r_ordering(T: int) -> SpiralOrdering:
    return SpiralOrdering(tuple(range(T + 2)), T)


def r2l_ordering(T: int) -> SpiralOrdering:
    return SpiralOrdering(tuple(range(T + 1, -1, -1)), T)


def count_orderings(T: int) -> int:
    """Exact number of valid orderings, ``2^(T+1)``.

    Each of the ``T+1`` growth steps picks a side, and the start is fixed by
    the sequence of choices, so the count is a power of two.

    Raises:
        InvalidOrderingError: for negative ``T``.
        OverflowError: when the count does not fit an unsigned 64-bit integer.
    """
    if T < 0:
        raise InvalidOrderingError(f"sentence length must be >= 0, got {T}")
    if T > MAX_COUNTABLE_LENGTH:
        raise OverflowError(f"2^{T + 1} orderings exceeds the unsigned 64-bit range")
    return 1 << (T + 1)


def enumerate_orderings(T: int) -> FrozenSet[SpiralOrdering]:
    """All valid orderings of a ``T``-token sentence.

    Raises:
        OrderingSizeError: when ``T`` exceeds ``MAX_ENUMERATION_LENGTH``.
    """
    if T < 0:
        raise InvalidOrderingError(f"sentence length must be >= 0, got {T}")
    if T > MAX_ENUMERATION_LENGTH:
        raise OrderingSizeError(
            f"refusing to enumerate 2^{T + 1} orderings (T={T} > {MAX_ENUMERATION_LENGTH})"
        )
    last = T + 1
    found = []

    def grow(prefix: List[int], lo: int, hi: int):
        if lo == 0 and hi == last:
            found.append(SpiralOrdering(tuple(prefix), T))
            return
        if lo > 0:
            prefix.append(lo - 1)
            grow(prefix, lo - 1, hi)
            prefix.pop()
        if hi < last:
            prefix.append(hi + 1)
            grow(prefix, lo, hi + 1)
            prefix.pop()

    for start in range(last + 1):
        grow([start], start, start)
    return frozenset(found)


def ordering_from_removal_bits(bits: Sequence[Direction], T: int) -> SpiralOrdering:
    """Decode ``T+1`` removal choices into an ordering.

    Starting from the full interval ``[0, T+1]``, each bit strips the left or
    right end into a removal list; the last survivor is appended and the list
    is reversed. Read backwards, every removal is a valid growth step, which
    makes this a bijection between bit strings and orderings.
    """
    if len(bits) != T + 1:
        raise InvalidOrderingError(f"need {T + 1} removal bits, got {len(bits)}")
    lo, hi = 0, T + 1
    removed = []
    for bit in bits:
        if Direction(bit) is Direction.LEFT:
            removed.append(lo)
            lo += 1
        else:
            removed.append(hi)
            hi -= 1
    removed.append(lo)
    return SpiralOrdering(tuple(reversed(removed)), T)


def sample_uniform_ordering(T: int, rng: np.random.Generator) -> SpiralOrdering:
    """Draw an ordering uniformly from all ``2^(T+1)`` valid ones."""
    draws = rng.integers(0, 2, size=T + 1)
    bits = [Direction.RIGHT if b else Direction.LEFT for b in draws]
    return ordering_from_removal_bits(bits, T)


def sample_constrained_ordering(
    T: int, start_span: Tuple[int, int], rng: np.random.Generator
) -> SpiralOrdering:
    """Draw an ordering whose prefix is a fixed span.

    Args:
        T (int): Number of real tokens.
        start_span (Tuple[int, int]): Inclusive ``(lo, hi)`` extended positions
            that open the ordering, listed left to right.
        rng (np.random.Generator): Random source.

    Returns:
        SpiralOrdering: The span followed by a uniformly drawn interleaving of
        the remaining left and right growth steps.

    Raises:
        InvalidOrderingError: for an empty span or one outside ``[0, T+1]``.
    """
    lo, hi = (int(p) for p in start_span)
    if not 0 <= lo <= hi <= T + 1:
        raise InvalidOrderingError(f"start span {start_span} outside [0, {T + 1}]")
    moves = np.array([0] * lo + [1] * (T + 1 - hi), dtype=np.int8)
    moves = rng.permutation(moves)
    z = list(range(lo, hi + 1))
    for move in moves:
        if move:
            hi += 1
            z.append(hi)
        else:
            lo -= 1
            z.append(lo)
    return SpiralOrdering(tuple(z), T)


def reform(
    tokens: Sequence[Hashable],
    z: SpiralOrdering,
    eol: Hashable = EOL,
    eor: Hashable = EOR,
) -> ReformedSequence:
    """Rewrite ``tokens`` in the decode order given by ``z``.

    Element ``i`` carries the token at ``z_i``; its direction is LEFT when the
    next position lies left of everything placed so far, RIGHT otherwise. The
    final element is RIGHT by convention.
    """
    T = len(tokens)
    z_seq = z.z if isinstance(z, SpiralOrdering) else tuple(z)
    if not is_valid_ordering(z_seq, T):
        raise InvalidOrderingError(f"{list(z_seq)} is not a valid ordering for T={T}")
    extended = [eol, *tokens, eor]
    elements = []
    lowest = z_seq[0]
    for i, pos in enumerate(z_seq):
        lowest = min(lowest, pos)
        if i + 1 < len(z_seq) and z_seq[i + 1] < lowest:
            direction = Direction.LEFT
        else:
            direction = Direction.RIGHT
        elements.append(DirectedToken(extended[pos], direction))
    return ReformedSequence(tuple(elements))


def restore(
    reformed: ReformedSequence, eol: Hashable = EOL, eor: Hashable = EOR
) -> Tuple[List[Hashable], SpiralOrdering]:
    """Replay a reformed sequence into its linear sentence and ordering.

    Raises:
        MalformedSequenceError: when an end marker is missing or duplicated,
        when an element attaches beyond ``[EOL]``/``[EOR]``, or when an end
        marker attaches on the wrong side.
    """
    elements = list(reformed)
    tokens = [e.token for e in elements]
    for marker in (eol, eor):
        if tokens.count(marker) != 1:
            raise MalformedSequenceError(
                f"{marker} must appear exactly once, found {tokens.count(marker)}"
            )

    offsets = [0]
    lo = hi = 0
    left_closed = tokens[0] == eol
    right_closed = tokens[0] == eor
    for prev, cur in zip(elements, elements[1:]):
        if prev.direction is Direction.LEFT:
            if left_closed:
                raise MalformedSequenceError(f"{cur.token!r} attached left of {eol}")
            if cur.token == eor:
                raise MalformedSequenceError(f"{eor} attached on the left side")
            lo -= 1
            offsets.append(lo)
            left_closed = cur.token == eol
        else:
            if right_closed:
                raise MalformedSequenceError(f"{cur.token!r} attached right of {eor}")
            if cur.token == eol:
                raise MalformedSequenceError(f"{eol} attached on the right side")
            hi += 1
            offsets.append(hi)
            right_closed = cur.token == eor

    z = tuple(o - lo for o in offsets)
    linear = [None] * len(elements)
    for pos, token in zip(z, tokens):
        linear[pos] = token
    return linear[1:-1], SpiralOrdering(z, len(elements) - 2)


def format_trace(reformed: ReformedSequence) -> str:
    """Render ``token/dir`` items; the final item carries no direction.

    A final token whose text itself ends in ``/+`` or ``/-`` keeps its
    direction suffix so that ``parse_trace`` reads it back unchanged.
    """
    items = [f"{e.token}/{e.direction}" for e in reformed.elements[:-1]]
    if reformed.elements:
        last = reformed.elements[-1]
        text = str(last.token)
        items.append(f"{text}/{last.direction}" if text.endswith(("/+", "/-")) else text)
    return " ".join(items)


def parse_trace(text: str) -> ReformedSequence:
    """Parse the text produced by ``format_trace``.

    The final item may omit its direction, which then defaults to RIGHT.
    """
    items = text.split()
    if not items:
        raise MalformedSequenceError("empty trace")
    elements = []
    for i, item in enumerate(items):
        token, sep, symbol = item.rpartition("/")
        last = i == len(items) - 1
        if sep and token and symbol in ("+", "-"):
            elements.append(DirectedToken(token, Direction.parse(symbol)))
        elif last:
            elements.append(DirectedToken(item, Direction.RIGHT))
        else:
            raise MalformedSequenceError(f"trace item {item!r} lacks a direction")
    return ReformedSequence(tuple(elements))
