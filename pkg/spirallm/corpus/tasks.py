"""Synthetic parallel tasks.

Sentences are drawn from a seeded generator and routed to train, dev or
test by a hash of the source string, so the splits never share a source
and the corpus is a pure function of its TaskSpec.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np

from ..config import TaskSpec
from ..errors import SpecError

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")


class SentencePair(NamedTuple):
    source: Tuple[str, ...]
    target: Tuple[str, ...]


@dataclass
class ParallelCorpus:
    train: List[SentencePair] = field(default_factory=list)
    dev: List[SentencePair] = field(default_factory=list)
    test: List[SentencePair] = field(default_factory=list)
    stopwords: Tuple[str, ...] = ()

    def splits(self) -> Iterator[Tuple[str, List[SentencePair]]]:
        for name in SPLITS:
            yield name, getattr(self, name)

    def all_pairs(self) -> List[SentencePair]:
        return self.train + self.dev + self.test


def source_tokens(vocab_size: int) -> List[str]:
    return [f"w{i}" for i in range(vocab_size)]


def default_lexicon(vocab_size: int, seed: int) -> Dict[str, str]:
    """Seeded bijection ``w<i> -> t<j>``."""
    perm = np.random.default_rng([seed, 0x1E71C0]).permutation(vocab_size)
    return {f"w{i}": f"t{j}" for i, j in enumerate(perm)}


def swap_adjacent(tokens: Sequence[str]) -> List[str]:
    """``a b c d e -> b a d c e``."""
    out = list(tokens)
    for i in range(0, len(out) - 1, 2):
        out[i], out[i + 1] = out[i + 1], out[i]
    return out


def transform(source: Sequence[str], kind: str, lexicon: Dict[str, str] = None) -> List[str]:
    if kind == "copy":
        return list(source)
    if kind == "reverse":
        return list(reversed(source))
    if kind == "lexicon":
        try:
            return swap_adjacent([lexicon[t] for t in source])
        except KeyError as e:
            raise SpecError(f"token {e.args[0]!r} has no lexicon entry") from None
    raise SpecError(f"unknown task kind {kind!r}")


def split_of(source: Sequence[str], weights: np.ndarray) -> int:
    """Stable split index from a 64-bit hash of the source string."""
    digest = hashlib.blake2b(" ".join(source).encode("utf-8"), digest_size=8).digest()
    u = int.from_bytes(digest, "little") / 2.0**64
    return min(int(np.searchsorted(np.cumsum(weights), u, side="right")), len(weights) - 1)


def _distinct_sentences(vocab_size: int, min_len: int, max_len: int) -> float:
    return float(sum(float(vocab_size) ** n for n in range(min_len, max_len + 1)))


def generate(task: TaskSpec) -> ParallelCorpus:
    """Build the train/dev/test corpus for ``task``.

    Raises:
        SpecError: when the vocabulary and lengths cannot yield enough distinct
        sources, or the lexicon does not match the source vocabulary.
    """
    if task.kind == "lexicon":
        lexicon = dict(task.lexicon) if task.lexicon else default_lexicon(task.vocab_size, task.seed)
        vocab = list(lexicon)
        if task.lexicon and len(vocab) != task.vocab_size:
            raise SpecError(
                f"lexicon has {len(vocab)} entries but vocab_size is {task.vocab_size}"
            )
    else:
        lexicon = None
        vocab = source_tokens(task.vocab_size)

    counts = np.array([task.n_train, task.n_dev, task.n_test], dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise SpecError("task requests no sentences")
    available = _distinct_sentences(len(vocab), task.min_len, task.max_len)
    if available < total:
        raise SpecError(
            f"vocab_size={len(vocab)} with lengths {task.min_len}..{task.max_len} allows "
            f"{int(available)} distinct sentences, {total} requested"
        )

    weights = counts / total
    rng = np.random.default_rng(task.seed)
    splits: List[List[SentencePair]] = [[], [], []]
    seen = set()
    budget = 50 * total + 1000
    attempts = 0
    while not all(len(s) >= n for s, n in zip(splits, counts)):
        if attempts == budget:
            raise SpecError(
                f"could not draw {total} distinct sentences in {budget} attempts; "
                "enlarge vocab_size or the length range"
            )
        attempts += 1
        length = int(rng.integers(task.min_len, task.max_len + 1))
        source = tuple(vocab[i] for i in rng.integers(0, len(vocab), size=length))
        if source in seen:
            continue
        seen.add(source)
        which = split_of(source, weights)
        if len(splits[which]) < counts[which]:
            target = tuple(transform(source, task.kind, lexicon))
            splits[which].append(SentencePair(source, target))

    logger.debug(
        "Generated %s task: %d/%d/%d pairs", task.kind, *(len(s) for s in splits)
    )
    return ParallelCorpus(*splits, stopwords=tuple(task.stopwords))


def subset(pairs: Sequence[SentencePair], fraction: float, seed: int) -> List[SentencePair]:
    """Keep ``ceil(fraction * N)`` pairs chosen by a seeded permutation, in original order."""
    if not 0.0 < fraction <= 1.0:
        raise SpecError(f"data fraction must be in (0, 1], got {fraction}")
    n = int(np.ceil(fraction * len(pairs)))
    keep = np.sort(np.random.default_rng([seed, 0xF4AC]).permutation(len(pairs))[:n])
    return [pairs[i] for i in keep]
