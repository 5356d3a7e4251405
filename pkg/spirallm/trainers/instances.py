from typing import Collection, List, NamedTuple, Sequence

import numpy as np

from ..algorithms.beam_search import SpecialIds
from ..algorithms.ordering import SpiralOrdering, reform
from ..corpus import SentencePair, Vocab


class EncodedPair(NamedTuple):
    index: int
    source: np.ndarray  # (S,) source ids
    target: np.ndarray  # (T,) target ids, no end markers
    start_labels: np.ndarray  # (V,) occurrence labels


class TrainingInstance(NamedTuple):
    pair_index: int
    source: np.ndarray
    input_tokens: np.ndarray  # (T+1,) decoder input tuples, token part
    input_directions: np.ndarray  # (T+1,) direction index of each input tuple
    targets: np.ndarray  # (T+1,) token attached after each input tuple
    start_labels: np.ndarray
    ordering: SpiralOrdering


class Batch(NamedTuple):
    src: np.ndarray
    src_mask: np.ndarray
    tokens: np.ndarray
    directions: np.ndarray
    tgt_mask: np.ndarray
    targets: np.ndarray
    start_labels: np.ndarray
    pair_indices: np.ndarray


def start_labels(
    target_ids: Sequence[int],
    vocab_size: int,
    stopword_ids: Collection[int] = (),
    specials: SpecialIds = SpecialIds(),
) -> np.ndarray:
    """1 for every target token that is neither a stop word nor reserved."""
    labels = np.zeros(vocab_size, dtype=np.float32)
    labels[np.asarray(target_ids, dtype=np.int64)] = 1.0
    labels[list(specials)] = 0.0
    if stopword_ids:
        labels[list(stopword_ids)] = 0.0
    return labels


def encode_pairs(
    pairs: Sequence[SentencePair],
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    stopwords: Collection[str] = (),
) -> List[EncodedPair]:
    lowered = {w.lower() for w in stopwords}
    stop_ids = [i for i, t in enumerate(tgt_vocab.to_list()) if t.lower() in lowered]
    out = []
    for i, pair in enumerate(pairs):
        target = tgt_vocab.encode(pair.target)
        out.append(
            EncodedPair(
                index=i,
                source=src_vocab.encode(pair.source),
                target=target,
                start_labels=start_labels(target, len(tgt_vocab), stop_ids, tgt_vocab.specials),
            )
        )
    return out


def make_training_instance(
    pair: EncodedPair, z: SpiralOrdering, specials: SpecialIds = SpecialIds()
) -> TrainingInstance:
    """Teacher-forcing inputs and targets for ``pair`` generated in order ``z``.

    Input tuple ``t`` is element ``t`` of the reformed target; the target at
    step ``t`` is the token of element ``t + 1``, i.e. the neighbour on the
    side named by input ``t``'s direction.

    Raises:
        InvalidOrderingError: when ``z`` is not valid for the target length.
    """
    reformed = reform(
        [int(t) for t in pair.target], z, eol=specials.eol, eor=specials.eor
    )
    elements = reformed.elements
    return TrainingInstance(
        pair_index=pair.index,
        source=pair.source,
        input_tokens=np.array([int(e.token) for e in elements[:-1]], dtype=np.int64),
        input_directions=np.array([e.direction.index for e in elements[:-1]], dtype=np.int64),
        targets=np.array([int(e.token) for e in elements[1:]], dtype=np.int64),
        start_labels=pair.start_labels,
        ordering=z if isinstance(z, SpiralOrdering) else SpiralOrdering(tuple(z), len(pair.target)),
    )


def collate(instances: Sequence[TrainingInstance], pad: int = 0) -> Batch:
    """Pad a list of instances into one batch with boolean masks."""
    b = len(instances)
    src_len = max(len(i.source) for i in instances)
    tgt_len = max(len(i.input_tokens) for i in instances)
    src = np.full((b, src_len), pad, dtype=np.int64)
    src_mask = np.zeros((b, src_len), dtype=bool)
    tokens = np.full((b, tgt_len), pad, dtype=np.int64)
    directions = np.zeros((b, tgt_len), dtype=np.int64)
    targets = np.full((b, tgt_len), pad, dtype=np.int64)
    tgt_mask = np.zeros((b, tgt_len), dtype=bool)
    for row, inst in enumerate(instances):
        s, t = len(inst.source), len(inst.input_tokens)
        src[row, :s] = inst.source
        src_mask[row, :s] = True
        tokens[row, :t] = inst.input_tokens
        directions[row, :t] = inst.input_directions
        targets[row, :t] = inst.targets
        tgt_mask[row, :t] = True
    return Batch(
        src=src,
        src_mask=src_mask,
        tokens=tokens,
        directions=directions,
        tgt_mask=tgt_mask,
        targets=targets,
        start_labels=np.stack([i.start_labels for i in instances]),
        pair_indices=np.array([i.pair_index for i in instances], dtype=np.int64),
    )


def make_batches(
    instances: Sequence[TrainingInstance], batch_size: int, rng: np.random.Generator
) -> List[Batch]:
    """Bucket by decode length, chunk, then shuffle the batch order."""
    order = np.argsort([len(i.input_tokens) for i in instances], kind="stable")
    chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    return [collate([instances[j] for j in chunks[k]]) for k in rng.permutation(len(chunks))]
