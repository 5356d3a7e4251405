from collections import Counter
from typing import Sequence

import numpy as np

from ..errors import InputError


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
) -> float:
    """Corpus-level BLEU with a single reference per sentence.

    Clipped n-gram matches and candidate n-gram totals are summed over the
    corpus for every order ``1..max_order``; the score is the geometric mean
    of those precisions times the brevity penalty ``exp(1 - r / c)`` when the
    candidates are shorter than the references. Any zero precision gives 0.

    Raises:
        InputError: for an empty corpus or mismatched list lengths.
    """
    if len(candidates) != len(references):
        raise InputError(
            f"{len(candidates)} candidates but {len(references)} references"
        )
    if not candidates:
        raise InputError("BLEU of an empty corpus is undefined")

    matches = np.zeros(max_order)
    possible = np.zeros(max_order)
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            cand_counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
            possible[n - 1] += max(len(cand) - n + 1, 0)

    if cand_len == 0 or np.any(possible == 0) or np.any(matches == 0):
        return 0.0
    log_precision = np.mean(np.log(matches / possible))
    brevity = 1.0 if cand_len > ref_len else np.exp(1.0 - ref_len / cand_len)
    return float(brevity * np.exp(log_precision))


def exact_match(candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> float:
    if len(candidates) != len(references) or not candidates:
        raise InputError("exact match needs equally many, non-zero candidates and references")
    return float(np.mean([list(c) == list(r) for c, r in zip(candidates, references)]))


def occurrence_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """ROC AUC of ``scores`` against binary ``labels`` (ties count half)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("AUC needs both positive and negative labels")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    # average ranks over tied runs
    starts = np.flatnonzero(np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])
    ends = np.r_[starts[1:], scores.size]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
