"""Direction-branching beam search over spiral decode states.

A hypothesis is a contiguous segment that grows one token at a time on
either side. Each step forks every open hypothesis into a left and a right
continuation, scores the next token for each fork, pools every
(hypothesis, direction, token) candidate and keeps the best ``beam`` by
length-penalised score.
"""

import logging
from dataclasses import dataclass, replace
from typing import Collection, List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..config import BeamConfig
from ..errors import InputError, MalformedSequenceError, UsageError
from .ordering import DirectedToken, Direction, ReformedSequence, SpiralOrdering, restore

logger = logging.getLogger(__name__)


class SpecialIds(NamedTuple):
    pad: int = 0
    eol: int = 1
    eor: int = 2


class StepScorer(Protocol):
    """What the search needs from a model bound to one source sentence."""

    vocab_size: int

    def start_log_probs(self) -> np.ndarray:
        """``(V,)`` log start-head probabilities."""

    def next_log_probs(self, contexts: Sequence[Sequence[DirectedToken]]) -> np.ndarray:
        """``(N, V)`` next-token log-probabilities, one row per context.

        The last element of each context carries the direction in which the
        scored token attaches.
        """


@dataclass(frozen=True)
class Hypothesis:
    trace: Tuple[DirectedToken, ...]
    segment: Tuple[int, ...]
    eol_done: bool
    eor_done: bool
    sum_logprob: float
    n_real: int
    truncated: bool = False

    @property
    def complete(self) -> bool:
        return self.eol_done and self.eor_done

    def legal_directions(self) -> List[Direction]:
        dirs = []
        if not self.eol_done:
            dirs.append(Direction.LEFT)
        if not self.eor_done:
            dirs.append(Direction.RIGHT)
        return dirs

    def context(self, direction: Direction) -> Tuple[DirectedToken, ...]:
        """The trace with its last element pointing in ``direction``."""
        return self.trace[:-1] + (DirectedToken(self.trace[-1].token, direction),)

    def extend(
        self, direction: Direction, token: int, logprob: float, specials: SpecialIds
    ) -> "Hypothesis":
        if direction is Direction.LEFT:
            segment = (token,) + self.segment
        else:
            segment = self.segment + (token,)
        return Hypothesis(
            trace=self.context(direction) + (DirectedToken(token, Direction.RIGHT),),
            segment=segment,
            eol_done=self.eol_done or token == specials.eol,
            eor_done=self.eor_done or token == specials.eor,
            sum_logprob=self.sum_logprob + logprob,
            n_real=self.n_real + (token not in (specials.eol, specials.eor)),
        )


@dataclass
class DecodeResult:
    tokens: List[int]
    trace: ReformedSequence
    ordering: Optional[SpiralOrdering]
    score: float
    sum_logprob: float
    truncated: bool = False


def length_penalty(n_real: int, alpha: float) -> float:
    return ((5.0 + n_real) / 6.0) ** alpha


def penalized_score(h: Hypothesis, alpha: float) -> float:
    """``sum_logprob / ((5 + |Y|) / 6) ** alpha`` with ``|Y|`` counting real tokens."""
    return h.sum_logprob / length_penalty(h.n_real, alpha)


def _optimistic_bound(h: Hypothesis, cfg: BeamConfig) -> float:
    # log-probs only decrease and the divisor only grows, so the best a
    # negative sum can reach is dividing by the longest allowed penalty
    if cfg.alpha == 0.0:
        return h.sum_logprob
    return h.sum_logprob / length_penalty(cfg.max_steps, cfg.alpha)


def _stable_top(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, ties kept in pool order."""
    return np.argsort(-scores, kind="stable")[:k]


def init_beams(
    scorer: StepScorer,
    cfg: BeamConfig,
    specials: SpecialIds = SpecialIds(),
    stopword_ids: Collection[int] = (),
    forced_ids: Optional[Sequence[int]] = None,
) -> List[Hypothesis]:
    """Seed the search from the start head, a forced start or an end marker.

    Raises:
        InputError: for a forced token that is a special id or outside the vocabulary.
    """
    if cfg.l2r_forced or cfg.r2l_forced:
        marker = specials.eol if cfg.l2r_forced else specials.eor
        return [
            Hypothesis(
                trace=(DirectedToken(marker, Direction.RIGHT),),
                segment=(marker,),
                eol_done=cfg.l2r_forced,
                eor_done=cfg.r2l_forced,
                sum_logprob=0.0,
                n_real=0,
            )
        ]

    if forced_ids is not None:
        forced = [int(t) for t in forced_ids]
        for t in forced:
            if not 0 <= t < scorer.vocab_size or t in specials:
                raise InputError(f"forced start token id {t} is not an ordinary target token")
        logprob = 0.0
        if not cfg.forced_start_prob_one:
            logprob = float(scorer.start_log_probs()[forced[0]])
        return [
            Hypothesis(
                trace=tuple(DirectedToken(t, Direction.RIGHT) for t in forced),
                segment=tuple(forced),
                eol_done=False,
                eor_done=False,
                sum_logprob=logprob,
                n_real=len(forced),
            )
        ]

    start = np.asarray(scorer.start_log_probs(), dtype=np.float64)
    eligible = np.ones(start.shape[0], dtype=bool)
    eligible[list(specials)] = False
    for t in stopword_ids:
        eligible[t] = False
    candidates = np.flatnonzero(eligible)
    if candidates.size == 0:
        raise InputError("no eligible start token: every target token is special or a stop word")
    order = candidates[_stable_top(start[candidates], cfg.beam)]
    return [
        Hypothesis(
            trace=(DirectedToken(int(t), Direction.RIGHT),),
            segment=(int(t),),
            eol_done=False,
            eor_done=False,
            sum_logprob=float(start[t]),
            n_real=1,
        )
        for t in order
    ]


def _legal_mask(vocab_size: int, direction: Direction, specials: SpecialIds) -> np.ndarray:
    mask = np.ones(vocab_size, dtype=bool)
    mask[specials.pad] = False
    if direction is Direction.LEFT:
        mask[specials.eor] = False
    else:
        mask[specials.eol] = False
    return mask


def expand_step(
    beams: Sequence[Hypothesis],
    scorer: StepScorer,
    cfg: BeamConfig,
    specials: SpecialIds = SpecialIds(),
) -> Tuple[List[Hypothesis], List[Hypothesis]]:
    """One round of direction-branching expansion.

    Returns:
        Tuple[List[Hypothesis], List[Hypothesis]]: surviving open hypotheses
        and those that just placed their second end marker, together at most
        ``cfg.beam`` and in descending penalised score.
    """
    open_beams = [h for h in beams if not h.complete]
    if not open_beams:
        raise UsageError("expand_step needs at least one incomplete hypothesis")

    branches = [(h, d) for h in open_beams for d in h.legal_directions()]
    logp = np.asarray(
        scorer.next_log_probs([h.context(d) for h, d in branches]), dtype=np.float64
    )
    vocab = logp.shape[1]

    totals = np.full(logp.shape, -np.inf)
    penalised = np.full(logp.shape, -np.inf)
    for row, (h, d) in enumerate(branches):
        legal = _legal_mask(vocab, d, specials)
        totals[row, legal] = h.sum_logprob + logp[row, legal]
        divisor = np.full(vocab, length_penalty(h.n_real + 1, cfg.alpha))
        divisor[[specials.eol, specials.eor]] = length_penalty(h.n_real, cfg.alpha)
        penalised[row, legal] = totals[row, legal] / divisor[legal]

    flat = penalised.ravel()
    finite = np.flatnonzero(np.isfinite(flat))
    keep = finite[_stable_top(flat[finite], cfg.beam)]

    survivors, completed = [], []
    for idx in keep:
        row, token = divmod(int(idx), vocab)
        h, d = branches[row]
        child = h.extend(d, token, float(logp[row, token]), specials)
        (completed if child.complete else survivors).append(child)
    return survivors, completed


def _finish(h: Hypothesis, alpha: float, specials: SpecialIds) -> DecodeResult:
    score = penalized_score(h, alpha)
    tokens = [t for t in h.segment if t not in (specials.eol, specials.eor)]
    trace = ReformedSequence(h.trace)
    ordering = None
    if h.complete:
        restored, ordering = restore(trace, eol=specials.eol, eor=specials.eor)
        if restored != tokens:
            raise MalformedSequenceError("trace does not replay to the decoded segment")
    return DecodeResult(tokens, trace, ordering, score, h.sum_logprob, h.truncated)


def _best(completed: Sequence[Hypothesis], alpha: float) -> Optional[Hypothesis]:
    finished = [h for h in completed if not h.truncated] or list(completed)
    if not finished:
        return None
    return max(finished, key=lambda h: penalized_score(h, alpha))


def decode(
    scorer: StepScorer,
    cfg: BeamConfig,
    specials: SpecialIds = SpecialIds(),
    stopword_ids: Collection[int] = (),
    forced_ids: Optional[Sequence[int]] = None,
) -> DecodeResult:
    """Beam search to the best completed hypothesis.

    Completed hypotheses are set aside and compared at the end. The search
    stops early once no open hypothesis can still beat the best completed
    one; open hypotheses reaching ``cfg.max_steps`` tuples are closed and
    flagged truncated.
    """
    beams = init_beams(scorer, cfg, specials, stopword_ids, forced_ids)
    completed: List[Hypothesis] = []

    while beams:
        best = _best([h for h in completed if not h.truncated], cfg.alpha)
        if best is not None:
            best_score = penalized_score(best, cfg.alpha)
            if all(_optimistic_bound(h, cfg) <= best_score for h in beams):
                break
        beams, done = expand_step(beams, scorer, cfg, specials)
        completed.extend(done)
        over = [h for h in beams if len(h.trace) >= cfg.max_steps]
        if over:
            completed.extend(replace(h, truncated=True) for h in over)
            beams = [h for h in beams if len(h.trace) < cfg.max_steps]

    best = _best(completed, cfg.alpha)
    if best is None:
        raise UsageError("search ended without any hypothesis")
    if best.truncated:
        logger.debug("No hypothesis completed within %d steps", cfg.max_steps)
    return _finish(best, cfg.alpha, specials)


def greedy_decode(
    scorer: StepScorer,
    cfg: BeamConfig,
    specials: SpecialIds = SpecialIds(),
    stopword_ids: Collection[int] = (),
    forced_ids: Optional[Sequence[int]] = None,
) -> DecodeResult:
    """Single-path reference search.

    At every step both directions are scored and the single best
    (direction, token) by penalised score is taken, preferring LEFT and then
    the lower token id on ties.
    """
    cfg1 = cfg.model_copy(update={"beam": 1})
    h = init_beams(scorer, cfg1, specials, stopword_ids, forced_ids)[0]
    while not h.complete:
        if len(h.trace) >= cfg.max_steps:
            h = replace(h, truncated=True)
            break
        best = None
        for d in h.legal_directions():
            logp = np.asarray(scorer.next_log_probs([h.context(d)])[0], dtype=np.float64)
            legal = _legal_mask(logp.shape[0], d, specials)
            for token in np.flatnonzero(legal):
                child = h.extend(d, int(token), float(logp[token]), specials)
                score = penalized_score(child, cfg.alpha)
                if best is None or score > best[0]:
                    best = (score, child)
        h = best[1]
    return _finish(h, cfg.alpha, specials)
