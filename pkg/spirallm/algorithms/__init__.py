from .ordering import (
    EOL,
    EOR,
    MAX_ENUMERATION_LENGTH,
    DirectedToken,
    Direction,
    ReformedSequence,
    SpiralOrdering,
    count_orderings,
    enumerate_orderings,
    format_trace,
    is_valid_ordering,
    l2r_ordering,
    ordering_from_removal_bits,
    parse_trace,
    r2l_ordering,
    reform,
    restore,
    sample_constrained_ordering,
    sample_uniform_ordering,
)
from .beam_search import (
    DecodeResult,
    Hypothesis,
    SpecialIds,
    StepScorer,
    decode,
    expand_step,
    greedy_decode,
    init_beams,
    length_penalty,
    penalized_score,
)

__all__ = [
    "EOL",
    "EOR",
    "MAX_ENUMERATION_LENGTH",
    "DirectedToken",
    "Direction",
    "ReformedSequence",
    "SpiralOrdering",
    "count_orderings",
    "enumerate_orderings",
    "format_trace",
    "is_valid_ordering",
    "l2r_ordering",
    "ordering_from_removal_bits",
    "parse_trace",
    "r2l_ordering",
    "reform",
    "restore",
    "sample_constrained_ordering",
    "sample_uniform_ordering",
    "DecodeResult",
    "Hypothesis",
    "SpecialIds",
    "StepScorer",
    "decode",
    "expand_step",
    "greedy_decode",
    "init_beams",
    "length_penalty",
    "penalized_score",
]
