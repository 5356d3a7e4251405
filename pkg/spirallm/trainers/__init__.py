from .instances import (
    Batch,
    EncodedPair,
    TrainingInstance,
    collate,
    encode_pairs,
    make_batches,
    make_training_instance,
    start_labels,
)
from .losses import LossParts, start_loss, total_loss, translation_loss
from .sampling import (
    first_stage2_step,
    fixed_ordering,
    sample_ordering_stage1,
    sample_orderings_stage2,
    stage_of,
    top_start_tokens,
)
from .spiral_trainer import METRICS_HEADER, SpiralTrainer, StepLoss

__all__ = [
    "Batch",
    "EncodedPair",
    "TrainingInstance",
    "collate",
    "encode_pairs",
    "make_batches",
    "make_training_instance",
    "start_labels",
    "LossParts",
    "start_loss",
    "total_loss",
    "translation_loss",
    "first_stage2_step",
    "fixed_ordering",
    "sample_ordering_stage1",
    "sample_orderings_stage2",
    "stage_of",
    "top_start_tokens",
    "METRICS_HEADER",
    "SpiralTrainer",
    "StepLoss",
]
