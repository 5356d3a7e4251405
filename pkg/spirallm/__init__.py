"""
SpiralLM: translation with spiral generation orderings.

A decoder grows the target sentence outward from a start token, one step to
the left or right at a time. The package holds the ordering algebra, a small
numpy encoder-decoder with a start-token head, training with sampled
orderings and beam search over directed hypotheses.
"""

import logging

from .config import BeamConfig, Config, ModelConfig, RunConfig, TrainConfig
from .inference import SpiralInference, Translation
from .spiral_model import SpiralModel

try:
    from ._version import __version__
except ImportError:  # source checkout without a build
    __version__ = "0.0.0"

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

__all__ = [
    "BeamConfig",
    "Config",
    "ModelConfig",
    "RunConfig",
    "TrainConfig",
    "SpiralInference",
    "SpiralModel",
    "Translation",
    "load_trainer",
    "__version__",
]


def load_trainer(config, corpus, stopwords=None):
    """Build a SpiralTrainer for ``config`` and ``corpus``."""
    from .trainers.spiral_trainer import SpiralTrainer

    return SpiralTrainer(config, corpus, stopwords)
