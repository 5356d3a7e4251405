from .projector import Projector
from .mlp import MLP
from .rms_norm import RMSNorm
from .attention import MultiHeadAttention, causal_bias, padding_bias
from .start_head import StartHead, StartHeadOutput

__all__ = [
    "Projector",
    "MLP",
    "RMSNorm",
    "MultiHeadAttention",
    "causal_bias",
    "padding_bias",
    "StartHead",
    "StartHeadOutput",
]
