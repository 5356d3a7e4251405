import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .adapters import (
    MLP,
    MultiHeadAttention,
    Projector,
    RMSNorm,
    StartHead,
    StartHeadOutput,
    causal_bias,
    padding_bias,
)
from .algorithms.ordering import DirectedToken
from .config import ModelConfig
from .embedding import SourceEmbedding, TupleEmbedding
from .errors import CheckpointError, InputError
from .numerics import (
    Module,
    NdValue,
    add,
    dropout,
    load_checkpoint,
    matmul,
    reshape,
    save_checkpoint,
    slice_,
    transpose,
)

logger = logging.getLogger(__name__)


class EncoderLayer(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.p = cfg.dropout
        self.norm1 = self.add_module("norm1", RMSNorm(cfg.d_model, rng))
        self.attn = self.add_module("attn", MultiHeadAttention(cfg.d_model, cfg.n_heads, rng, cfg.dropout))
        self.norm2 = self.add_module("norm2", RMSNorm(cfg.d_model, rng))
        self.ff = self.add_module("ff", MLP(cfg.d_model, cfg.d_ff, rng, cfg.dropout))

    def __call__(self, x: NdValue, bias: np.ndarray) -> NdValue:
        x = add(x, dropout(self.attn(self.norm1(x), bias=bias), self.p, self.training, self.rng))
        return add(x, dropout(self.ff(self.norm2(x)), self.p, self.training, self.rng))


class DecoderLayer(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.p = cfg.dropout
        self.norm1 = self.add_module("norm1", RMSNorm(cfg.d_model, rng))
        self.self_attn = self.add_module(
            "self_attn", MultiHeadAttention(cfg.d_model, cfg.n_heads, rng, cfg.dropout)
        )
        self.norm2 = self.add_module("norm2", RMSNorm(cfg.d_model, rng))
        self.cross_attn = self.add_module(
            "cross_attn", MultiHeadAttention(cfg.d_model, cfg.n_heads, rng, cfg.dropout)
        )
        self.norm3 = self.add_module("norm3", RMSNorm(cfg.d_model, rng))
        self.ff = self.add_module("ff", MLP(cfg.d_model, cfg.d_ff, rng, cfg.dropout))

    def __call__(
        self, x: NdValue, memory: NdValue, self_bias: np.ndarray, cross_bias: np.ndarray
    ) -> NdValue:
        x = add(x, dropout(self.self_attn(self.norm1(x), bias=self_bias), self.p, self.training, self.rng))
        x = add(
            x,
            dropout(
                self.cross_attn(self.norm2(x), memory, bias=cross_bias),
                self.p,
                self.training,
                self.rng,
            ),
        )
        return add(x, dropout(self.ff(self.norm3(x)), self.p, self.training, self.rng))


def _as_batch(ids, mask) -> Tuple[np.ndarray, np.ndarray, bool]:
    ids = np.asarray(ids, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = ids[None, :]
    if mask is None:
        mask = np.ones(ids.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if single and mask.ndim == 1:
            mask = mask[None, :]
    return ids, mask, single


class SpiralModel(Module):
    """Encoder-decoder over direction-annotated decode tuples.

    Besides next-token logits the model carries a start head that scores,
    for every target-vocabulary token, how likely it is to occur in the
    output. Inputs may be single sequences ``(L,)`` or padded batches
    ``(B, L)`` with boolean masks; outputs follow the same rank.
    """

    def __init__(self, config: ModelConfig, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.p = config.dropout
        self.src_embed = self.add_module(
            "src_embed", SourceEmbedding(config.src_vocab_size, config.d_model, config.max_steps, rng)
        )
        self.tgt_embed = self.add_module(
            "tgt_embed", TupleEmbedding(config.tgt_vocab_size, config.d_model, config.max_steps, rng)
        )
        self.encoder = [
            self.add_module(f"encoder.{i}", EncoderLayer(config, rng)) for i in range(config.n_layers)
        ]
        self.decoder = [
            self.add_module(f"decoder.{i}", DecoderLayer(config, rng)) for i in range(config.n_layers)
        ]
        self.enc_norm = self.add_module("enc_norm", RMSNorm(config.d_model, rng))
        self.dec_norm = self.add_module("dec_norm", RMSNorm(config.d_model, rng))
        self.output = None
        if not config.tie_embeddings:
            self.output = self.add_module(
                "output", Projector(config.d_model, config.tgt_vocab_size, rng, bias=False)
            )
        self.start_head = self.add_module(
            "start_head", StartHead(config.d_model, config.tgt_vocab_size, rng)
        )

    def encode(self, source_ids, src_mask: Optional[np.ndarray] = None) -> NdValue:
        """Encoder states ``h``: ``(S,) -> (S, D)`` or ``(B, S) -> (B, S, D)``."""
        ids, mask, single = _as_batch(source_ids, src_mask)
        if ids.shape[-1] == 0 or not mask.any(axis=-1).all():
            raise InputError("cannot encode an empty source sentence")
        x = dropout(self.src_embed(ids), self.p, self.training, self.rng)
        bias = padding_bias(mask)
        for layer in self.encoder:
            x = layer(x, bias)
        h = self.enc_norm(x)
        return slice_(h, 0) if single else h

    def decode_forward(
        self,
        token_ids,
        direction_ids,
        h: NdValue,
        src_mask: Optional[np.ndarray] = None,
        tgt_mask: Optional[np.ndarray] = None,
    ) -> NdValue:
        """Per-step logits over the target vocabulary.

        Step ``t`` scores the token that attaches on the side named by the
        direction of tuple ``t``; it sees tuples ``0..t`` only.
        """
        tokens, mask, single = _as_batch(token_ids, tgt_mask)
        directions = np.asarray(direction_ids, dtype=np.int64).reshape(tokens.shape)
        if tokens.shape[-1] == 0:
            raise InputError("decode prefix must hold at least one tuple")
        memory = reshape(h, (1,) + h.shape) if single else h
        if src_mask is None:
            src_mask = np.ones(memory.shape[:2], dtype=bool)
        src_mask = np.asarray(src_mask, dtype=bool).reshape(memory.shape[:2])

        x = dropout(self.tgt_embed(tokens, directions), self.p, self.training, self.rng)
        self_bias = causal_bias(tokens.shape[-1]) + padding_bias(mask)
        cross_bias = padding_bias(src_mask)
        for layer in self.decoder:
            x = layer(x, memory, self_bias, cross_bias)
        x = self.dec_norm(x)
        if self.output is not None:
            logits = self.output(x)
        else:
            logits = matmul(x, transpose(self.tgt_embed.token, (1, 0)))
        return slice_(logits, 0) if single else logits

    def decode_prefix(self, prefix: Sequence[DirectedToken], h: NdValue) -> NdValue:
        """``decode_forward`` for a single prefix of ``DirectedToken`` with integer tokens."""
        tokens = np.array([int(e.token) for e in prefix], dtype=np.int64)
        directions = np.array([e.direction.index for e in prefix], dtype=np.int64)
        return self.decode_forward(tokens, directions, h)

    def start_potentials(self, h: NdValue) -> NdValue:
        return self.start_head.potentials(h)

    def start_probs(self, v: NdValue, src_mask: Optional[np.ndarray] = None) -> StartHeadOutput:
        return self.start_head.pool(v, src_mask)

    def attention_map(self, h: NdValue) -> np.ndarray:
        """Start-head attention ``alpha`` of shape ``(S, V)`` for one source."""
        return self.start_probs(self.start_potentials(h)).alpha.data

    def save(self, path: Union[str, Path], metadata: Optional[Dict[str, Any]] = None) -> Path:
        config = {"model": self.config.model_dump()}
        config.update(metadata or {})
        return save_checkpoint(path, config, self.state_dict())

    @classmethod
    def load(cls, path: Union[str, Path]) -> Tuple["SpiralModel", Dict[str, Any]]:
        config, tensors = load_checkpoint(path)
        if "model" not in config:
            raise CheckpointError(f"{path}: config block has no model section")
        model = cls(ModelConfig(**config["model"]))
        try:
            model.load_state_dict(tensors)
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"{path}: {e}") from e
        model.eval()
        return model, config

