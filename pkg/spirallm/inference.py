import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .algorithms.beam_search import DecodeResult, decode, greedy_decode
from .algorithms.ordering import DirectedToken, ReformedSequence, format_trace
from .config import BeamConfig
from .corpus import SentencePair, Vocab, bleu, exact_match, tokenize
from .errors import DataError, SpiralError
from .mode_decorators import eval_only, inference_mode
from .numerics import NdValue
from .spiral_model import SpiralModel

logger = logging.getLogger(__name__)

ATTENTION_HEADER = ("src_token", "tgt_vocab_token", "alpha")


class ModelScorer:
    """Binds a frozen model to the encoder states of one source sentence."""

    def __init__(self, model: SpiralModel, h: NdValue):
        self.model = model
        self.h = h
        self.vocab_size = model.config.tgt_vocab_size
        self._start: Optional[np.ndarray] = None

    def start_log_probs(self) -> np.ndarray:
        if self._start is None:
            out = self.model.start_probs(self.model.start_potentials(self.h))
            logits = out.logits.data.astype(np.float64)
            self._start = -np.logaddexp(0.0, -logits)
        return self._start

    def next_log_probs(self, contexts: Sequence[Sequence[DirectedToken]]) -> np.ndarray:
        n = len(contexts)
        lengths = np.array([len(c) for c in contexts])
        tokens = np.zeros((n, lengths.max()), dtype=np.int64)
        directions = np.zeros_like(tokens)
        for i, context in enumerate(contexts):
            tokens[i, : lengths[i]] = [int(e.token) for e in context]
            directions[i, : lengths[i]] = [e.direction.index for e in context]
        mask = np.arange(tokens.shape[1])[None, :] < lengths[:, None]
        memory = NdValue(np.broadcast_to(self.h.data, (n,) + self.h.shape))
        logits = self.model.decode_forward(tokens, directions, memory, tgt_mask=mask).data
        last = logits[np.arange(n), lengths - 1].astype(np.float64)
        shifted = last - last.max(axis=-1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class Translation(NamedTuple):
    source: str
    tokens: List[str]
    trace: Optional[ReformedSequence]
    score: float
    truncated: bool = False
    error: Optional[str] = None

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def trace_text(self) -> str:
        return format_trace(self.trace) if self.trace is not None else ""


class EvaluationReport(NamedTuple):
    bleu: float
    exact_match: float
    sentence_bleu: List[float]
    hypotheses: List[Translation]


def beam_config_for(strategy: Optional[str], cfg: BeamConfig) -> BeamConfig:
    """Pin fixed-direction models to their training start unless a start is forced."""
    if cfg.forced_start or cfg.l2r_forced or cfg.r2l_forced:
        return cfg
    if strategy == "l2r":
        return cfg.model_copy(update={"l2r_forced": True})
    if strategy == "r2l":
        return cfg.model_copy(update={"r2l_forced": True})
    return cfg


class SpiralInference:
    def __init__(
        self,
        model: SpiralModel,
        src_vocab: Vocab,
        tgt_vocab: Vocab,
        stopwords: Iterable[str] = (),
        beam_config: Optional[BeamConfig] = None,
        strategy: Optional[str] = None,
    ):
        """Decoding, evaluation and start-head inspection over a frozen model.

        Args:
            model (SpiralModel): Trained model, switched to eval mode here.
            src_vocab (Vocab): Frozen source vocabulary.
            tgt_vocab (Vocab): Frozen target vocabulary; ids 0..2 are reserved.
            stopwords (Iterable[str], optional): Tokens never proposed as start tokens.
            beam_config (BeamConfig, optional): Default search settings.
            strategy (str, optional): Training strategy; ``l2r`` and ``r2l`` models
                decode from the matching end marker by default.
        """
        self.model = model.eval()
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.stopwords: FrozenSet[str] = frozenset(w.lower() for w in stopwords)
        self.stopword_ids = [
            i for i, t in enumerate(tgt_vocab.to_list()) if t.lower() in self.stopwords
        ]
        self.strategy = strategy
        self.beam_config = beam_config or BeamConfig(max_steps=model.config.max_steps)

    @classmethod
    def load(
        cls,
        path: Union[str, Path],
        beam_config: Optional[BeamConfig] = None,
        extra_stopwords: Iterable[str] = (),
    ) -> "SpiralInference":
        """Load a checkpoint; ``extra_stopwords`` join the stop words it was trained with."""
        model, config = SpiralModel.load(path)
        try:
            src_vocab = Vocab.from_list(config["src_vocab"])
            tgt_vocab = Vocab.from_list(config["tgt_vocab"])
        except KeyError as e:
            raise DataError(f"{path}: checkpoint lacks vocabulary {e.args[0]!r}") from e
        strategy = config.get("train", {}).get("strategy")
        stopwords = set(config.get("stopwords", ())) | {w.lower() for w in extra_stopwords}
        return cls(model, src_vocab, tgt_vocab, sorted(stopwords), beam_config, strategy)

    def _tokens(self, source: Union[str, Sequence[str]]) -> List[str]:
        return tokenize(source) if isinstance(source, str) else list(source)

    def _scorer(self, source: Union[str, Sequence[str]]) -> ModelScorer:
        ids = self.src_vocab.encode(self._tokens(source))
        return ModelScorer(self.model, self.model.encode(ids))

    def _to_strings(self, result: DecodeResult, source: str) -> Translation:
        trace = ReformedSequence(
            tuple(DirectedToken(self.tgt_vocab.token(t), d) for t, d in result.trace)
        )
        return Translation(
            source=source,
            tokens=self.tgt_vocab.decode(result.tokens),
            trace=trace,
            score=result.score,
            truncated=result.truncated,
        )

    @inference_mode
    @eval_only
    def translate(
        self,
        source: Union[str, Sequence[str]],
        beam_config: Optional[BeamConfig] = None,
        greedy: bool = False,
    ) -> Translation:
        """Decode one source sentence.

        Raises:
            InputError: for unknown source tokens or an out-of-vocabulary forced start.
        """
        cfg = beam_config_for(self.strategy, beam_config or self.beam_config)
        if cfg.max_steps > self.model.config.max_steps:
            cfg = cfg.model_copy(update={"max_steps": self.model.config.max_steps})
        scorer = self._scorer(source)
        forced = None
        if cfg.forced_start:
            forced = [int(i) for i in self.tgt_vocab.encode(cfg.forced_start)]
        search = greedy_decode if greedy else decode
        result = search(
            scorer,
            cfg,
            self.tgt_vocab.specials,
            stopword_ids=self.stopword_ids,
            forced_ids=forced,
        )
        text = source if isinstance(source, str) else " ".join(source)
        return self._to_strings(result, text)

    def _translate_record(
        self, source: str, cfg: Optional[BeamConfig], greedy: bool = False
    ) -> Translation:
        try:
            return self.translate(source, cfg, greedy)
        except SpiralError as e:
            logger.warning("Could not decode %r: %s", source, e)
            return Translation(source, [], None, float("-inf"), error=str(e))

    def translate_batch(
        self,
        sources: Sequence[str],
        beam_config: Optional[BeamConfig] = None,
        threads: int = 1,
        greedy: bool = False,
    ) -> List[Translation]:
        """Decode many sentences; results keep input order and failures become error records."""
        if threads <= 1:
            return [self._translate_record(s, beam_config, greedy) for s in sources]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: self._translate_record(s, beam_config, greedy), sources))

    def evaluate(
        self,
        pairs: Sequence[SentencePair],
        beam_config: Optional[BeamConfig] = None,
        threads: int = 1,
        greedy: bool = False,
    ) -> EvaluationReport:
        sources = [" ".join(p.source) for p in pairs]
        references = [list(p.target) for p in pairs]
        hyps = self.translate_batch(sources, beam_config, threads, greedy)
        candidates = [h.tokens for h in hyps]
        per_sentence = [
            bleu([c], [r]) if r and c else float(c == r) for c, r in zip(candidates, references)
        ]
        return EvaluationReport(
            bleu=bleu(candidates, references),
            exact_match=exact_match(candidates, references),
            sentence_bleu=per_sentence,
            hypotheses=hyps,
        )

    @inference_mode
    def start_token_probs(self, source: Union[str, Sequence[str]]) -> Dict[str, float]:
        """Start-head probability of every ordinary target token, highest first."""
        probs = np.exp(self._scorer(source).start_log_probs())
        vocab = self.tgt_vocab.to_list()
        order = np.argsort(-probs, kind="stable")
        return {vocab[i]: float(probs[i]) for i in order if i >= 3}

    @inference_mode
    def attention_rows(
        self, source: Union[str, Sequence[str]], threshold: float = 0.0
    ) -> List[Tuple[str, str, float]]:
        """``(src_token, tgt_vocab_token, alpha)`` for every pair with ``alpha >= threshold``."""
        tokens = self._tokens(source)
        alpha = self.model.attention_map(self.model.encode(self.src_vocab.encode(tokens)))
        vocab = self.tgt_vocab.to_list()
        rows = []
        for t, src_token in enumerate(tokens):
            for k in range(3, len(vocab)):
                if alpha[t, k] >= threshold:
                    rows.append((src_token, vocab[k], float(alpha[t, k])))
        return rows


def write_attention_csv(path: Union[str, Path], rows: Iterable[Tuple[str, str, float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(ATTENTION_HEADER)
        for src_token, tgt_token, alpha in rows:
            writer.writerow((src_token, tgt_token, f"{alpha:.6f}"))
    return path
