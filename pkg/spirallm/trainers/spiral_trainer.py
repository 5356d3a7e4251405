import csv
import logging
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional

import numpy as np
from tqdm import tqdm

from ..algorithms.beam_search import SpecialIds
from ..config import RunConfig
from ..corpus import ParallelCorpus, Vocab, bundled_stopwords, subset
from ..errors import DataError, NumericError
from ..inference import SpiralInference
from ..numerics import AdamState, adam_step, no_grad
from ..spiral_model import SpiralModel
from .instances import Batch, EncodedPair, encode_pairs, make_batches, make_training_instance
from .losses import total_loss
from .sampling import (
    first_stage2_step,
    fixed_ordering,
    sample_ordering_stage1,
    sample_orderings_stage2,
    stage_of,
    top_start_tokens,
)

logger = logging.getLogger(__name__)

METRICS_HEADER = ("step", "phase", "train_loss", "dev_bleu")


class StepLoss(NamedTuple):
    total: float
    translation: float
    start: float


class SpiralTrainer:
    """
    Train a SpiralModel on a parallel corpus with l2r, r2l, uniformly sampled
    or two-stage sampled generation orderings.
    """

    def __init__(
        self,
        config: RunConfig,
        corpus: ParallelCorpus,
        stopwords: Optional[Iterable[str]] = None,
    ):
        self.config = config
        self.train_config = config.to_train_config()
        self.beam_config = config.to_beam_config().model_copy(
            update={"forced_start": None, "l2r_forced": False, "r2l_forced": False}
        )
        self.configure_logging()

        if not corpus.train:
            raise DataError("training corpus is empty")
        seeds = np.random.SeedSequence(config.seed).spawn(4)
        self.init_rng, self.data_rng, self.order_rng, self.dropout_rng = (
            np.random.default_rng(s) for s in seeds
        )

        if stopwords is None:
            stopwords = bundled_stopwords()
        self.stopwords = sorted({w.lower() for w in stopwords} | {w.lower() for w in corpus.stopwords})

        pairs = corpus.all_pairs()
        self.src_vocab = Vocab.build(p.source for p in pairs)
        self.tgt_vocab = Vocab.build(p.target for p in pairs)
        self.specials: SpecialIds = self.tgt_vocab.specials
        self.stopword_ids = [
            i for i, t in enumerate(self.tgt_vocab.to_list()) if t.lower() in set(self.stopwords)
        ]

        train_pairs = subset(corpus.train, self.train_config.data_fraction, config.seed)
        self.train_pairs: List[EncodedPair] = encode_pairs(
            train_pairs, self.src_vocab, self.tgt_vocab, self.stopwords
        )
        self.dev_pairs = corpus.dev[: self.train_config.eval_sentences]
        self._check_lengths(config.max_steps)
        logger.info(
            "Training on %d of %d pairs (data fraction %.2f)",
            len(self.train_pairs),
            len(corpus.train),
            self.train_config.data_fraction,
        )

        self.model = SpiralModel(
            config.to_model_config(len(self.src_vocab), len(self.tgt_vocab)), self.init_rng
        )
        self.model.set_rng(self.dropout_rng)
        self.optimizer = AdamState(
            lr=self.train_config.lr,
            warmup_steps=self.train_config.warmup_steps,
            beta1=self.train_config.beta1,
            beta2=self.train_config.beta2,
            schedule=self.train_config.lr_schedule,
            max_grad_norm=self.train_config.max_grad_norm,
        )
        self.stage2_start = first_stage2_step(self.train_config.steps, self.train_config.stage_boundary)
        self._check_stage2_window()

        self._batches: List[Batch] = []
        self._batch_phase: Optional[str] = None
        self._batch_counter = 0

    def configure_logging(self) -> None:
        logging.basicConfig(
            format="%(asctime)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
            level=logging.INFO,
        )

    def _check_lengths(self, max_steps: int) -> None:
        """Targets need ``T + 2`` decode steps and sources one position per token."""
        named = [("train", i, p.source, p.target) for i, p in enumerate(self.train_pairs)]
        named += [("dev", i, p.source, p.target) for i, p in enumerate(self.dev_pairs)]
        for split, i, source, target in named:
            if len(target) + 2 > max_steps:
                raise DataError(
                    f"{split} pair {i}: target of {len(target)} tokens needs {len(target) + 2} "
                    f"decode steps, max_steps is {max_steps}"
                )
            if len(source) > max_steps:
                raise DataError(
                    f"{split} pair {i}: source of {len(source)} tokens exceeds max_steps={max_steps}"
                )

    def _check_stage2_window(self) -> None:
        if self.train_config.strategy != "slm-twostage":
            return
        window = (self.train_config.steps - self.stage2_start + 1) * self.train_config.batch_size
        if window < len(self.train_pairs):
            logger.warning(
                "Stage 2 covers %d instances, fewer than one pass over %d training pairs",
                window,
                len(self.train_pairs),
            )

    def phase(self, step: int) -> str:
        """Phase label of the 1-based ``step``."""
        strategy = self.train_config.strategy
        if strategy in ("l2r", "r2l"):
            return strategy
        if strategy == "slm-twostage" and stage_of(
            step, self.train_config.steps, self.train_config.stage_boundary
        ) == 2:
            return "stage2"
        return "stage1"

    def predict_start_probs(self, pairs: List[EncodedPair]) -> np.ndarray:
        """``(N, V)`` start-head probabilities with dropout off."""
        was_training = self.model.training
        self.model.eval()
        out = []
        bs = self.train_config.batch_size
        with no_grad():
            for i in range(0, len(pairs), bs):
                chunk = pairs[i : i + bs]
                width = max(len(p.source) for p in chunk)
                src = np.zeros((len(chunk), width), dtype=np.int64)
                mask = np.zeros_like(src, dtype=bool)
                for row, p in enumerate(chunk):
                    src[row, : len(p.source)] = p.source
                    mask[row, : len(p.source)] = True
                h = self.model.encode(src, mask)
                out.append(self.model.start_head(h, mask).probs.data)
        self.model.train(was_training)
        return np.concatenate(out, axis=0)

    def build_instances(self, phase: str):
        if phase in ("l2r", "r2l"):
            return [
                make_training_instance(p, fixed_ordering(phase, len(p.target)), self.specials)
                for p in self.train_pairs
            ]
        if phase == "stage1":
            return [
                make_training_instance(p, sample_ordering_stage1(p, self.order_rng), self.specials)
                for p in self.train_pairs
            ]
        probs = self.predict_start_probs(self.train_pairs)
        instances, fallbacks = [], 0
        for p, row in zip(self.train_pairs, probs):
            orderings = sample_orderings_stage2(
                row, p, self.train_config.top_k, self.order_rng, self.stopword_ids, self.specials
            )
            ranked = top_start_tokens(row, self.train_config.top_k, self.stopword_ids, self.specials)
            if not np.isin(ranked, p.target).any():
                fallbacks += 1
            instances.extend(make_training_instance(p, z, self.specials) for z in orderings)
        logger.info("Stage 2 epoch: %d instances from %d pairs", len(instances), len(self.train_pairs))
        if fallbacks:
            logger.warning(
                "%d of %d pairs had no top-%d start token in the target; used uniform orderings",
                fallbacks,
                len(self.train_pairs),
                self.train_config.top_k,
            )
        return instances

    def next_batch(self, step: int) -> Batch:
        phase = self.phase(step)
        if not self._batches or phase != self._batch_phase:
            if phase != self._batch_phase and self._batch_phase is not None:
                logger.info("Step %d: switching to %s sampling", step, phase)
            self._batches = make_batches(
                self.build_instances(phase), self.train_config.batch_size, self.data_rng
            )
            self._batch_phase = phase
        self._batch_counter += 1
        return self._batches.pop(0)

    def train_step(self, batch: Batch) -> StepLoss:
        self.model.train()
        h = self.model.encode(batch.src, batch.src_mask)
        logits = self.model.decode_forward(
            batch.tokens, batch.directions, h, batch.src_mask, batch.tgt_mask
        )
        start = self.model.start_head(h, batch.src_mask)
        parts = total_loss(logits, batch.targets, start.logits, batch.start_labels, batch.tgt_mask)
        parts.total.backward()
        adam_step(self.model.parameters(), self.optimizer)
        return StepLoss(parts.total.item(), parts.translation.item(), parts.start.item())

    def evaluate_dev(self) -> Optional[float]:
        if not self.dev_pairs:
            return None
        self.model.eval()
        try:
            report = self.inference().evaluate(self.dev_pairs, self.beam_config)
        finally:
            self.model.train()
        return report.bleu

    def inference(self) -> SpiralInference:
        return SpiralInference(
            self.model,
            self.src_vocab,
            self.tgt_vocab,
            self.stopwords,
            self.beam_config,
            self.train_config.strategy,
        )

    def checkpoint_metadata(self, completed_steps: int) -> dict:
        return {
            "src_vocab": self.src_vocab.to_list(),
            "tgt_vocab": self.tgt_vocab.to_list(),
            "stopwords": self.stopwords,
            "train": {
                "completed_steps": completed_steps,
                "strategy": self.train_config.strategy,
                "seed": self.config.seed,
                "data_fraction": self.train_config.data_fraction,
                "train_pairs": len(self.train_pairs),
            },
        }

    def save_model(self, path, completed_steps: int) -> Path:
        path = self.model.save(path, self.checkpoint_metadata(completed_steps))
        logger.info("Saved checkpoint %s", path)
        return path

    def train(
        self,
        checkpoint_path: Optional[str] = None,
        metrics_path: Optional[str] = None,
        progress: bool = True,
    ) -> List[dict]:
        """Run every configured step; returns the metrics rows that were written."""
        checkpoint_path = Path(checkpoint_path or self.config.checkpoint)
        metrics_path = Path(metrics_path or self.config.metrics_out)
        metrics_path.parent.mkdir(parents=True, exist_ok=True)
        steps = self.train_config.steps
        rows, window = [], []

        with metrics_path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(METRICS_HEADER)
            for step in tqdm(range(1, steps + 1), desc="Training", disable=not progress):
                batch = self.next_batch(step)
                try:
                    loss = self.train_step(batch)
                except NumericError as e:
                    raise NumericError(
                        f"step {step}, batch {self._batch_counter} "
                        f"(pairs {batch.pair_indices.tolist()}): {e}"
                    ) from e
                if not np.isfinite(loss.total):
                    raise NumericError(
                        f"non-finite loss at step {step}, batch {self._batch_counter}"
                    )
                window.append(loss.total)

                done = step
                if done % self.train_config.eval_interval == 0 or done == steps:
                    dev_bleu = self.evaluate_dev()
                    row = {
                        "step": done,
                        "phase": self.phase(step),
                        "train_loss": float(np.mean(window)),
                        "dev_bleu": dev_bleu,
                    }
                    writer.writerow(
                        (
                            row["step"],
                            row["phase"],
                            f"{row['train_loss']:.6f}",
                            "" if dev_bleu is None else f"{dev_bleu:.4f}",
                        )
                    )
                    f.flush()
                    rows.append(row)
                    window = []
                    logger.info(
                        "Step %d [%s] loss %.4f dev BLEU %s",
                        done,
                        row["phase"],
                        row["train_loss"],
                        "-" if dev_bleu is None else f"{100 * dev_bleu:.2f}",
                    )
                if self.train_config.save_interval and done % self.train_config.save_interval == 0 and done != steps:
                    self.save_model(
                        checkpoint_path.with_name(f"{checkpoint_path.stem}.step{done}{checkpoint_path.suffix}"),
                        done,
                    )

        self.save_model(checkpoint_path, steps)
        return rows
