import csv
import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose

from spirallm.algorithms.beam_search import decode
from spirallm.algorithms.ordering import EOL, EOR, DirectedToken, Direction, restore
from spirallm.config import BeamConfig, ModelConfig, TaskSpec
from spirallm.corpus import Vocab, generate
from spirallm.errors import UsageError
from spirallm.inference import (
    ATTENTION_HEADER,
    ModelScorer,
    SpiralInference,
    beam_config_for,
    write_attention_csv,
)
from spirallm.spiral_model import SpiralModel


def tiny_inference(strategy=None, stopwords=(), seed=0):
    corpus = generate(TaskSpec(kind="copy", vocab_size=6, max_len=3, n_train=20, n_dev=4, n_test=4))
    pairs = corpus.all_pairs()
    src_vocab = Vocab.build(p.source for p in pairs)
    tgt_vocab = Vocab.build(p.target for p in pairs)
    config = ModelConfig(
        d_model=8,
        n_heads=2,
        n_layers=1,
        d_ff=16,
        src_vocab_size=len(src_vocab),
        tgt_vocab_size=len(tgt_vocab),
        max_steps=8,
    )
    model = SpiralModel(config, np.random.default_rng(seed))
    return SpiralInference(
        model, src_vocab, tgt_vocab, stopwords, BeamConfig(beam=3, max_steps=8), strategy
    )


class TestBeamConfigFor(unittest.TestCase):
    def test_fixed_strategies_pin_the_start(self):
        cfg = BeamConfig()
        self.assertTrue(beam_config_for("l2r", cfg).l2r_forced)
        self.assertTrue(beam_config_for("r2l", cfg).r2l_forced)
        self.assertEqual(beam_config_for("slm-twostage", cfg), cfg)
        self.assertEqual(beam_config_for(None, cfg), cfg)

    def test_explicit_start_wins(self):
        cfg = BeamConfig(forced_start=["w1"])
        self.assertEqual(beam_config_for("l2r", cfg), cfg)
        cfg = BeamConfig(r2l_forced=True)
        self.assertEqual(beam_config_for("l2r", cfg), cfg)


class TestModelScorer(unittest.TestCase):
    def test_rows_are_distributions(self):
        inference = tiny_inference()
        h = inference.model.encode([3, 4, 5])
        scorer = ModelScorer(inference.model, h)
        contexts = [
            [DirectedToken(4, Direction.RIGHT)],
            [DirectedToken(4, Direction.LEFT), DirectedToken(5, Direction.RIGHT)],
        ]
        logp = scorer.next_log_probs(contexts)
        self.assertEqual(logp.shape, (2, scorer.vocab_size))
        assert_allclose(np.exp(logp).sum(axis=1), [1.0, 1.0], rtol=1e-6)
        self.assertTrue(np.all(scorer.start_log_probs() < 0))

    def test_batched_rows_match_single_rows(self):
        inference = tiny_inference()
        scorer = ModelScorer(inference.model, inference.model.encode([3, 4]))
        short = [DirectedToken(4, Direction.RIGHT)]
        long = [DirectedToken(4, Direction.LEFT), DirectedToken(6, Direction.RIGHT)]
        together = scorer.next_log_probs([short, long])
        assert_allclose(together[0], scorer.next_log_probs([short])[0], atol=1e-5)
        assert_allclose(together[1], scorer.next_log_probs([long])[0], atol=1e-5)


class TestTranslate(unittest.TestCase):
    def setUp(self):
        self.inference = tiny_inference()

    def test_trace_replays_to_tokens(self):
        t = self.inference.translate("w1 w2 w3")
        self.assertIsNone(t.error)
        if not t.truncated:
            tokens, _ = restore(t.trace, eol=EOL, eor=EOR)
            self.assertEqual(tokens, t.tokens)
        self.assertLessEqual(len(t.trace), 8)
        self.assertTrue(set(t.tokens) <= set(self.inference.tgt_vocab.to_list()[3:]))

    def test_long_beam_budget_is_clamped(self):
        t = self.inference.translate("w1 w2", BeamConfig(beam=2, max_steps=64))
        self.assertLessEqual(len(t.trace), 8)

    def test_forced_start(self):
        t = self.inference.translate("w1 w2", BeamConfig(beam=2, max_steps=8, forced_start=["w4"]))
        self.assertEqual(t.trace[0].token, "w4")
        self.assertIn("w4", t.tokens)

    def test_greedy_matches_beam_of_one(self):
        cfg = BeamConfig(beam=1, max_steps=8)
        self.assertEqual(
            self.inference.translate("w0 w5", cfg, greedy=True).trace,
            self.inference.translate("w0 w5", cfg).trace,
        )

    def test_l2r_model_starts_from_eol(self):
        t = tiny_inference(strategy="l2r").translate("w1 w2")
        self.assertEqual(t.trace[0].token, EOL)
        self.assertTrue(all(d is Direction.RIGHT for d in t.trace.directions[:-1]))

    def test_stop_words_never_start(self):
        inference = tiny_inference(stopwords=["W0", "w1", "w2", "w3"])
        self.assertIn(inference.translate("w1 w2").trace[0].token, ("w4", "w5"))

    def test_training_mode_is_refused(self):
        self.inference.model.train()
        with self.assertRaises(UsageError):
            self.inference.translate("w1")

    def test_batch_keeps_order_and_records_errors(self):
        sources = ["w1 w2", "w9 w1", "w3", "w4 w5 w0"]
        results = self.inference.translate_batch(sources)
        self.assertEqual([r.source for r in results], sources)
        self.assertIsNotNone(results[1].error)
        self.assertEqual(results[1].tokens, [])
        self.assertTrue(all(r.error is None for i, r in enumerate(results) if i != 1))
        threaded = self.inference.translate_batch(sources, threads=3)
        self.assertEqual([r.tokens for r in threaded], [r.tokens for r in results])

    def test_unknown_forced_start_is_a_record(self):
        (t,) = self.inference.translate_batch(["w1"], BeamConfig(forced_start=["nope"]))
        self.assertIn("nope", t.error)

    def test_evaluate(self):
        pairs = generate(TaskSpec(kind="copy", vocab_size=6, max_len=3, n_train=20, n_dev=4, n_test=4)).dev
        report = self.inference.evaluate(pairs)
        self.assertEqual(len(report.hypotheses), len(pairs))
        self.assertEqual(len(report.sentence_bleu), len(pairs))
        self.assertTrue(0.0 <= report.bleu <= 1.0)

    def test_matches_direct_search(self):
        scorer = self.inference._scorer("w2 w3")
        direct = decode(scorer, self.inference.beam_config, self.inference.tgt_vocab.specials)
        self.assertEqual(self.inference.translate("w2 w3").tokens, self.inference.tgt_vocab.decode(direct.tokens))


class TestStartHeadInspection(unittest.TestCase):
    def setUp(self):
        self.inference = tiny_inference()

    def test_start_token_probs(self):
        probs = self.inference.start_token_probs("w1 w2")
        self.assertEqual(set(probs), set(self.inference.tgt_vocab.to_list()[3:]))
        values = list(probs.values())
        self.assertEqual(values, sorted(values, reverse=True))
        self.assertTrue(all(0.0 < v < 1.0 for v in values))

    def test_attention_rows(self):
        rows = self.inference.attention_rows("w1 w2")
        n_real = len(self.inference.tgt_vocab) - 3
        self.assertEqual(len(rows), 2 * n_real)
        per_token = {}
        for _, tgt, alpha in rows:
            per_token[tgt] = per_token.get(tgt, 0.0) + alpha
        assert_allclose(list(per_token.values()), np.ones(n_real), rtol=1e-5)
        self.assertLess(len(self.inference.attention_rows("w1 w2", threshold=0.9)), len(rows))

    def test_attention_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_attention_csv(os.path.join(tmp, "a", "attn.csv"), [("w1", "w2", 0.25)])
            with open(path, newline="", encoding="utf-8") as f:
                lines = list(csv.reader(f))
        self.assertEqual(tuple(lines[0]), ATTENTION_HEADER)
        self.assertEqual(lines[1], ["w1", "w2", "0.250000"])


class TestLoad(unittest.TestCase):
    def test_checkpoint_round_trip(self):
        inference = tiny_inference(strategy="r2l", stopwords=["w0"])
        metadata = {
            "src_vocab": inference.src_vocab.to_list(),
            "tgt_vocab": inference.tgt_vocab.to_list(),
            "stopwords": ["w0"],
            "train": {"strategy": "r2l"},
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = inference.model.save(os.path.join(tmp, "m.slmc"), metadata)
            loaded = SpiralInference.load(path, BeamConfig(beam=3, max_steps=8))
        self.assertEqual(loaded.strategy, "r2l")
        self.assertEqual(loaded.stopword_ids, inference.stopword_ids)
        first = inference.translate("w1 w2")
        second = loaded.translate("w1 w2")
        self.assertEqual(first.trace, second.trace)
        self.assertEqual(second.trace[0].token, EOR)

    def test_extra_stop_words_join_the_checkpoint_list(self):
        inference = tiny_inference(stopwords=["w0"])
        metadata = {
            "src_vocab": inference.src_vocab.to_list(),
            "tgt_vocab": inference.tgt_vocab.to_list(),
            "stopwords": ["w0"],
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = inference.model.save(os.path.join(tmp, "m.slmc"), metadata)
            loaded = SpiralInference.load(path, extra_stopwords=["W1", "w2"])
        self.assertEqual(loaded.stopwords, frozenset({"w0", "w1", "w2"}))
        ids = [inference.tgt_vocab.id(t) for t in ("w0", "w1", "w2")]
        self.assertEqual(loaded.stopword_ids, sorted(ids))


if __name__ == "__main__":
    unittest.main()
