import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from spirallm.adapters import StartHead
from spirallm.algorithms.ordering import DirectedToken, Direction
from spirallm.config import ModelConfig
from spirallm.errors import CheckpointError, InputError
from spirallm.numerics import NdValue, check_gradients, check_mode, load_checkpoint, save_checkpoint
from spirallm.spiral_model import SpiralModel
from spirallm.trainers import total_loss


def small_config(**overrides):
    values = dict(
        d_model=16,
        n_heads=2,
        n_layers=1,
        d_ff=32,
        src_vocab_size=7,
        tgt_vocab_size=9,
        max_steps=8,
        dropout=0.1,
    )
    values.update(overrides)
    return ModelConfig(**values)


class TestEncoder(unittest.TestCase):
    def setUp(self):
        self.model = SpiralModel(small_config(), np.random.default_rng(0)).eval()

    def test_single_token_shape(self):
        self.assertEqual(self.model.encode([3]).shape, (1, 16))

    def test_batched_shape(self):
        h = self.model.encode(np.array([[1, 2, 3], [4, 5, 0]]), np.array([[1, 1, 1], [1, 1, 0]]))
        self.assertEqual(h.shape, (2, 3, 16))

    def test_eval_is_deterministic(self):
        assert_array_equal(self.model.encode([1, 2, 3]).data, self.model.encode([1, 2, 3]).data)

    def test_position_sensitive(self):
        a = self.model.encode([1, 2, 3]).data
        b = self.model.encode([3, 2, 1]).data
        self.assertFalse(np.allclose(a[0], b[2]))

    def test_empty_source(self):
        with self.assertRaises(InputError):
            self.model.encode([])

    def test_out_of_range_id(self):
        with self.assertRaises(InputError):
            self.model.encode([99])


class TestTupleEmbedding(unittest.TestCase):
    def setUp(self):
        self.model = SpiralModel(small_config(), np.random.default_rng(1))
        self.emb = self.model.tgt_embed

    def test_direction_difference(self):
        diff = self.emb.direction.data[1] - self.emb.direction.data[0]
        for token in range(9):
            for step in range(8):
                right = self.emb.embed_tuple(token, Direction.RIGHT, step).data
                left = self.emb.embed_tuple(token, Direction.LEFT, step).data
                assert_allclose(right - left, diff, atol=1e-6)

    def test_token_difference(self):
        a = self.emb.embed_tuple(3, Direction.LEFT, 2).data
        b = self.emb.embed_tuple(5, Direction.LEFT, 2).data
        assert_allclose(a - b, self.emb.token.data[3] - self.emb.token.data[5], atol=1e-6)

    def test_zero_tables(self):
        for p in self.emb.parameters().values():
            p.data[...] = 0.0
        assert_array_equal(self.emb.embed_tuple(4, Direction.RIGHT, 0).data, np.zeros(16))

    def test_bounds(self):
        with self.assertRaises(InputError):
            self.emb.embed_tuple(9, Direction.RIGHT, 0)
        with self.assertRaises(InputError):
            self.emb.embed_tuple(3, Direction.RIGHT, 8)


class TestDecoder(unittest.TestCase):
    def setUp(self):
        self.model = SpiralModel(small_config(), np.random.default_rng(2)).eval()
        self.h = self.model.encode([1, 2, 3, 4])

    def test_single_tuple_shape(self):
        logits = self.model.decode_prefix([DirectedToken(4, Direction.RIGHT)], self.h)
        self.assertEqual(logits.shape, (1, 9))

    def test_causality(self):
        tokens = np.array([3, 4, 5, 6, 7])
        dirs = np.array([1, 1, 0, 1, 0])
        base = self.model.decode_forward(tokens, dirs, self.h).data
        for t in range(4):
            changed_tokens, changed_dirs = tokens.copy(), dirs.copy()
            changed_tokens[t + 1 :] = 8
            changed_dirs[t + 1 :] = 1 - changed_dirs[t + 1 :]
            other = self.model.decode_forward(changed_tokens, changed_dirs, self.h).data
            assert_array_equal(base[: t + 1], other[: t + 1])

    def test_padding_matches_unpadded(self):
        single = self.model.decode_forward([3, 4], [1, 0], self.h).data
        h = self.model.encode(np.array([[1, 2, 3, 4]]))
        padded = self.model.decode_forward(
            np.array([[3, 4, 0]]), np.array([[1, 0, 0]]), h, tgt_mask=np.array([[1, 1, 0]])
        ).data
        assert_allclose(single, padded[0, :2], atol=1e-5)

    def test_direction_flip_changes_last_logits(self):
        changed = 0
        for seed in range(100):
            model = SpiralModel(small_config(d_model=8, d_ff=16), np.random.default_rng(seed)).eval()
            h = model.encode([1, 2])
            right = model.decode_forward([3, 4], [1, 1], h).data[-1]
            left = model.decode_forward([3, 4], [1, 0], h).data[-1]
            changed += not np.array_equal(right, left)
        self.assertGreaterEqual(changed, 99)

    def test_prefix_too_long(self):
        with self.assertRaises(InputError):
            self.model.decode_forward(np.full(9, 3), np.ones(9, dtype=np.int64), self.h)

    def test_untied_output(self):
        model = SpiralModel(small_config(tie_embeddings=False), np.random.default_rng(0)).eval()
        self.assertIn("output.weight", model.parameters())
        self.assertEqual(model.decode_forward([3], [1], model.encode([1])).shape, (1, 9))


class TestStartHead(unittest.TestCase):
    def test_constant_potentials(self):
        v = NdValue(np.full((4, 3), 0.7))
        out = StartHead.pool(v)
        assert_allclose(out.alpha.data, np.full((4, 3), 0.25), rtol=1e-6)
        assert_allclose(out.logits.data, np.full(3, 0.7), rtol=1e-6)
        assert_allclose(out.probs.data, 1.0 / (1.0 + np.exp(-0.7)) * np.ones(3), rtol=1e-6)

    def test_single_position(self):
        v = NdValue(np.array([[0.3, -1.2]]))
        out = StartHead.pool(v)
        assert_allclose(out.alpha.data, [[1.0, 1.0]])
        assert_allclose(out.logits.data, [0.3, -1.2], rtol=1e-6)

    def test_hand_evaluated_pooling(self):
        v = NdValue(np.array([[0.0], [np.log(3.0)]]))
        out = StartHead.pool(v)
        assert_allclose(out.alpha.data[:, 0], [0.25, 0.75], rtol=1e-6)
        self.assertAlmostEqual(float(out.logits.data[0]), 0.75 * np.log(3.0), places=6)
        self.assertAlmostEqual(float(out.logits.data[0]), 0.8240, places=4)

    def test_padding_is_ignored(self):
        v = NdValue(np.array([[[1.0], [5.0], [9.0]]]))
        out = StartHead.pool(v, np.array([[True, True, False]]))
        self.assertAlmostEqual(float(out.alpha.data[0, 2, 0]), 0.0)

    def test_zero_weights(self):
        model = SpiralModel(small_config(), np.random.default_rng(0)).eval()
        for name, p in model.start_head.parameters().items():
            p.data[...] = 0.0
        v = model.start_potentials(model.encode([1, 2, 3]))
        self.assertEqual(v.shape, (3, 9))
        assert_array_equal(v.data, np.zeros((3, 9)))

    def test_model_attention_normalised(self):
        model = SpiralModel(small_config(), np.random.default_rng(3)).eval()
        h = model.encode([1, 2, 3, 4, 5])
        out = model.start_probs(model.start_potentials(h))
        assert_allclose(out.alpha.data.sum(axis=0), np.ones(9), atol=1e-6)
        self.assertTrue(np.all((out.probs.data > 0) & (out.probs.data < 1)))
        self.assertEqual(model.attention_map(h).shape, (5, 9))


class TestGradients(unittest.TestCase):
    def test_end_to_end_finite_differences(self):
        rng = np.random.default_rng(0)
        with check_mode():
            model = SpiralModel(small_config(d_model=8, d_ff=16), np.random.default_rng(4)).eval()
            src = np.array([[1, 2, 3], [4, 5, 0]])
            src_mask = src > 0
            tokens = np.array([[3, 4, 1], [5, 2, 0]])
            dirs = np.array([[1, 0, 1], [0, 1, 0]])
            tgt_mask = np.array([[1, 1, 1], [1, 1, 0]], dtype=bool)
            targets = np.array([[4, 1, 2], [2, 1, 0]])
            labels = np.zeros((2, 9))
            labels[0, [3, 4]] = 1.0
            labels[1, 5] = 1.0

            def loss_fn():
                h = model.encode(src, src_mask)
                logits = model.decode_forward(tokens, dirs, h, src_mask, tgt_mask)
                start = model.start_head(h, src_mask)
                return total_loss(logits, targets, start.logits, labels, tgt_mask).total

            params = model.parameters()
            self.assertTrue(all(p.dtype == np.float64 for p in params.values()))
            samples = check_gradients(loss_fn, params, rng, n_samples=200)

        for sample in samples:
            self.assertLessEqual(
                abs(sample.analytic - sample.numeric), 1e-8 + 1e-3 * abs(sample.numeric), sample
            )
        touched = {p.name.split(".")[0] for p in samples if abs(p.analytic) > 0}
        self.assertIn("start_head", touched)
        self.assertIn("decoder", touched)


class TestSaveLoad(unittest.TestCase):
    def test_round_trip(self):
        model = SpiralModel(small_config(), np.random.default_rng(5)).eval()
        h = model.encode([1, 2, 3])
        before = model.decode_forward([3, 4], [1, 0], h).data
        with tempfile.TemporaryDirectory() as tmp:
            path = model.save(os.path.join(tmp, "m.slmc"), {"note": "test"})
            loaded, config = SpiralModel.load(path)
        self.assertEqual(config["note"], "test")
        self.assertFalse(loaded.training)
        after = loaded.decode_forward([3, 4], [1, 0], loaded.encode([1, 2, 3])).data
        assert_array_equal(before, after)

    def test_shape_mismatch_is_checkpoint_error(self):
        model = SpiralModel(small_config(), np.random.default_rng(5))
        with tempfile.TemporaryDirectory() as tmp:
            path = model.save(os.path.join(tmp, "m.slmc"))
            other = small_config(tgt_vocab_size=10).model_dump()
            config, tensors = load_checkpoint(path)
            save_checkpoint(path, {**config, "model": other}, tensors)
            with self.assertRaises(CheckpointError):
                SpiralModel.load(path)


if __name__ == "__main__":
    unittest.main()
