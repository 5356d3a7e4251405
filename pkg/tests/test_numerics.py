import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose

from spirallm.errors import CheckpointError, DimensionError, NumericError, UsageError
from spirallm.numerics import (
    MASK_VALUE,
    AdamState,
    NdValue,
    adam_step,
    add,
    bce_with_logits,
    check_gradients,
    check_mode,
    concat,
    cross_entropy,
    default_dtype,
    dropout,
    embedding,
    gelu,
    grad_enabled,
    load_checkpoint,
    log_softmax,
    matmul,
    max_relative_error,
    mean,
    mul,
    no_grad,
    parameter,
    reshape,
    rms_norm,
    save_checkpoint,
    sigmoid,
    slice_,
    softmax,
    sum_,
    transpose,
)
from spirallm.numerics.checkpoint import FORMAT_VERSION, MAGIC, dumps, loads
from spirallm.numerics.gradcheck import GradSample


class TestForward(unittest.TestCase):
    def test_default_precision(self):
        self.assertEqual(default_dtype(), np.float32)
        with check_mode():
            self.assertEqual(default_dtype(), np.float64)
            p = parameter(np.random.default_rng(0), (2, 2))
            self.assertEqual(p.dtype, np.float64)
        self.assertEqual(default_dtype(), np.float32)

    def test_softmax_rows_sum_to_one(self):
        x = NdValue(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, MASK_VALUE]]))
        y = softmax(x).data
        assert_allclose(y.sum(axis=-1), [1.0, 1.0], rtol=1e-6)
        self.assertAlmostEqual(float(y[1, 2]), 0.0)
        assert_allclose(np.exp(log_softmax(x).data), y, rtol=1e-5)

    def test_sigmoid_is_stable(self):
        y = sigmoid(NdValue(np.array([-1000.0, 0.0, 1000.0]))).data
        assert_allclose(y, [0.0, 0.5, 1.0])

    def test_cross_entropy_uniform(self):
        logits = NdValue(np.zeros((2, 3, 8)))
        targets = np.zeros((2, 3), dtype=np.int64)
        self.assertAlmostEqual(cross_entropy(logits, targets).item(), np.log(8), places=5)

    def test_cross_entropy_mask(self):
        logits = NdValue(np.array([[[5.0, 0.0], [0.0, 0.0]]]))
        targets = np.array([[1, 0]])
        masked = cross_entropy(logits, targets, np.array([[0, 1]]))
        self.assertAlmostEqual(masked.item(), np.log(2), places=5)

    def test_bce_at_zero_logits(self):
        loss = bce_with_logits(NdValue(np.zeros((3, 4))), np.eye(3, 4))
        self.assertAlmostEqual(loss.item(), np.log(2), places=5)

    def test_rms_norm_unit_scale(self):
        x = NdValue(np.array([[3.0, 4.0]]))
        y = rms_norm(x, eps=0.0).data
        assert_allclose(np.sqrt((y**2).mean()), 1.0, rtol=1e-6)

    def test_dropout_identity_in_eval(self):
        x = NdValue(np.ones((4, 4)))
        self.assertIs(dropout(x, 0.5, False, None), x)
        with self.assertRaises(UsageError):
            dropout(x, 0.5, True, None)
        y = dropout(x, 0.5, True, np.random.default_rng(0)).data
        self.assertTrue(set(np.unique(y)) <= {0.0, 2.0})

    def test_non_finite_raises(self):
        with self.assertRaises(NumericError):
            mul(NdValue(np.array([np.inf])), NdValue(np.array([0.0])))

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            cross_entropy(NdValue(np.zeros((2, 3))), np.zeros(3, dtype=np.int64))
        with self.assertRaises(DimensionError):
            bce_with_logits(NdValue(np.zeros((2, 3))), np.zeros((3, 2)))


class TestBackward(unittest.TestCase):
    def test_simple_chain(self):
        x = NdValue(np.array([2.0, -1.0]), requires_grad=True)
        loss = sum_(mul(x, x) * 3.0)
        loss.backward()
        assert_allclose(x.grad, [12.0, -6.0])

    def test_shared_node_accumulates(self):
        x = NdValue(np.array(3.0), requires_grad=True)
        y = add(x, x)
        loss = mul(y, x)
        loss.backward()
        self.assertAlmostEqual(float(x.grad), 12.0)

    def test_broadcast_reduces_grad(self):
        x = NdValue(np.ones((3, 2)), requires_grad=True)
        b = NdValue(np.zeros(2), requires_grad=True)
        sum_(add(x, b)).backward()
        assert_allclose(b.grad, [3.0, 3.0])

    def test_backward_requires_scalar(self):
        x = NdValue(np.ones(2), requires_grad=True)
        with self.assertRaises(UsageError):
            mul(x, x).backward()
        with self.assertRaises(UsageError):
            sum_(NdValue(np.ones(2))).backward()

    def test_no_grad_records_nothing(self):
        x = NdValue(np.ones(2), requires_grad=True)
        with no_grad():
            self.assertFalse(grad_enabled())
            y = sum_(mul(x, x))
        self.assertTrue(grad_enabled())
        self.assertFalse(y.requires_grad)

    def test_interior_grads_are_released(self):
        x = NdValue(np.ones(2), requires_grad=True)
        y = mul(x, x)
        sum_(y).backward()
        self.assertIsNone(y.grad)
        self.assertIsNotNone(x.grad)

    def test_ops_against_finite_differences(self):
        rng = np.random.default_rng(0)
        with check_mode():
            a = parameter(rng, (3, 4), std=1.0)
            b = parameter(rng, (4, 5), std=1.0)
            w = parameter(rng, (5,), std=1.0)
            table = parameter(rng, (6, 5), std=1.0)
            ids = np.array([[1, 4], [0, 5], [2, 2]])
            targets = np.array([1, 0, 2])
            labels = rng.integers(0, 2, size=(3, 5)).astype(np.float64)

            def loss_fn():
                h = matmul(a, b)
                h = rms_norm(h, w)
                h = gelu(h)
                e = mean(embedding(table, ids), axis=1)
                h = add(h, e)
                mixed = concat([slice_(h, (slice(None), slice(0, 2))), h], axis=-1)
                mixed = transpose(reshape(mixed, (3, 7, 1)), (0, 2, 1))
                logits = reshape(mixed, (3, 7))
                attn = softmax(logits)
                scores = add(matmul(h, transpose(h, (1, 0))), slice_(attn, (slice(None), slice(0, 3))))
                ce = cross_entropy(scores, targets)
                return add(ce, bce_with_logits(mul(h, sigmoid(h)), labels))

            samples = check_gradients(loss_fn, {"a": a, "b": b, "w": w, "table": table}, rng, 60)
        for sample in samples:
            self.assertLess(abs(sample.analytic - sample.numeric), 1e-7 + 1e-5 * abs(sample.numeric), sample)
        self.assertGreater(max(abs(p.analytic) for p in samples), 1e-3)

    def test_relative_error(self):
        samples = [GradSample("a", (0,), 1.0, 1.1), GradSample("b", (1,), 0.0, 0.0)]
        self.assertAlmostEqual(max_relative_error(samples), 0.1 / 1.1)
        self.assertEqual(max_relative_error([]), 0.0)


class TestAdam(unittest.TestCase):
    def test_converges_on_quadratic(self):
        x = NdValue(np.array([1.0, -1.5]), requires_grad=True)
        state = AdamState(lr=0.1, warmup_steps=1, beta2=0.999, schedule="constant")
        for _ in range(200):
            sum_(mul(x, x)).backward()
            adam_step({"x": x}, state)
        self.assertLess(float((x.data**2).sum()), 1e-6)

    def test_inverse_sqrt_schedule(self):
        state = AdamState(lr=1.0, warmup_steps=100)
        self.assertAlmostEqual(state.effective_lr(50), 0.5)
        self.assertAlmostEqual(state.effective_lr(100), 1.0)
        self.assertAlmostEqual(state.effective_lr(400), 0.5)
        self.assertEqual(state.effective_lr(0), 0.0)

    def test_constant_schedule_holds(self):
        state = AdamState(lr=2.0, warmup_steps=10, schedule="constant")
        self.assertAlmostEqual(state.effective_lr(5), 1.0)
        self.assertAlmostEqual(state.effective_lr(1000), 2.0)

    def test_step_without_grads(self):
        x = NdValue(np.ones(2), requires_grad=True)
        with self.assertRaises(UsageError):
            adam_step({"x": x}, AdamState())

    def test_clipping_bounds_first_update(self):
        x = NdValue(np.zeros(2), requires_grad=True)
        x.grad = np.array([300.0, 400.0])
        state = AdamState(lr=1.0, warmup_steps=1, max_grad_norm=1.0)
        norm = adam_step({"x": x}, state)
        self.assertAlmostEqual(norm, 500.0)
        self.assertIsNone(x.grad)
        # the first Adam step moves each coordinate by about lr
        assert_allclose(np.abs(x.data), [1.0, 1.0], rtol=1e-4)

    def test_non_finite_gradient_leaves_params_untouched(self):
        x = NdValue(np.ones(3), requires_grad=True)
        y = NdValue(np.ones(2), requires_grad=True)
        x.grad = np.array([np.inf, 1.0, 1.0])
        y.grad = np.array([1.0, 1.0])
        state = AdamState(lr=1.0, warmup_steps=1)
        with self.assertRaises(NumericError) as ctx:
            adam_step({"x": x, "y": y}, state)
        self.assertIn("['x']", str(ctx.exception))
        assert_allclose(x.data, np.ones(3))
        assert_allclose(y.data, np.ones(2))
        self.assertEqual(state.step, 0)
        self.assertEqual(state.m, {})


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.tensors = {"a.w": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.ones(2, np.float32)}
        self.config = {"model": {"d_model": 8}, "note": "x"}

    def test_round_trip_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(os.path.join(tmp, "m.slmc"), self.config, self.tensors)
            config, tensors = load_checkpoint(path)
        self.assertEqual(config, self.config)
        self.assertEqual(set(tensors), set(self.tensors))
        assert_allclose(tensors["a.w"], self.tensors["a.w"])

    def test_header(self):
        blob = dumps(self.config, self.tensors)
        self.assertEqual(blob[:4], MAGIC)
        self.assertEqual(int.from_bytes(blob[4:8], "little"), FORMAT_VERSION)

    def test_deterministic_bytes(self):
        self.assertEqual(dumps(self.config, self.tensors), dumps(dict(self.config), dict(self.tensors)))

    def test_bad_version(self):
        blob = bytearray(dumps(self.config, self.tensors))
        blob[4:8] = (FORMAT_VERSION + 1).to_bytes(4, "little")
        with self.assertRaises(CheckpointError):
            loads(bytes(blob))

    def test_bad_magic_and_truncation(self):
        blob = dumps(self.config, self.tensors)
        with self.assertRaises(CheckpointError):
            loads(b"XXXX" + blob[4:])
        with self.assertRaises(CheckpointError):
            loads(blob[:10])

    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint("/nonexistent/model.slmc")


if __name__ == "__main__":
    unittest.main()
