import itertools
import unittest
from collections import Counter

import numpy as np

from spirallm.algorithms.ordering import (
    EOL,
    EOR,
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
from spirallm.errors import InvalidOrderingError, MalformedSequenceError, OrderingSizeError

SENTENCE = "we 'll be able to transfer our ideas directly to the digital media .".split()
TRACE = (
    "digital/+ media/- the/- to/- directly/- ideas/+ ./+ [EOR]/- our/- "
    "transfer/- to/- able/- be/- 'll/- we/- [EOL]"
)
TRACE_ORDER = (12, 13, 11, 10, 9, 8, 14, 15, 7, 6, 5, 4, 3, 2, 1, 0)

FORCED = "we 'll be able to dump our ideas directly to digital media .".split()
FORCED_TRACE = (
    "dump/- to/+ our/- able/- be/+ ideas/+ directly/+ to/- 'll/- we/+ "
    "digital/+ media/+ ./+ [EOR]/- [EOL]"
)


def brute_force_orderings(T):
    """Permutations whose every prefix covers a contiguous range."""
    found = set()
    for perm in itertools.permutations(range(T + 2)):
        if all(max(perm[: i + 1]) - min(perm[: i + 1]) == i for i in range(len(perm))):
            found.add(perm)
    return found


class TestValidity(unittest.TestCase):
    def test_small_cases(self):
        self.assertTrue(is_valid_ordering([1, 2, 0, 3], 2))
        self.assertFalse(is_valid_ordering([0, 2, 1, 3], 2))
        self.assertFalse(is_valid_ordering([0, 1, 1, 3], 2))
        self.assertFalse(is_valid_ordering([0, 1, 2], 2))
        self.assertTrue(is_valid_ordering([0, 1], 0))
        self.assertTrue(is_valid_ordering([1, 0], 0))

    def test_garbage_is_invalid_not_an_error(self):
        self.assertFalse(is_valid_ordering(["a", "b"], 0))
        self.assertFalse(is_valid_ordering([0, 1], -1))
        self.assertFalse(is_valid_ordering([], 0))

    def test_l2r_and_r2l(self):
        self.assertEqual(l2r_ordering(3).z, (0, 1, 2, 3, 4))
        self.assertEqual(r2l_ordering(3).z, (4, 3, 2, 1, 0))
        self.assertEqual(l2r_ordering(3).mirrored(), r2l_ordering(3))

    def test_construction_validates(self):
        with self.assertRaises(InvalidOrderingError):
            SpiralOrdering((0, 2, 1, 3), 2)


class TestCounting(unittest.TestCase):
    def test_count_law(self):
        for T in range(0, 9):
            self.assertEqual(count_orderings(T), 2 ** (T + 1))
            self.assertEqual(len(enumerate_orderings(T)), 2 ** (T + 1))

    def test_enumeration_matches_brute_force(self):
        for T in range(0, 6):
            expected = brute_force_orderings(T)
            got = {z.z for z in enumerate_orderings(T)}
            self.assertEqual(got, expected, f"T={T}")

    def test_single_token(self):
        got = {z.z for z in enumerate_orderings(1)}
        self.assertEqual(got, {(0, 1, 2), (1, 0, 2), (1, 2, 0), (2, 1, 0)})

    def test_enumeration_guard(self):
        with self.assertRaises(OrderingSizeError):
            enumerate_orderings(11)

    def test_count_overflow(self):
        self.assertEqual(count_orderings(62), 2**63)
        with self.assertRaises(OverflowError):
            count_orderings(63)
        with self.assertRaises(InvalidOrderingError):
            count_orderings(-1)


class TestSampling(unittest.TestCase):
    def test_removal_bits_special_cases(self):
        T = 4
        self.assertEqual(ordering_from_removal_bits([Direction.RIGHT] * (T + 1), T), l2r_ordering(T))
        self.assertEqual(ordering_from_removal_bits([Direction.LEFT] * (T + 1), T), r2l_ordering(T))

    def test_removal_bits_is_a_bijection(self):
        T = 4
        images = {
            ordering_from_removal_bits(bits, T)
            for bits in itertools.product([Direction.LEFT, Direction.RIGHT], repeat=T + 1)
        }
        self.assertEqual(images, enumerate_orderings(T))

    def test_uniform_chi_square(self):
        T, draws = 5, 64000
        rng = np.random.default_rng(1234)
        counts = Counter(sample_uniform_ordering(T, rng).z for _ in range(draws))
        self.assertEqual(len(counts), 64)
        expected = draws / 64
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        # critical value for 63 degrees of freedom at significance 0.001
        self.assertLess(chi2, 103.442)

    def test_constrained_support(self):
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(2000):
            z = sample_constrained_ordering(4, (3, 3), rng)
            self.assertEqual(z.start, 3)
            self.assertTrue(is_valid_ordering(z.z, 4))
            seen.add(z.z)
        self.assertEqual(len(seen), 10)

    def test_constrained_completions_are_uniform(self):
        rng = np.random.default_rng(11)
        counts = Counter(sample_constrained_ordering(4, (3, 3), rng).z for _ in range(10000))
        self.assertEqual(len(counts), 10)
        chi2 = sum((c - 1000) ** 2 / 1000 for c in counts.values())
        # 9 degrees of freedom at significance 0.001
        self.assertLess(chi2, 27.877)

    def test_constrained_span_prefix(self):
        rng = np.random.default_rng(5)
        z = sample_constrained_ordering(6, (2, 4), rng)
        self.assertEqual(z.z[:3], (2, 3, 4))

    def test_constrained_full_span_is_l2r(self):
        rng = np.random.default_rng(0)
        self.assertEqual(sample_constrained_ordering(3, (0, 4), rng), l2r_ordering(3))

    def test_constrained_rejects_bad_span(self):
        rng = np.random.default_rng(0)
        with self.assertRaises(InvalidOrderingError):
            sample_constrained_ordering(3, (3, 2), rng)
        with self.assertRaises(InvalidOrderingError):
            sample_constrained_ordering(3, (0, 5), rng)


class TestReform(unittest.TestCase):
    def test_reform_example(self):
        reformed = reform(["a", "b"], SpiralOrdering((1, 2, 0, 3), 2))
        self.assertEqual(
            list(reformed),
            [
                DirectedToken("a", Direction.RIGHT),
                DirectedToken("b", Direction.LEFT),
                DirectedToken(EOL, Direction.RIGHT),
                DirectedToken(EOR, Direction.RIGHT),
            ],
        )

    def test_l2r_trace(self):
        trace = format_trace(reform(["x", "y"], l2r_ordering(2)))
        self.assertEqual(trace, "[EOL]/+ x/+ y/+ [EOR]")

    def test_printed_trace_is_reproduced(self):
        reformed = reform(SENTENCE, SpiralOrdering(TRACE_ORDER, len(SENTENCE)))
        self.assertEqual(format_trace(reformed), TRACE)

    def test_printed_trace_restores(self):
        tokens, z = restore(parse_trace(TRACE))
        self.assertEqual(" ".join(tokens), " ".join(SENTENCE))
        self.assertEqual(z.z, TRACE_ORDER)
        self.assertEqual(format_trace(reform(tokens, z)), TRACE)

    def test_forced_start_trace_restores(self):
        tokens, z = restore(parse_trace(FORCED_TRACE))
        self.assertEqual(tokens, FORCED)
        self.assertEqual(z.start, FORCED.index("dump") + 1)
        self.assertEqual(format_trace(reform(tokens, z)), FORCED_TRACE)

    def test_round_trip_all_small_orderings(self):
        for T in range(0, 7):
            tokens = [f"t{i}" for i in range(T)]
            for z in enumerate_orderings(T):
                self.assertEqual(restore(reform(tokens, z)), (tokens, z))

    def test_round_trip_random_long(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            T = int(rng.integers(0, 65))
            tokens = [int(t) for t in rng.integers(3, 50, size=T)]
            z = sample_uniform_ordering(T, rng)
            restored, z2 = restore(reform(tokens, z, eol=1, eor=2), eol=1, eor=2)
            self.assertEqual(restored, tokens)
            self.assertEqual(z2, z)

    def test_reform_rejects_invalid(self):
        with self.assertRaises(InvalidOrderingError):
            reform(["a", "b"], (0, 2, 1, 3))


class TestRestoreErrors(unittest.TestCase):
    def seq(self, *items):
        return ReformedSequence(tuple(DirectedToken(t, Direction(d)) for t, d in items))

    def test_missing_marker(self):
        with self.assertRaises(MalformedSequenceError):
            restore(self.seq(("a", "+"), (EOR, "+")))

    def test_duplicate_marker(self):
        with self.assertRaises(MalformedSequenceError):
            restore(self.seq((EOL, "+"), (EOL, "+"), (EOR, "+")))

    def test_attach_beyond_eol(self):
        with self.assertRaises(MalformedSequenceError):
            restore(self.seq(("a", "-"), (EOL, "-"), ("b", "+"), (EOR, "+")))

    def test_eor_on_left(self):
        with self.assertRaises(MalformedSequenceError):
            restore(self.seq(("a", "-"), (EOR, "-"), (EOL, "+")))

    def test_parse_errors(self):
        with self.assertRaises(MalformedSequenceError):
            parse_trace("")
        with self.assertRaises(MalformedSequenceError):
            parse_trace("a b/+ [EOR]")
        with self.assertRaises(MalformedSequenceError):
            Direction.parse("?")

    def test_final_token_with_direction_like_text(self):
        truncated = ReformedSequence(
            (DirectedToken("a/b", Direction.LEFT), DirectedToken("and/+", Direction.RIGHT))
        )
        text = format_trace(truncated)
        self.assertEqual(text, "a/b/- and/+/+")
        self.assertEqual(parse_trace(text), truncated)
        self.assertEqual(format_trace(reform(["x", "y"], l2r_ordering(2))), "[EOL]/+ x/+ y/+ [EOR]")

    def test_final_direction_optional(self):
        self.assertEqual(parse_trace("[EOL]/+ [EOR]/+"), parse_trace("[EOL]/+ [EOR]"))


if __name__ == "__main__":
    unittest.main()
