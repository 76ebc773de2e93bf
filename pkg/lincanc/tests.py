import numpy as np
from django.test import SimpleTestCase

from fxp.arithmetic import FxpFormat, OpCounter, dequantize_array, quantize_array
from sic.errors import ConfigError, DataError
from sigmodel.signals import ComplexSeq

from .canceller import (
    IllConditionedError,
    LinModel,
    apply_linear,
    apply_linear_fxp,
    fit_linear,
    quantize_linear,
    solve_normal_equations,
)
from .serializers import LinModelSerializer


def white_seq(n, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexSeq((rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2))


class FitLinearTests(SimpleTestCase):

    def test_recovers_fir_taps(self):
        x = white_seq(4000)
        truth = np.array([0.8 - 0.3j, 0.25 + 0.1j])
        y = apply_linear(LinModel(truth), x)
        model = fit_linear(x.segment(1), y.segment(1), 2)
        np.testing.assert_allclose(model.taps, truth, atol=1e-8)

    def test_identity_channel(self):
        x = white_seq(2000, seed=1)
        model = fit_linear(x, x, 3)
        np.testing.assert_allclose(model.taps, [1, 0, 0], atol=1e-8)

    def test_idempotent_identification(self):
        x = white_seq(3000, seed=2)
        first = LinModel(np.random.default_rng(3).standard_normal(4) * (1 + 0.5j))
        second = fit_linear(x.segment(3), apply_linear(first, x).segment(3), 4)
        np.testing.assert_allclose(apply_linear(second, x).valid, apply_linear(first, x).valid, atol=1e-8)

    def test_preconditions(self):
        x = white_seq(10)
        with self.assertRaises(DataError):
            fit_linear(x, x, 3)
        with self.assertRaises(DataError):
            fit_linear(x, x.segment(1), 1)
        with self.assertRaises(ConfigError):
            fit_linear(x, x, 0)

    def test_rank_deficient_gram_names_condition(self):
        A = np.ones((50, 2), dtype=np.complex128) * 1e6
        with self.assertRaises(IllConditionedError) as ctx:
            solve_normal_equations(A, np.ones(50), ridge=1e-9)
        self.assertGreater(ctx.exception.condition, 1e12)
        self.assertIn('condition estimate', str(ctx.exception))


class ApplyLinearTests(SimpleTestCase):

    def test_single_tap_identity(self):
        x = white_seq(64)
        y = apply_linear(LinModel([1.0]), x)
        np.testing.assert_array_equal(y.samples, x.samples)
        self.assertEqual(y.valid_from, 0)

    def test_pure_delay(self):
        x = white_seq(64)
        y = apply_linear(LinModel([0.0, 1.0]), x)
        self.assertEqual(y.valid_from, 1)
        np.testing.assert_array_equal(y.valid, x.samples[:-1])

    def test_linearity(self):
        m = LinModel([0.5 + 0.2j, -0.1j, 0.3])
        x1, x2 = white_seq(200, seed=4), white_seq(200, seed=5)
        a, b = 0.7 - 0.2j, -1.3 + 0.4j
        combined = apply_linear(m, ComplexSeq(a * x1.samples + b * x2.samples))
        expected = a * apply_linear(m, x1).samples + b * apply_linear(m, x2).samples
        np.testing.assert_allclose(combined.samples, expected, atol=1e-12)

    def test_too_short(self):
        with self.assertRaises(DataError):
            apply_linear(LinModel([1, 2, 3]), ComplexSeq([1, 2]))


class FixedPointFirTests(SimpleTestCase):

    def test_close_to_float(self):
        fmt = FxpFormat.with_int_bits(20)
        m = LinModel([0.9 - 0.2j, 0.15 + 0.05j, -0.02j])
        x = white_seq(300, seed=6)
        re, im = apply_linear_fxp(quantize_linear(m, fmt), quantize_array(x.samples.real, fmt),
                                  quantize_array(x.samples.imag, fmt))
        y = dequantize_array(re, fmt) + 1j * dequantize_array(im, fmt)
        np.testing.assert_allclose(y[2:], apply_linear(m, x).valid, atol=20 * fmt.resolution)
        self.assertFalse(np.any(re[:2]) or np.any(im[:2]))

    def test_fixed_point_op_counts(self):
        fmt = FxpFormat(16, 12)
        m = quantize_linear(LinModel([0.5, 0.25, 0.125, 0.0625]), fmt)
        counter = OpCounter()
        apply_linear_fxp(m, np.ones(20, dtype=np.int64), np.zeros(20, dtype=np.int64), lanes=2, counter=counter)
        self.assertEqual(counter.as_tuple(), (3 * 4 * 17, (7 * 4 - 2) * 17))

    def test_op_counts_any_lane_count(self):
        fmt = FxpFormat(16, 12)
        x = white_seq(100)
        x_re, x_im = quantize_array(x.samples.real, fmt), quantize_array(x.samples.imag, fmt)
        for L in range(1, 8):
            m = quantize_linear(LinModel(np.ones(L)), fmt)
            outputs = 100 - L + 1
            for lanes in range(1, L + 3):
                counter = OpCounter()
                apply_linear_fxp(m, x_re, x_im, lanes=lanes, counter=counter)
                self.assertEqual(counter.as_tuple(), (3 * L * outputs, (7 * L - 2) * outputs))


class LinModelSerializerTests(SimpleTestCase):

    def test_json_shape(self):
        data = LinModelSerializer.dump(LinModel([1 + 2j, -0.5]))
        self.assertEqual(data['L'], 2)
        self.assertEqual(data['taps'], [[1.0, 2.0], [-0.5, 0.0]])
        np.testing.assert_array_equal(LinModelSerializer.load(data).taps, [1 + 2j, -0.5])

    def test_inconsistent_length_rejected(self):
        with self.assertRaises(DataError):
            LinModelSerializer.load({'L': 3, 'taps': [[1, 0]]})
        with self.assertRaises(DataError):
            LinModelSerializer.load({'L': 1, 'taps': [[1, 0]], 'extra': 1})
