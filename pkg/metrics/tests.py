import math

import numpy as np
from django.test import SimpleTestCase

from fxp.arithmetic import FxpFormat, OpCounter
from nncanc.network import NNModel, predict_nn_fxp, quantize_nn
from polycanc.basis import bf_indices
from polycanc.canceller import PolyModel, apply_poly_fxp, quantize_input, quantize_poly
from sic.errors import ConfigError, DataError
from sigmodel.signals import ComplexSeq

from .cancellation import c_db, psd, psd_frame
from .complexity import ComplexityReport, complexity


COUNT_FORMAT = FxpFormat(16, 12)


def white_seq(n, seed=0, power=1.0):
    rng = np.random.default_rng(seed)
    return ComplexSeq(np.sqrt(power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n)))


class CancellationRatioTests(SimpleTestCase):

    def setUp(self):
        self.y = white_seq(1000, seed=1)

    def test_no_cancellation_is_zero_db(self):
        self.assertEqual(c_db(self.y, self.y.like(np.zeros(1000))), 0.0)

    def test_perfect_cancellation_is_infinite(self):
        self.assertEqual(c_db(self.y, self.y), math.inf)

    def test_half_estimate(self):
        self.assertAlmostEqual(c_db(self.y, self.y.like(self.y.samples / 2)), 10 * math.log10(4), places=9)

    def test_scale_invariant(self):
        y_hat = self.y.like(self.y.samples * (0.9 + 0.05j))
        scaled = 3.5 - 1j
        reference = c_db(self.y, y_hat)
        self.assertAlmostEqual(c_db(self.y.like(self.y.samples * scaled), y_hat.like(y_hat.samples * scaled)),
                               reference, places=9)

    def test_uses_shared_valid_region(self):
        y_hat = self.y.like(np.concatenate([np.full(3, 100.0), self.y.samples[3:]]), valid_from=3)
        self.assertEqual(c_db(self.y, y_hat), math.inf)

    def test_errors(self):
        with self.assertRaises(DataError):
            c_db(ComplexSeq(np.zeros(10)), ComplexSeq(np.ones(10)))
        with self.assertRaises(DataError):
            c_db(self.y, self.y.segment(1))


class PsdTests(SimpleTestCase):

    def test_tone_peaks_at_its_bin(self):
        n = np.arange(8192)
        k = 5
        x = ComplexSeq(np.exp(2j * np.pi * k * n / 64), sample_rate_hz=64.0)
        freqs, values = psd(x, nfft=64)
        self.assertEqual(freqs[np.argmax(values)], float(k))
        self.assertGreater(values.max() - np.median(values), 40.0)

    def test_white_noise_is_flat_and_integrates_to_power(self):
        x = white_seq(20480, seed=2, power=0.25)
        freqs, values = psd(x, nfft=64)
        self.assertEqual(freqs.size, 64)
        self.assertTrue(np.all(np.diff(freqs) > 0))
        level = 10 * np.log10(0.25 / 64)
        self.assertTrue(np.all(np.abs(values - level) < 1.0))
        total_db = 10 * np.log10(np.sum(10 ** (values / 10)))
        self.assertAlmostEqual(total_db, 10 * np.log10(0.25), delta=0.1)

    def test_zero_signal_is_minus_infinity(self):
        _, values = psd(ComplexSeq(np.zeros(256)), nfft=64)
        self.assertTrue(np.all(np.isneginf(values)))

    def test_errors(self):
        with self.assertRaises(ConfigError):
            psd(white_seq(1000), nfft=100)
        with self.assertRaises(DataError):
            psd(white_seq(100), nfft=128)

    def test_frame(self):
        frame = psd_frame({'rx': white_seq(512, seed=3), 'residual': white_seq(512, seed=4)}, nfft=32)
        self.assertEqual(list(frame.columns), ['freq_hz', 'rx', 'residual'])
        self.assertEqual(len(frame), 32)


class ComplexityTests(SimpleTestCase):

    def test_printed_values(self):
        self.assertEqual(complexity('poly', L=3, P=7), ComplexityReport(418, 180, 60, 9))
        self.assertEqual(complexity('linear', L=1), ComplexityReport(5, 3))
        self.assertEqual(complexity('nn', L=2, N_h=8), ComplexityReport(70, 54))
        self.assertEqual(complexity('nn', L=4, N_h=34), ComplexityReport(402, 352))

    def test_linear_closed_form(self):
        for L in range(1, 11):
            self.assertEqual(complexity('linear', L=L).as_dict(), {'n_add': 7 * L - 2, 'n_mul': 3 * L})

    def test_deep_network_form(self):
        report = complexity('nn', L=2, N_h=8, N_l=3)
        self.assertEqual(report.n_add, (7 + 2 * 9) * 8 + 14)
        self.assertEqual(report.n_mul, (6 + 2 * 8) * 8 + 6)

    def test_invalid_parameters(self):
        with self.assertRaises(ConfigError):
            complexity('poly', L=3, P=6)
        with self.assertRaises(ConfigError):
            complexity('linear', L=0)
        with self.assertRaises(ConfigError):
            complexity('nn', L=2, N_h=0)
        with self.assertRaises(ConfigError):
            complexity('volterra', L=2)

    def test_poly_bf_count_by_enumeration(self):
        for L in range(1, 7):
            terms = {(index.p, index.q, l) for index in bf_indices(1) for l in range(L)}
            self.assertEqual(complexity('poly', L=L, P=1).n_bf, len(terms))
            self.assertEqual(len(terms), 2 * L)

    def test_poly_counter_grid(self):
        for L in range(1, 7):
            for P in (1, 3, 5, 7):
                counter = OpCounter()
                raw = quantize_input(white_seq(L + 9), COUNT_FORMAT)
                apply_poly_fxp(quantize_poly(PolyModel.zeros(P, L), COUNT_FORMAT), *raw, counter=counter)
                report = complexity('poly', L=L, P=P)
                self.assertEqual(counter.as_tuple(), (10 * report.n_mul, 10 * report.n_add))

    def test_nn_counter_grid(self):
        for L in (1, 2, 4, 6):
            for N_h in (1, 2, 4, 8, 16):
                for N_l in (1, 2, 3):
                    counter = OpCounter()
                    qm = quantize_nn(NNModel.zeros(L, N_l, N_h), COUNT_FORMAT)
                    predict_nn_fxp(qm, white_seq(L + 9), counter=counter)
                    report = complexity('nn', L=L, N_h=N_h, N_l=N_l)
                    self.assertEqual(counter.as_tuple(), (10 * report.n_mul, 10 * report.n_add))
