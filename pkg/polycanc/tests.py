import numpy as np
from django.test import SimpleTestCase

from fxp.arithmetic import FxpFormat, OpCounter, dequantize_array
from lincanc.canceller import LinModel, apply_linear, fit_linear
from metrics.cancellation import c_db
from sic.errors import ConfigError, DataError
from sigmodel.datasets import make_dataset
from sigmodel.signals import ComplexSeq, TxChainConfig

from .basis import BfBuffer, BfCounter, BfIndex, bf_direct, bf_dp, bf_indices, n_bf, n_mul_bf
from .canceller import (
    PolyModel,
    apply_poly,
    apply_poly_fxp,
    fit_hybrid_poly,
    fit_poly,
    predict_hybrid_poly,
    quantize_input,
    quantize_poly,
    schedule_order,
)
from .serializers import PolyModelSerializer


def white_seq(n, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return ComplexSeq(scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2))


def gaussian_integers(n, seed=0, high=4):
    rng = np.random.default_rng(seed)
    return rng.integers(-high, high + 1, n) + 1j * rng.integers(-high, high + 1, n)


def random_model(P, L, seed=0, scale=0.1):
    rng = np.random.default_rng(seed)
    shape = ((P + 1) * (P + 3) // 4, L)
    return PolyModel(P, L, scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)))


class BasisFunctionTests(SimpleTestCase):

    def test_definitions(self):
        x = 0.3 - 1.7j
        self.assertEqual(bf_direct(x, 1, 1), x)
        self.assertEqual(bf_direct(x, 1, 0), x.conjugate())
        self.assertEqual(bf_direct(1 + 1j, 3, 2), 2 + 2j)

    def test_dp_matches_direct_exactly(self):
        x = gaussian_integers(10000, seed=1)
        for P in (1, 3, 5, 7, 9):
            values = bf_dp(x, P)
            self.assertEqual(len(values), (P + 1) * (P + 3) // 4)
            for index, value in values.items():
                np.testing.assert_array_equal(value, bf_direct(x, index.p, index.q))

    def test_conjugate_symmetry(self):
        x = gaussian_integers(10000, seed=2)
        for P in (1, 3, 5, 7, 9):
            for index in bf_indices(P):
                np.testing.assert_array_equal(bf_direct(x, index.p, index.q),
                                              np.conj(bf_direct(x, index.p, index.p - index.q)))

    def test_square_recurrence(self):
        x = gaussian_integers(10000, seed=3)
        for p in (3, 5, 7, 9):
            for q in range(2, p + 1):
                np.testing.assert_array_equal(bf_direct(x, p, q), x * x * bf_direct(x, p - 2, q - 2))

    def test_multiplication_counter(self):
        for P in (3, 5, 7, 9):
            counter = BfCounter()
            bf_dp(0.5 + 0.25j, P, counter)
            self.assertEqual(counter.mults, (P + 1) * (P + 3) // 8 - 1)
            self.assertEqual(counter.mults, n_mul_bf(P))
            self.assertEqual(counter.precompute, 1)
        counter = BfCounter()
        bf_dp(1j, 1, counter)
        self.assertEqual((counter.mults, counter.precompute), (0, 0))
        counter = BfCounter()
        bf_dp(np.ones(10), 7, counter)
        self.assertEqual(counter.mults, 90)

    def test_p7_has_twenty_functions(self):
        counter = BfCounter()
        self.assertEqual(len(bf_dp(1 + 2j, 7, counter)), 20)
        self.assertEqual(counter.mults, 9)

    def test_enumeration_matches_closed_form(self):
        for L in range(1, 11):
            for P in (1, 3, 5, 7, 9):
                triples = {(i.p, i.q, l) for i in bf_indices(P) for l in range(L)}
                self.assertEqual(len(triples), L * (P + 1) * (P + 3) // 4)
                self.assertEqual(n_bf(L, P), len(triples))
        self.assertEqual(n_bf(3, 7), 60)
        self.assertEqual(n_bf(4, 1), 8)

    def test_invalid_orders(self):
        for P in (0, 2, -1):
            with self.assertRaises(ConfigError):
                bf_dp(1j, P)
        with self.assertRaises(ConfigError):
            BfIndex(3, 4)
        with self.assertRaises(ConfigError):
            BfIndex(2, 1)


class BfBufferTests(SimpleTestCase):

    def test_capacity(self):
        for L in range(1, 6):
            for P in (1, 3, 5, 7):
                self.assertEqual(BfBuffer(L, P).capacity, (L - 1) * (P + 1) * (P + 3) // 4)

    def test_delays(self):
        buffer = BfBuffer(3, 3)
        for n in range(5):
            buffer.push(np.full(6, n))
            np.testing.assert_array_equal(buffer.delayed(1)[0], np.full(6, n))
            if n:
                np.testing.assert_array_equal(buffer.delayed(2)[0], np.full(6, n - 1))
        with self.assertRaises(DataError):
            buffer.delayed(3)


class FitPolyTests(SimpleTestCase):

    def test_self_identification(self):
        x = white_seq(4000, seed=4)
        truth = random_model(3, 2, seed=5)
        y_nl = apply_poly(truth, x)
        fitted = fit_poly(x.segment(1), y_nl.segment(1), 3, 2)
        error = np.linalg.norm(fitted.coeffs - truth.coeffs) / np.linalg.norm(truth.coeffs)
        self.assertLess(error, 1e-6)

    def test_linear_special_case(self):
        x = white_seq(4000, seed=6)
        y = apply_linear(LinModel([0.5 - 0.2j, 0.1j, -0.05]), x)
        x, y = x.segment(2), y.segment(2)
        lin = fit_linear(x, y, 3)
        poly = fit_poly(x, y, 1, 3, active=[(1, 1)])
        np.testing.assert_allclose(poly.coeffs[1], lin.taps, atol=1e-9)
        self.assertFalse(np.any(poly.coeffs[0]))

    def test_needs_enough_samples(self):
        x = white_seq(200)
        with self.assertRaises(DataError):
            fit_poly(x, x, 7, 3)

    def test_rejects_unknown_active_terms(self):
        x = white_seq(400)
        with self.assertRaises(ConfigError):
            fit_poly(x, x, 1, 2, active=[(3, 1)])


class ApplyPolyTests(SimpleTestCase):

    def test_zero_model(self):
        y = apply_poly(PolyModel.zeros(5, 4), white_seq(50))
        self.assertFalse(np.any(y.samples))
        self.assertEqual(y.valid_from, 3)

    def test_buffered_equals_recompute(self):
        m = random_model(7, 4, seed=7)
        x = white_seq(500, seed=8)
        buffered, recomputed = BfCounter(), BfCounter()
        a = apply_poly(m, x, bf_counter=buffered)
        b = apply_poly(m, x, bf_counter=recomputed, recompute=True)
        np.testing.assert_array_equal(a.samples, b.samples)
        self.assertEqual(buffered.mults, 500 * n_mul_bf(7))
        self.assertEqual(recomputed.mults, 4 * 497 * n_mul_bf(7))

    def test_linear_term_reproduces_fir(self):
        taps = np.array([0.5 - 0.25j, 0.125j, -0.75])
        x = ComplexSeq(gaussian_integers(300, seed=9))
        model = PolyModel.from_map(1, 3, {(1, 1, l): t for l, t in enumerate(taps)})
        np.testing.assert_array_equal(apply_poly(model, x).samples, apply_linear(LinModel(taps), x).samples)

    def test_schedule_puts_buffered_terms_first(self):
        order = schedule_order(3, 3)
        self.assertEqual(len(order), n_bf(3, 3))
        self.assertEqual([l for _, l in order[:12]], [1] * 6 + [2] * 6)
        self.assertEqual([l for _, l in order[12:]], [0] * 6)

    def test_matches_direct_sum(self):
        m = random_model(5, 2, seed=10)
        x = white_seq(40, seed=11)
        y = apply_poly(m, x)
        n = 30
        direct = sum(m.coeff(p, q, l) * bf_direct(x.samples[n - l], p, q) for (p, q, l), _ in m.items())
        self.assertAlmostEqual(y.samples[n], direct, delta=1e-12)


class FixedPointPolyTests(SimpleTestCase):

    def test_close_to_float_at_q25(self):
        fmt = FxpFormat.with_int_bits(25)
        m = random_model(7, 3, seed=12, scale=0.5)
        m = PolyModel(m.P, m.L, m.coeffs, input_shift=2)
        x = white_seq(400, seed=13)
        re, im = apply_poly_fxp(quantize_poly(m, fmt), *quantize_input(x, fmt, 2))
        y = dequantize_array(re, fmt) + 1j * dequantize_array(im, fmt)
        np.testing.assert_allclose(y[2:], apply_poly(m, x).valid, atol=200 * fmt.resolution)

    def test_lanes_irrelevant_without_saturation(self):
        fmt = FxpFormat.with_int_bits(25)
        qm = quantize_poly(random_model(5, 3, seed=14), fmt)
        raw = quantize_input(white_seq(100, seed=15), fmt, 2)
        a = apply_poly_fxp(qm, *raw, lanes=1)
        b = apply_poly_fxp(qm, *raw, lanes=10)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_op_counter_excludes_bfs(self):
        fmt = FxpFormat(16, 12)
        qm = quantize_poly(PolyModel.zeros(7, 3), fmt)
        counter, bf_counter = OpCounter(), OpCounter()
        apply_poly_fxp(qm, np.zeros(12, dtype=np.int64), np.zeros(12, dtype=np.int64), lanes=10,
                       counter=counter, bf_counter=bf_counter)
        self.assertEqual(counter.as_tuple(), (1800, 4180))
        self.assertEqual(bf_counter.mults, 3 * 10 * 12)

    def test_idle_cpes_cost_nothing(self):
        fmt = FxpFormat(16, 12)
        qm = quantize_poly(PolyModel.zeros(1, 1), fmt)
        raw = np.zeros(10, dtype=np.int64)
        for lanes in (1, 2, 3, 5):
            counter = OpCounter()
            apply_poly_fxp(qm, raw, raw, lanes=lanes, counter=counter)
            self.assertEqual(counter.as_tuple(), (6 * 10, 12 * 10))


class HybridPolyTests(SimpleTestCase):

    def test_beats_linear_on_nonlinear_chain(self):
        chain = TxChainConfig(
            pa_coeffs={(1, 0): 1.0, (3, 0): -0.03 + 0.004j, (3, 1): 0.005, (5, 0): 0.002},
            si_channel=(0.95 * np.exp(0.3j), 0.2 * np.exp(-1.1j)),
            iq_gain_mismatch=0.08, iq_phase_mismatch=0.075, snr_db=40.0, seed=11,
        )
        dataset = make_dataset(chain, 8192)
        x_tr, y_tr, x_te, y_te = dataset.x_train, dataset.y_train, dataset.x_test, dataset.y_test
        lin = fit_linear(x_tr, y_tr, 4)
        hybrid = fit_hybrid_poly(x_tr, y_tr, 4, 5, 3, input_shift=2)
        start = 3
        lin_db = c_db(y_te.segment(start), apply_linear(lin, x_te).segment(start))
        poly_db = c_db(y_te.segment(start), predict_hybrid_poly(hybrid, x_te).segment(start))
        self.assertGreater(poly_db, lin_db + 5.0)


class PolySerializerTests(SimpleTestCase):

    def test_round_trip_in_lexicographic_order(self):
        m = random_model(3, 2, seed=16)
        data = PolyModelSerializer.dump(m)
        keys = [(c['p'], c['q'], c['l']) for c in data['coeffs']]
        self.assertEqual(keys, sorted(keys))
        self.assertEqual(len(keys), 12)
        np.testing.assert_array_equal(PolyModelSerializer.load(data).coeffs, m.coeffs)

    def test_wrong_count_rejected(self):
        data = PolyModelSerializer.dump(random_model(3, 2))
        data['coeffs'].pop()
        with self.assertRaises(DataError):
            PolyModelSerializer.load(data)
