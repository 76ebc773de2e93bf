from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from fxp.arithmetic import FxpFormat, dequantize_array
from lincanc.canceller import LinModel
from nncanc.network import NNModel, glorot_uniform, layer_sizes, predict_nn_fxp, quantize_nn
from polycanc.basis import bf_per_sample
from polycanc.canceller import PolyModel, apply_poly_fxp, quantize_input, quantize_poly
from sic.errors import ConfigError, ConstraintViolation, DataError
from sigmodel.signals import ComplexSeq

from .analytical import (
    HwConfig,
    PolyHwConfig,
    ScheduleConstraintError,
    StageConfig,
    nn_pipeline_report,
    poly_hw_report,
    stage_latency,
    stage_steps,
)
from .reports import reports_table, stages_table
from .simulator import NNPipelineSimulator, PolySimulator, SimulationDeadlockError, simulate_nn_pipeline, simulate_poly

NN_FORMAT = FxpFormat.with_int_bits(16, 4)
POLY_FORMAT = FxpFormat.with_int_bits(25, 4)

EQUI = HwConfig.for_network(2, 1, 8, (8, 4), N_CPE_linear=1)
PEAK = HwConfig.for_network(4, 1, 34, (40, 10), N_CPE_linear=1)
POLY = PolyHwConfig(P=7, L=3, N_CPE=10, N_CPE_BF=3)


def white_seq(n, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    return ComplexSeq(scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2))


def quantized_network(L, N_l, N_h, seed=0):
    rng = np.random.default_rng(seed)
    weights, biases = glorot_uniform(layer_sizes(L, N_l, N_h), rng)
    biases = [0.1 * rng.standard_normal(b.shape) for b in biases]
    lin = LinModel(0.5 * (rng.standard_normal(L) + 1j * rng.standard_normal(L)))
    m = NNModel(L, N_l, N_h, weights, biases, lin, denorm_shift=(-3, -2), denorm_mean=0.01 - 0.02j, input_scale=1.5)
    return quantize_nn(m, NN_FORMAT)


def quantized_poly(P, L, seed=0, input_shift=1):
    rng = np.random.default_rng(seed)
    shape = (bf_per_sample(P), L)
    coeffs = 0.05 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return quantize_poly(PolyModel(P, L, coeffs, input_shift), POLY_FORMAT)


class StageModelTests(SimpleTestCase):

    def test_printed_stage_throughputs(self):
        self.assertEqual(stage_latency(StageConfig('NBN', 8, 34, 40)).throughput, Fraction(1, 7))
        self.assertEqual(stage_latency(StageConfig('NBN', 4, 8, 8)).throughput, Fraction(1, 4))

    def test_fully_parallel_stage(self):
        timing = stage_latency(StageConfig('NBN', 4, 2, 8))
        self.assertEqual((timing.latency, timing.throughput), (2, Fraction(1)))

    def test_partial_chunks(self):
        stage = StageConfig('NBN', 8, 3, 3)
        timing = stage_latency(stage)
        self.assertEqual((stage.cycles, timing.latency, timing.first_latency), (9, 10, 4))
        ibi = StageConfig('IBI', 8, 3, 2)
        self.assertEqual(ibi.cycles, 16)
        self.assertEqual(stage_latency(ibi).first_latency, 17)

    def test_steps_cover_every_product_once(self):
        for n_in, n_out in ((3, 4), (4, 8), (8, 2), (5, 3)):
            for schedule in ('NBN', 'IBI'):
                for n_pe in range(1, n_in * n_out + 1):
                    try:
                        stage = StageConfig(schedule, n_in, n_out, n_pe)
                    except ScheduleConstraintError:
                        continue
                    steps = stage_steps(stage)
                    self.assertEqual(len(steps), stage.cycles)
                    products = [(j, i) for step in steps for j in step.neurons for i in step.inputs]
                    self.assertEqual(len(products), n_in * n_out)
                    self.assertEqual(len(set(products)), n_in * n_out)
                    self.assertTrue(all(len(s.neurons) * len(s.inputs) <= n_pe for s in steps))

    def test_memory_words(self):
        nbn = nn_pipeline_report(EQUI).stages[0]
        self.assertEqual((nbn.weight_word_bits, nbn.weight_words), (8 * 16, 4))
        self.assertEqual((nbn.bias_word_bits, nbn.bias_words), (2 * 16, 4))
        ibi = nn_pipeline_report(EQUI).stages[1]
        self.assertEqual((ibi.bias_word_bits, ibi.bias_words), (2 * 16, 1))

    def test_constraints(self):
        with self.assertRaises(ScheduleConstraintError):
            StageConfig('NBN', 4, 8, 6)
        with self.assertRaises(ScheduleConstraintError):
            StageConfig('IBI', 8, 2, 3)
        with self.assertRaises(ScheduleConstraintError):
            StageConfig('NBN', 2, 2, 8)
        with self.assertRaises(ConfigError):
            StageConfig('SIMD', 2, 2, 1)
        with self.assertRaises(ConstraintViolation):
            HwConfig(2, (StageConfig('NBN', 4, 8, 4), StageConfig('NBN', 8, 2, 8)))
        with self.assertRaises(ScheduleConstraintError):
            HwConfig.for_network(2, 1, 8, (8, 4), N_CPE_linear=3)
        with self.assertRaises(ConfigError):
            HwConfig.for_network(2, 1, 8, (8,))


class NNReportTests(SimpleTestCase):

    def test_equi_preset(self):
        report = nn_pipeline_report(EQUI)
        self.assertEqual(report.throughput, Fraction(1, 4))
        self.assertEqual(report.latency, 7)
        self.assertTrue(report.bound_applies)
        self.assertEqual((report.op_counts.n_add, report.op_counts.n_mul), (70, 54))

    def test_peak_preset(self):
        report = nn_pipeline_report(PEAK)
        self.assertEqual(report.throughput, Fraction(1, 7))
        self.assertEqual(report.latency, 10)
        self.assertTrue(report.bound_applies)

    def test_linear_unit_can_limit_throughput(self):
        report = nn_pipeline_report(HwConfig.for_network(4, 1, 2, (16, 4), N_CPE_linear=1))
        self.assertEqual(report.throughput, Fraction(1, 4))
        self.assertEqual(report.details['linear_latency'], 4)

    def test_odd_stage_count_has_no_closed_form(self):
        report = nn_pipeline_report(HwConfig.for_network(2, 2, 4, (4, 4, 4)))
        self.assertIsNone(report.latency)
        self.assertFalse(report.bound_applies)
        self.assertEqual(report.throughput, Fraction(1, 4))

    def test_serial_schedule_breaks_the_bound(self):
        report = nn_pipeline_report(HwConfig.for_network(2, 1, 8, (1, 1)))
        self.assertEqual(report.throughput, Fraction(1, 32))
        self.assertEqual(report.latency, 22)
        self.assertFalse(report.bound_applies)

    def test_rendering(self):
        reports = {'Equi NN': nn_pipeline_report(EQUI), 'Poly': poly_hw_report(POLY)}
        table = reports_table(reports)
        self.assertIn('Throughput (samples/cycle)', table)
        self.assertIn('1/7', table)
        self.assertIn('NBN', stages_table(reports['Equi NN']))
        data = reports['Equi NN'].to_dict()
        self.assertEqual(data['throughput_samples_per_cycle'], '1/4')
        self.assertEqual(data['stages'][1]['schedule'], 'IBI')

    def test_clock_figures(self):
        cfg = HwConfig.for_network(2, 1, 8, (8, 4), clock_hz=560e6)
        data = nn_pipeline_report(cfg).to_dict()
        self.assertAlmostEqual(data['latency_ns'], 7 / 560e6 * 1e9)
        self.assertAlmostEqual(data['throughput_msamples_per_s'], 140.0)


class PolyReportTests(SimpleTestCase):

    def test_preset(self):
        report = poly_hw_report(POLY)
        self.assertEqual((report.details['L_BF_new'], report.details['L_BF_old']), (5, 4))
        self.assertEqual(report.latency, 8)
        self.assertEqual(report.throughput, Fraction(1, 7))
        self.assertEqual(report.memory, {'parameter_words': 6, 'parameter_word_bits': 500, 'bf_buffer_entries': 40})
        self.assertEqual(report.op_counts.as_dict(), {'n_add': 418, 'n_mul': 180, 'n_bf': 60, 'n_mul_bf': 9})

    def test_memoryless_model(self):
        report = poly_hw_report(PolyHwConfig(P=7, L=1, N_CPE=5, N_CPE_BF=3))
        self.assertEqual(report.details['L_BF_old'], 0)
        self.assertEqual(report.latency, 10)
        self.assertEqual(report.throughput, Fraction(1, 9))

    def test_one_cpe_per_term(self):
        report = poly_hw_report(PolyHwConfig(P=7, L=3, N_CPE=60, N_CPE_BF=3))
        self.assertEqual(report.latency, 7)
        self.assertEqual(report.throughput, Fraction(1, 6))

    def test_fully_parallel_first_order(self):
        report = poly_hw_report(PolyHwConfig(P=1, L=3, N_CPE=6, N_CPE_BF=1))
        self.assertEqual((report.details['L_BF_new'], report.details['L_BF_old']), (1, 1))
        self.assertEqual(report.latency, 2)
        self.assertEqual(report.throughput, Fraction(1))

    def test_buffered_terms_hide_the_basis_unit(self):
        report = poly_hw_report(PolyHwConfig(P=7, L=3, N_CPE=4, N_CPE_BF=4))
        self.assertEqual((report.details['L_BF_new'], report.details['L_BF_old']), (4, 10))
        self.assertEqual(report.latency, 16)

    def test_constraints(self):
        with self.assertRaises(ScheduleConstraintError):
            PolyHwConfig(P=7, L=3, N_CPE=10, N_CPE_BF=5)
        with self.assertRaises(ScheduleConstraintError):
            PolyHwConfig(P=3, L=1, N_CPE=7, N_CPE_BF=1)
        with self.assertRaises(ConfigError):
            PolyHwConfig(P=6, L=3, N_CPE=10, N_CPE_BF=3)


class NNSimulatorTests(SimpleTestCase):

    def assertBitExact(self, qm, cfg, x):
        out, report = simulate_nn_pipeline(qm, cfg, x)
        reference = predict_nn_fxp(qm, x, lanes=cfg.lanes, linear_lanes=cfg.N_CPE_linear)
        np.testing.assert_array_equal(out.samples, reference.samples)
        self.assertEqual(out.valid_from, reference.valid_from)
        return report

    def test_equi_matches_reference_and_closed_form(self):
        report = self.assertBitExact(quantized_network(2, 1, 8), EQUI, white_seq(1001, seed=1))
        self.assertEqual(report.simulated_throughput, Fraction(1, 4))
        self.assertEqual(report.simulated_latency, 7)
        self.assertEqual(report.simulated_ops, {'n_add': Fraction(70), 'n_mul': Fraction(54)})

    def test_peak_matches_reference_and_closed_form(self):
        report = self.assertBitExact(quantized_network(4, 1, 34, seed=2), PEAK,
                                     white_seq(1003, seed=3, scale=1.5))
        self.assertEqual(report.simulated_throughput, Fraction(1, 7))
        self.assertEqual(report.simulated_latency, 10)
        self.assertEqual(report.simulated_ops, {'n_add': Fraction(402), 'n_mul': Fraction(352)})

    def test_fully_parallel_pipeline(self):
        cfg = HwConfig.for_network(1, 1, 2, (4, 4))
        report = self.assertBitExact(quantized_network(1, 1, 2, seed=4), cfg, white_seq(100, seed=5))
        self.assertEqual(report.throughput, Fraction(1))
        self.assertEqual(report.simulated_throughput, Fraction(1))

    def test_serial_pipeline_exceeds_the_bound(self):
        cfg = HwConfig.for_network(2, 1, 8, (1, 1))
        report = self.assertBitExact(quantized_network(2, 1, 8, seed=6), cfg, white_seq(40, seed=7))
        self.assertEqual(report.simulated_throughput, Fraction(1, 32))
        self.assertEqual(report.simulated_latency, 36)
        self.assertGreater(report.simulated_latency, report.latency)

    def test_deeper_network(self):
        cfg = HwConfig.for_network(2, 2, 4, (4, 4, 4), N_CPE_linear=2)
        report = self.assertBitExact(quantized_network(2, 2, 4, seed=8), cfg, white_seq(200, seed=9))
        self.assertEqual(report.simulated_throughput, report.throughput)

    def test_deadlock_is_reported(self):
        sim = NNPipelineSimulator(quantized_network(2, 1, 8), EQUI)
        sim.stages[0].closes = tuple(np.array([], dtype=np.int64) for _ in sim.stages[0].steps)
        with self.assertRaises(SimulationDeadlockError) as ctx:
            sim.run(white_seq(50))
        self.assertEqual(ctx.exception.trace[1]['waiting'], 'step inputs not ready')
        self.assertEqual(ctx.exception.trace[0]['waiting'], 'output buffer busy')
        self.assertIsInstance(ctx.exception, ConstraintViolation)

    def test_model_mismatch(self):
        with self.assertRaises(ConfigError):
            simulate_nn_pipeline(quantized_network(2, 1, 8), PEAK, white_seq(50))
        with self.assertRaises(DataError):
            simulate_nn_pipeline(quantized_network(2, 1, 8), EQUI, white_seq(2))


class PolySimulatorTests(SimpleTestCase):

    def assertBitExact(self, qm, cfg, x):
        out, report = simulate_poly(qm, cfg, x)
        re, im = apply_poly_fxp(qm, *quantize_input(x, qm.fmt, qm.input_shift), lanes=cfg.N_CPE)
        expected = dequantize_array(re, qm.fmt) + 1j * dequantize_array(im, qm.fmt)
        np.testing.assert_array_equal(out.samples, expected)
        self.assertEqual(out.valid_from, qm.L - 1)
        return report

    def test_preset(self):
        report = self.assertBitExact(quantized_poly(7, 3), POLY, white_seq(1002, seed=11, scale=1.5))
        self.assertEqual(report.simulated_latency, 8)
        self.assertEqual(report.simulated_throughput, Fraction(1, 7))
        self.assertEqual(report.simulated_ops, {'n_add': Fraction(418), 'n_mul': Fraction(180),
                                                'n_mul_bf': Fraction(9)})

    def test_closed_form_cases(self):
        cases = (
            (PolyHwConfig(P=7, L=1, N_CPE=5, N_CPE_BF=3), 10, Fraction(1, 9)),
            (PolyHwConfig(P=7, L=3, N_CPE=60, N_CPE_BF=3), 7, Fraction(1, 6)),
            (PolyHwConfig(P=7, L=3, N_CPE=4, N_CPE_BF=4), 16, Fraction(1, 15)),
            (PolyHwConfig(P=1, L=3, N_CPE=6, N_CPE_BF=1), 2, Fraction(1)),
        )
        for seed, (cfg, latency, throughput) in enumerate(cases):
            report = self.assertBitExact(quantized_poly(cfg.P, cfg.L, seed=seed), cfg, white_seq(60, seed=seed))
            self.assertEqual(report.simulated_latency, latency)
            self.assertEqual(report.simulated_throughput, throughput)
            self.assertEqual(report.latency, latency)

    def test_zero_model(self):
        qm = quantize_poly(PolyModel.zeros(5, 2), POLY_FORMAT)
        out, _ = simulate_poly(qm, PolyHwConfig(P=5, L=2, N_CPE=3, N_CPE_BF=2), white_seq(40))
        self.assertFalse(np.any(out.samples))

    def test_schedule_runs_buffered_terms_first(self):
        sim = PolySimulator(quantized_poly(7, 3), POLY)
        sim.run(white_seq(20))
        frame = sim.schedule_frame()
        self.assertEqual(len(frame), 60)
        fresh = frame[frame['l'] == 0]
        self.assertEqual(len(fresh), 20)
        self.assertTrue((fresh['cycle'] >= 5).all())
        self.assertTrue((frame[frame['l'] > 0]['cycle'] < 4).all())

    def test_mismatch(self):
        with self.assertRaises(ConfigError):
            simulate_poly(quantized_poly(5, 3), POLY, white_seq(50))
        with self.assertRaises(DataError):
            simulate_poly(quantized_poly(7, 3), POLY, white_seq(3))
