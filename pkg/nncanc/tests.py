import json

import numpy as np
from django.test import SimpleTestCase

from fxp.arithmetic import FxpFormat, OpCounter, quantize
from lincanc.canceller import LinModel, apply_linear
from metrics.cancellation import c_db
from sic.errors import ConfigError, DataError
from sigmodel.datasets import WaveformConfig, make_dataset
from sigmodel.signals import ComplexSeq, TxChainConfig

from .network import (
    NNModel,
    denormalize,
    glorot_uniform,
    layer_sizes,
    loss_and_gradients,
    mse,
    nn_forward,
    nn_forward_fxp,
    nn_window_fxp,
    normalize_input,
    power_of_two_shift,
    predict_nn,
    predict_nn_fxp,
    quantize_nn,
    quantized_windows,
    windows,
)
from .serializers import NNModelSerializer
from .training import TrainConfig, TrainingDivergedError, TrainingHistory, checkpoint_mse, train

NONLINEAR_CHAIN = TxChainConfig(
    pa_coeffs={(1, 0): 1.0, (3, 0): -0.03 + 0.004j, (3, 1): 0.005, (5, 0): 0.002},
    si_channel=(0.95 * np.exp(0.3j), 0.2 * np.exp(-1.1j)),
    iq_gain_mismatch=0.08, iq_phase_mismatch=0.075, snr_db=40.0, seed=21,
)


def random_model(L=2, N_l=1, N_h=8, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    weights, biases = glorot_uniform(layer_sizes(L, N_l, N_h), rng)
    biases = [0.1 * rng.standard_normal(b.shape) for b in biases]
    lin = LinModel(rng.standard_normal(L) + 1j * rng.standard_normal(L))
    return NNModel(L, N_l, N_h, weights, biases, lin, **kwargs)


def white_seq(n, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexSeq((rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2))


class ForwardTests(SimpleTestCase):

    def test_layer_sizes(self):
        self.assertEqual(layer_sizes(2, 1, 8), [4, 8, 2])
        self.assertEqual(layer_sizes(4, 3, 5), [8, 5, 5, 5, 2])
        with self.assertRaises(ConfigError):
            layer_sizes(0, 1, 8)

    def test_null_network(self):
        m = NNModel.zeros(3, 2, 4)
        np.testing.assert_array_equal(nn_forward(m, np.ones(6)), [0.0, 0.0])

    def test_hand_worked_single_neuron(self):
        m = NNModel(1, 1, 1, [[[1.0, -2.0]], [[2.0], [-1.0]]], [[0.5], [0.25, 0.0]], LinModel([0.0]))
        np.testing.assert_array_equal(nn_forward(m, [2.0, 0.5]), [3.25, -1.5])
        # Negative pre-activation is clipped by the ReLU.
        np.testing.assert_array_equal(nn_forward(m, [0.25, 0.5]), [0.25, 0.0])

    def test_shape_errors(self):
        m = NNModel.zeros(2, 1, 3)
        with self.assertRaises(DataError):
            nn_forward(m, np.ones(5))
        with self.assertRaises(DataError):
            NNModel(2, 1, 3, m.weights[:1], m.biases, m.lin)
        with self.assertRaises(DataError):
            NNModel.zeros(2, 1, 3, lin=LinModel([1.0, 0.0, 0.0]))

    def test_window_layout(self):
        x = np.array([1 + 2j, 3 + 4j, 5 + 6j])
        np.testing.assert_array_equal(windows(x.real, x.imag, 2), [[3, 4, 1, 2], [5, 6, 3, 4]])

    def test_op_counts_equi_size(self):
        qm = quantize_nn(NNModel.zeros(2, 1, 8), FxpFormat(16, 12))
        for lanes, linear_lanes in [((1, 1), 1), ((4, 2), 2)]:
            counter = OpCounter()
            predict_nn_fxp(qm, white_seq(11), lanes, linear_lanes, counter)
            self.assertEqual(counter.as_tuple(), (54 * 10, 70 * 10))

    def test_hybrid_is_literal_recomposition(self):
        m = random_model(L=3, N_l=2, N_h=5, seed=1, denorm_shift=(-3, -4), denorm_mean=0.01 - 0.02j,
                         input_mean=0.1j, input_scale=0.9)
        x = white_seq(200, seed=2)
        xn = normalize_input(m, x.samples)
        expected = apply_linear(m.lin, x).valid + denormalize(m, nn_forward(m, windows(xn.real, xn.imag, 3)))
        y = predict_nn(m, x)
        self.assertEqual(y.valid_from, 2)
        np.testing.assert_array_equal(y.valid, expected)

    def test_power_of_two_shift(self):
        self.assertEqual(power_of_two_shift(np.sqrt(0.5)), 0)
        self.assertEqual(power_of_two_shift(0.05), -4)
        self.assertEqual(power_of_two_shift(0.0), -32)


class GradientTests(SimpleTestCase):

    def test_matches_central_differences(self):
        rng = np.random.default_rng(3)
        m = random_model(L=2, N_l=2, N_h=5, seed=4)
        inputs = rng.standard_normal((7, 4))
        targets = rng.standard_normal((7, 2))
        _, grad_w, grad_b = loss_and_gradients(m.weights, m.biases, inputs, targets)
        step = 1e-6
        for params, grads in ((m.weights, grad_w), (m.biases, grad_b)):
            for param, grad in zip(params, grads):
                numeric = np.zeros_like(param)
                for index in np.ndindex(param.shape):
                    original = param[index]
                    param[index] = original + step
                    up = mse(m.weights, m.biases, inputs, targets)
                    param[index] = original - step
                    down = mse(m.weights, m.biases, inputs, targets)
                    param[index] = original
                    numeric[index] = (up - down) / (2 * step)
                error = np.linalg.norm(numeric - grad) / max(np.linalg.norm(grad), 1e-12)
                self.assertLess(error, 1e-5)


class TrainingTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = make_dataset(NONLINEAR_CHAIN, 8192)
        cls.history = TrainingHistory()
        cls.model = train(cls.dataset, 2, 1, 8, TrainConfig(epochs=8, seed=5, keep_checkpoints=True), cls.history)

    def test_beats_linear_only(self):
        x, y = self.dataset.x_test, self.dataset.y_test
        linear_db = c_db(y, apply_linear(self.model.lin, x))
        self.assertGreater(c_db(y, predict_nn(self.model, x)), linear_db + 1.0)

    def test_history_columns_and_checkpoints(self):
        frame = self.history.frame()
        self.assertEqual(list(frame.columns), ['epoch', 'train_mse', 'test_mse', 'c_db_total'])
        self.assertEqual(list(frame['epoch']), list(range(1, 9)))
        for row, checkpoint in zip(self.history.rows, self.history.checkpoints):
            recomputed = checkpoint_mse(self.model, checkpoint, self.dataset.x_train, self.dataset.y_train)
            self.assertEqual(recomputed, row['train_mse'])

    def test_deterministic(self):
        again = train(self.dataset, 2, 1, 8, TrainConfig(epochs=8, seed=5))
        for a, b in zip(again.weights, self.model.weights):
            np.testing.assert_array_equal(a, b)

    def test_denormalisation_is_power_of_two(self):
        self.assertTrue(all(-32 <= s <= 32 for s in self.model.denorm_shift))
        self.assertLess(self.model.denorm_shift[0], 0)

    def test_fixed_point_close_to_float_at_q16(self):
        x, y = self.dataset.x_test, self.dataset.y_test
        float_db = c_db(y, predict_nn(self.model, x))
        fixed_db = c_db(y, predict_nn_fxp(quantize_nn(self.model, FxpFormat.with_int_bits(16, 4)), x))
        self.assertAlmostEqual(fixed_db, float_db, delta=0.2)

    def test_fixed_point_degrades_at_q4(self):
        x, y = self.dataset.x_test, self.dataset.y_test
        float_db = c_db(y, predict_nn(self.model, x))
        fixed_db = c_db(y, predict_nn_fxp(quantize_nn(self.model, FxpFormat.with_int_bits(4, 4)), x))
        self.assertLess(fixed_db, float_db - 3.0)

    def test_null_residual_gives_negligible_nonlinear_output(self):
        chain = TxChainConfig(si_channel=(0.9, 0.3j), seed=6)
        dataset = make_dataset(chain, 2048, WaveformConfig(n_carriers=64, oversample=4))
        model = train(dataset, 2, 1, 4, TrainConfig(epochs=2, seed=7))
        x = dataset.x_test
        nonlinear = predict_nn(model, x).valid - apply_linear(model.lin, x).valid
        self.assertLess(np.mean(np.abs(nonlinear) ** 2), 1e-4 * x.power())

    def test_divergence_names_epoch(self):
        dataset = make_dataset(NONLINEAR_CHAIN, 1024, WaveformConfig(n_carriers=64, oversample=4))
        with self.assertRaises(TrainingDivergedError) as ctx:
            train(dataset, 2, 1, 4, TrainConfig(epochs=1, learning_rate=1e300))
        self.assertEqual(ctx.exception.epoch, 1)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            TrainConfig(batch_size=0)
        with self.assertRaises(ConfigError):
            TrainConfig(learning_rate=0.0)


class FixedPointNNTests(SimpleTestCase):

    def test_lanes_irrelevant_without_saturation(self):
        fmt = FxpFormat.with_int_bits(20, 8)
        qm = quantize_nn(random_model(L=4, N_l=2, N_h=6, seed=8), fmt)
        raw = quantized_windows(qm, white_seq(300, seed=9))
        np.testing.assert_array_equal(nn_forward_fxp(qm, raw), nn_forward_fxp(qm, raw, lanes=(8, 3, 6)))

    def test_scalar_window_matches_vector_path(self):
        fmt = FxpFormat.with_int_bits(16, 4)
        qm = quantize_nn(random_model(seed=10), fmt)
        window = [0.5, -0.25, 1.0, 0.125]
        re, im = nn_window_fxp(qm, [quantize(v, fmt) for v in window])
        expected = nn_forward_fxp(qm, [quantize(v, fmt).raw for v in window])
        self.assertEqual((re.raw, im.raw), tuple(int(v) for v in expected))

    def test_close_to_float_at_q28(self):
        m = random_model(seed=11, denorm_shift=(-2, -2), denorm_mean=0.01 + 0.02j)
        x = white_seq(500, seed=12)
        fixed = predict_nn_fxp(quantize_nn(m, FxpFormat.with_int_bits(28, 6)), x)
        np.testing.assert_allclose(fixed.valid, predict_nn(m, x).valid, atol=1e-5)

    def test_saturates_instead_of_wrapping(self):
        fmt = FxpFormat.with_int_bits(8, 4)
        m = NNModel(1, 1, 1, [[[4.0, 4.0]], [[4.0], [-4.0]]], [[0.0], [0.0, 0.0]], LinModel([0.0]))
        out = nn_forward_fxp(quantize_nn(m, fmt), quantized_windows(quantize_nn(m, fmt), ComplexSeq([7 + 7j])))
        np.testing.assert_array_equal(out, [[fmt.raw_max, fmt.raw_min]])


class NNSerializerTests(SimpleTestCase):

    def test_lossless_json_round_trip(self):
        m = random_model(L=3, N_l=2, N_h=4, seed=13, denorm_shift=(-5, -4), denorm_mean=1e-3 - 2e-3j)
        loaded = NNModelSerializer.load(json.loads(json.dumps(NNModelSerializer.dump(m))))
        for a, b in zip(loaded.weights + loaded.biases, m.weights + m.biases):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(loaded.lin.taps, m.lin.taps)
        self.assertEqual(loaded.denorm_shift, (-5, -4))
        self.assertEqual(loaded.denorm_mean, m.denorm_mean)

    def test_weights_are_strings(self):
        data = NNModelSerializer.dump(random_model(seed=14))
        self.assertIsInstance(data['weights'][0][0][0], str)

    def test_wrong_shape_rejected(self):
        data = NNModelSerializer.dump(random_model(seed=15))
        data['weights'][0].pop()
        with self.assertRaises(DataError):
            NNModelSerializer.load(data)
        data = NNModelSerializer.dump(random_model(seed=15))
        data['biases'][0][0] = 'not-a-number'
        with self.assertRaises(DataError):
            NNModelSerializer.load(data)
