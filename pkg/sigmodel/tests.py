import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from sic.errors import ConfigError, DataError

from .datasets import (
    HEADER,
    Dataset,
    DatasetFormatError,
    WaveformConfig,
    load_dataset,
    make_dataset,
    save_dataset,
    sidecar_path,
)
from .signals import (
    ComplexSeq,
    TxChainConfig,
    apply_tx_chain,
    gen_ofdm_qpsk,
    papr_db,
    run_tx_chain,
)

SMALL_WAVEFORM = WaveformConfig(n_carriers=64, oversample=4)

IMPAIRED_CHAIN = TxChainConfig(
    pa_coeffs={(1, 0): 1.0, (3, 0): -0.025 + 0.003j, (3, 1): 0.004, (5, 0): 0.002},
    si_channel=(0.95 * np.exp(0.3j), 0.2 * np.exp(-1.1j)),
    iq_gain_mismatch=0.08,
    iq_phase_mismatch=0.075,
    snr_db=35.0,
    seed=3,
)


def white_seq(n, seed=0):
    rng = np.random.default_rng(seed)
    return ComplexSeq((rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2))


class ComplexSeqTests(SimpleTestCase):

    def test_rejects_empty_and_non_finite(self):
        with self.assertRaises(DataError):
            ComplexSeq([])
        with self.assertRaises(DataError):
            ComplexSeq([1.0, np.nan])

    def test_valid_region(self):
        seq = ComplexSeq([1, 2, 3, 4], valid_from=2)
        np.testing.assert_array_equal(seq.valid, [3, 4])
        self.assertEqual(seq.power(), 12.5)


class OfdmTests(SimpleTestCase):

    def test_symbol_length_is_ifft_size(self):
        x = gen_ofdm_qpsk(2048, 1, 4, seed=1)
        self.assertEqual(len(x), 8192)
        self.assertEqual(x.sample_rate_hz, 80e6)

    def test_unit_mean_power(self):
        x = gen_ofdm_qpsk(64, 120, 4, seed=2)
        self.assertAlmostEqual(x.power(), 1.0, delta=0.01)

    def test_deterministic_under_seed(self):
        a = gen_ofdm_qpsk(128, 5, 2, seed=9)
        b = gen_ofdm_qpsk(128, 5, 2, seed=9)
        np.testing.assert_array_equal(a.samples, b.samples)
        c = gen_ofdm_qpsk(128, 5, 2, seed=10)
        self.assertFalse(np.array_equal(a.samples, c.samples))

    def test_symbols_generated_independently(self):
        long = gen_ofdm_qpsk(64, 4, 2, seed=5)
        short = gen_ofdm_qpsk(64, 2, 2, seed=5)
        np.testing.assert_array_equal(long.samples[:256], short.samples)

    def test_only_data_band_occupied(self):
        x = gen_ofdm_qpsk(64, 1, 4, seed=3)
        spectrum = np.abs(np.fft.fft(x.samples))
        self.assertLess(spectrum[32:-32].max(), 1e-9)
        np.testing.assert_allclose(spectrum[:32], 32.0, rtol=1e-9)

    def test_invalid_sizes(self):
        for args in [(100, 1, 4), (64, 1, 0), (64, 0, 1)]:
            with self.assertRaises(ConfigError):
                gen_ofdm_qpsk(*args, seed=0)


class TxChainTests(SimpleTestCase):

    def test_identity_chain(self):
        x = white_seq(1000)
        y = apply_tx_chain(x, TxChainConfig())
        np.testing.assert_array_equal(y.samples, x.samples)
        self.assertEqual(y.power(), x.power())

    def test_null_signal_path_leaves_noise_only(self):
        x = white_seq(4000)
        out = run_tx_chain(x, TxChainConfig(pa_coeffs={(1, 0): 0.0}, snr_db=20.0, seed=4))
        self.assertFalse(np.any(out.noiseless.samples))
        np.testing.assert_array_equal(out.noisy.samples, out.noise)
        self.assertGreater(out.noisy.power(), 0.0)

    def test_third_order_pointwise(self):
        x = white_seq(500, seed=1)
        c = -0.03 + 0.01j
        y = apply_tx_chain(x, TxChainConfig(pa_coeffs={(1, 0): 0.0, (3, 0): c}))
        np.testing.assert_array_equal(y.samples, c * x.samples * np.abs(x.samples) ** 2)

    def test_pa_memory_tap_delays(self):
        x = white_seq(50, seed=2)
        y = apply_tx_chain(x, TxChainConfig(pa_coeffs={(1, 0): 0.0, (1, 1): 1.0}))
        self.assertEqual(y.samples[0], 0)
        np.testing.assert_array_equal(y.samples[1:], x.samples[:-1])

    def test_noise_power_matches_snr(self):
        x = gen_ofdm_qpsk(64, 80, 4, seed=6)
        out = run_tx_chain(x, IMPAIRED_CHAIN)
        measured = 10 * np.log10(out.noiseless.power() / np.mean(np.abs(out.noise) ** 2))
        self.assertAlmostEqual(measured, 35.0, delta=0.3)

    def test_image_rejection_of_default_mismatch(self):
        self.assertTrue(-26.0 < IMPAIRED_CHAIN.image_rejection_db() < -24.0)
        self.assertEqual(TxChainConfig().iq_coefficients, (1 + 0j, 0j))

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            TxChainConfig(pa_coeffs={(1, 0): 1.0, (2, 0): 0.1})
        with self.assertRaises(ConfigError):
            TxChainConfig(pa_coeffs={(3, 0): 1.0})
        with self.assertRaises(ConfigError):
            TxChainConfig(si_channel=())


class DatasetTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = make_dataset(IMPAIRED_CHAIN, 20480)

    def test_split_arithmetic(self):
        self.assertEqual(self.dataset.split_index, 18432)
        self.assertEqual(len(self.dataset.x_train), 18432)
        self.assertEqual(len(self.dataset.x_test), 2048)

    def test_train_normalisation(self):
        z = self.dataset.normalize_x(self.dataset.x_train).samples
        self.assertLess(abs(np.mean(z)), 0.01)
        self.assertTrue(0.98 <= np.mean(np.abs(z) ** 2) <= 1.02)
        self.assertAlmostEqual(np.mean(z.real ** 2), 0.5, delta=0.02)

    def test_test_set_uses_train_normalisers(self):
        stats = self.dataset.norm_stats
        z = self.dataset.normalize_x(self.dataset.x_test).samples
        np.testing.assert_array_equal(z, (self.dataset.x_test.samples - stats.x_mean) / np.sqrt(stats.x_var))

    def test_residual_statistics_positive(self):
        self.assertGreater(self.dataset.norm_stats.ynl_var, 0)
        self.assertLess(self.dataset.norm_stats.ynl_var, self.dataset.y.power())

    def test_papr_reported(self):
        self.assertTrue(9.0 <= self.dataset.metadata['papr_db'] <= 15.0)
        self.assertEqual(self.dataset.metadata['papr_db'], papr_db(self.dataset.x))

    def test_deterministic(self):
        again = make_dataset(IMPAIRED_CHAIN, 20480)
        np.testing.assert_array_equal(again.y.samples, self.dataset.y.samples)

    def test_minimum_size(self):
        with self.assertRaises(ConfigError):
            make_dataset(IMPAIRED_CHAIN, 100)

    def test_length_mismatch_rejected(self):
        d = self.dataset
        with self.assertRaises(DataError):
            Dataset(d.x, d.y.segment(0, 100), d.split_index, d.norm_stats)


class DatasetFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / 'si.sicd'
        self.dataset = make_dataset(IMPAIRED_CHAIN, 2048, waveform=SMALL_WAVEFORM)
        save_dataset(self.path, self.dataset, provenance={'config_sha256': 'abc'})

    def test_round_trip_bitwise(self):
        loaded = load_dataset(self.path)
        for name in ('x', 'y', 'y_si'):
            np.testing.assert_array_equal(getattr(loaded, name).samples, getattr(self.dataset, name).samples)
        self.assertEqual(loaded.split_index, self.dataset.split_index)
        self.assertEqual(loaded.norm_stats, self.dataset.norm_stats)
        self.assertEqual(loaded.sample_rate_hz, self.dataset.sample_rate_hz)

    def test_sidecar_mirrors_header(self):
        sidecar = json.loads(sidecar_path(self.path).read_text())
        self.assertEqual(sidecar['n_samples'], 2048)
        self.assertEqual(sidecar['split_index'], self.dataset.split_index)
        self.assertTrue(sidecar['has_noiseless'])
        self.assertEqual(sidecar['provenance'], {'config_sha256': 'abc'})

    def test_truncated_payload(self):
        data = self.path.read_bytes()
        self.path.write_bytes(data[:-10])
        with self.assertRaises(DatasetFormatError) as ctx:
            load_dataset(self.path)
        self.assertEqual(ctx.exception.offset, len(data) - 10)

    def test_truncated_header(self):
        self.path.write_bytes(self.path.read_bytes()[:20])
        with self.assertRaises(DatasetFormatError) as ctx:
            load_dataset(self.path)
        self.assertEqual(ctx.exception.offset, 20)

    def test_version_mismatch(self):
        data = bytearray(self.path.read_bytes())
        data[4:6] = (7).to_bytes(2, 'little')
        self.path.write_bytes(bytes(data))
        with self.assertRaisesMessage(DatasetFormatError, 'unsupported dataset version 7'):
            load_dataset(self.path)

    def test_bad_magic(self):
        data = bytearray(self.path.read_bytes())
        data[:4] = b'XXXX'
        self.path.write_bytes(bytes(data))
        with self.assertRaises(DatasetFormatError) as ctx:
            load_dataset(self.path)
        self.assertEqual(ctx.exception.offset, 0)

    def test_header_size(self):
        self.assertEqual(HEADER.size, 88)
