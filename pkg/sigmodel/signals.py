"""
Synthetic full-duplex transmitter: OFDM/QPSK source and the TX impairment
chain (IQ imbalance, memory-polynomial PA, SI channel, thermal noise).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from sic.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

# Independent random streams derived from the master seed.
STREAM_SYMBOLS = 1
STREAM_NOISE = 2


def random_stream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Counter-based stream: Philox keyed by (stream, seed), jumped ``index`` times."""
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    key = (stream << 64) | (seed & 0xFFFFFFFFFFFFFFFF)
    bit_generator = np.random.Philox(key=key)
    if index:
        bit_generator = bit_generator.jumped(index)
    return np.random.Generator(bit_generator)


@dataclass(frozen=True)
class ComplexSeq:
    """Complex baseband samples; indices before ``valid_from`` carry no valid output."""

    samples: np.ndarray
    sample_rate_hz: float = 1.0
    valid_from: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128).reshape(-1)
        if samples.size < 1:
            raise DataError("a sequence needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise DataError("sequence contains non-finite samples")
        if not 0 <= self.valid_from <= samples.size:
            raise DataError(f"valid_from {self.valid_from} outside [0, {samples.size}]")
        object.__setattr__(self, 'samples', samples)

    def __len__(self):
        return self.samples.size

    @property
    def valid(self) -> np.ndarray:
        return self.samples[self.valid_from:]

    def power(self) -> float:
        return float(np.mean(np.abs(self.valid) ** 2))

    def like(self, samples, valid_from: Optional[int] = None) -> 'ComplexSeq':
        """New sequence with this one's sample rate."""
        return ComplexSeq(samples, self.sample_rate_hz, self.valid_from if valid_from is None else valid_from)

    def segment(self, start: int, stop: Optional[int] = None) -> 'ComplexSeq':
        return ComplexSeq(self.samples[start:stop], self.sample_rate_hz)


def papr_db(seq: ComplexSeq) -> float:
    power = np.abs(seq.valid) ** 2
    return float(10 * np.log10(power.max() / power.mean()))


def gen_ofdm_qpsk(n_carriers: int, n_symbols: int, oversample: int, seed: int,
                  bandwidth_hz: float = 20e6) -> ComplexSeq:
    """Unit-power QPSK/OFDM baseband, oversampled by zero padding in frequency.

    All carriers carry data and no cyclic prefix is inserted; each symbol has
    its own random stream so symbols can be generated independently.
    """
    if n_carriers < 2 or n_carriers & (n_carriers - 1):
        raise ConfigError(f"n_carriers must be a power of two, got {n_carriers}")
    if oversample < 1:
        raise ConfigError(f"oversample must be >= 1, got {oversample}")
    if n_symbols < 1:
        raise ConfigError(f"n_symbols must be >= 1, got {n_symbols}")

    fft_size = n_carriers * oversample
    half = n_carriers // 2
    symbols = []
    for index in range(n_symbols):
        rng = random_stream(seed, STREAM_SYMBOLS, index)
        qpsk = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, n_carriers)))
        spectrum = np.zeros(fft_size, dtype=np.complex128)
        spectrum[:half] = qpsk[:half]
        spectrum[-half:] = qpsk[half:]
        # Parseval: this scaling gives every symbol a mean power of exactly one.
        symbols.append(np.fft.ifft(spectrum) * fft_size / math.sqrt(n_carriers))
    return ComplexSeq(np.concatenate(symbols), sample_rate_hz=bandwidth_hz * oversample)


@dataclass(frozen=True)
class TxChainConfig:
    """Impairments of the synthetic transmitter and SI path.

    ``pa_coeffs`` maps (odd order p, memory tap l) to the complex coefficient of
    ``x[n-l] |x[n-l]|^(p-1)``. ``snr_db=None`` disables thermal noise.
    """

    pa_coeffs: Dict[Tuple[int, int], complex] = field(default_factory=lambda: {(1, 0): 1.0})
    si_channel: Tuple[complex, ...] = (1.0,)
    iq_gain_mismatch: float = 0.0
    iq_phase_mismatch: float = 0.0
    snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if (1, 0) not in self.pa_coeffs:
            raise ConfigError("pa_coeffs needs a (p=1, l=0) term")
        for p, l in self.pa_coeffs:
            if p < 1 or p % 2 == 0 or l < 0:
                raise ConfigError(f"invalid PA term (p={p}, l={l}): p must be odd and l >= 0")
        if len(self.si_channel) == 0:
            raise ConfigError("si_channel needs at least one tap")
        object.__setattr__(self, 'si_channel', tuple(complex(h) for h in self.si_channel))
        object.__setattr__(self, 'pa_coeffs', {k: complex(v) for k, v in self.pa_coeffs.items()})

    @property
    def pa_order(self) -> int:
        return max(p for p, _ in self.pa_coeffs)

    @property
    def pa_memory(self) -> int:
        return 1 + max(l for _, l in self.pa_coeffs)

    @property
    def iq_coefficients(self) -> Tuple[complex, complex]:
        """(K1, K2) of x_iq = K1 x + K2 x*; (1, 0) without mismatch."""
        g = 1.0 + self.iq_gain_mismatch
        phi = self.iq_phase_mismatch
        k1 = (1 + g * np.exp(-1j * phi)) / 2
        k2 = (1 - g * np.exp(1j * phi)) / 2
        return complex(k1), complex(k2)

    def image_rejection_db(self) -> float:
        k1, k2 = self.iq_coefficients
        if k2 == 0:
            return float('-inf')
        return float(10 * np.log10(abs(k2) ** 2 / abs(k1) ** 2))

    def with_seed(self, seed: int) -> 'TxChainConfig':
        return replace(self, seed=seed)


@dataclass(frozen=True)
class TxChainOutput:
    noisy: ComplexSeq
    noiseless: ComplexSeq

    @property
    def noise(self) -> np.ndarray:
        return self.noisy.samples - self.noiseless.samples


def _delay(samples: np.ndarray, lag: int) -> np.ndarray:
    if lag == 0:
        return samples
    out = np.zeros_like(samples)
    out[lag:] = samples[:-lag] if lag < samples.size else 0
    return out


def run_tx_chain(x: ComplexSeq, cfg: TxChainConfig) -> TxChainOutput:
    """Pass ``x`` through IQ imbalance, the memory-polynomial PA, the SI channel and AWGN."""
    k1, k2 = cfg.iq_coefficients
    x_iq = k1 * x.samples + k2 * np.conj(x.samples)

    pa_out = np.zeros_like(x_iq)
    for (p, lag), coeff in sorted(cfg.pa_coeffs.items()):
        if coeff == 0:
            continue
        delayed = _delay(x_iq, lag)
        pa_out += coeff * delayed * np.abs(delayed) ** (p - 1)

    y_si = np.zeros_like(pa_out)
    for lag, tap in enumerate(cfg.si_channel):
        y_si += tap * _delay(pa_out, lag)

    noiseless = x.like(y_si)
    if cfg.snr_db is None:
        return TxChainOutput(noiseless, noiseless)

    reference = float(np.mean(np.abs(y_si) ** 2))
    if reference == 0.0:
        # Null signal path: keep the noise floor relative to the transmit power.
        reference = x.power()
    sigma2 = reference * 10 ** (-cfg.snr_db / 10)
    rng = random_stream(cfg.seed, STREAM_NOISE)
    noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(y_si.size) + 1j * rng.standard_normal(y_si.size))
    logger.debug(f"TX chain: SI power {reference:.4g}, noise power {sigma2:.4g}")
    return TxChainOutput(x.like(y_si + noise), noiseless)


def apply_tx_chain(x: ComplexSeq, cfg: TxChainConfig) -> ComplexSeq:
    return run_tx_chain(x, cfg).noisy
