"""
Cancellation ratio and power spectral density.
"""

import logging
import math
from typing import Tuple

import numpy as np
import pandas as pd
from scipy import signal

from sic.errors import ConfigError, DataError
from sigmodel.signals import ComplexSeq

logger = logging.getLogger(__name__)


def common_support(*seqs: ComplexSeq) -> int:
    """First index at which every sequence is valid."""
    return max(seq.valid_from for seq in seqs)


def c_db(y_si: ComplexSeq, y_hat: ComplexSeq) -> float:
    """10 log10(sum |y_si|^2 / sum |y_si - y_hat|^2) over the shared valid region.

    Perfect cancellation returns ``math.inf``.
    """
    if len(y_si) != len(y_hat):
        raise DataError(f"y_si has {len(y_si)} samples but y_hat has {len(y_hat)}")
    start = common_support(y_si, y_hat)
    reference = y_si.samples[start:]
    signal_power = float(np.sum(np.abs(reference) ** 2))
    if signal_power == 0.0:
        raise DataError("C_dB is undefined for an all-zero SI signal")
    residual_power = float(np.sum(np.abs(reference - y_hat.samples[start:]) ** 2))
    if residual_power == 0.0:
        return math.inf
    return 10 * math.log10(signal_power / residual_power)


def psd(x: ComplexSeq, nfft: int = 1024, overlap: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Two-sided Welch estimate with a Hann window.

    Returns ascending frequencies (Hz) and the power per bin in dB; the
    linear bin powers sum to the mean power of ``x``. Empty bins are ``-inf``.
    """
    if nfft < 2 or nfft & (nfft - 1):
        raise ConfigError(f"nfft must be a power of two, got {nfft}")
    if not 0 <= overlap < 1:
        raise ConfigError(f"overlap must be in [0, 1), got {overlap}")
    samples = x.valid
    if samples.size < nfft:
        raise DataError(f"PSD needs at least {nfft} samples, got {samples.size}")

    freqs, density = signal.welch(
        samples,
        fs=x.sample_rate_hz,
        window='hann',
        nperseg=nfft,
        noverlap=int(nfft * overlap),
        detrend=False,
        return_onesided=False,
        scaling='density',
    )
    bin_power = density * (x.sample_rate_hz / nfft)
    with np.errstate(divide='ignore'):
        psd_db = 10 * np.log10(bin_power)
    return np.fft.fftshift(freqs), np.fft.fftshift(psd_db)


def psd_frame(curves: dict, nfft: int = 1024, overlap: float = 0.5) -> pd.DataFrame:
    """One ``freq_hz`` column plus one ``psd_db`` column per named curve."""
    frame = None
    for name, seq in curves.items():
        freqs, values = psd(seq, nfft, overlap)
        if frame is None:
            frame = pd.DataFrame({'freq_hz': freqs})
        frame[name] = values
    if frame is None:
        raise DataError("no PSD curves given")
    return frame
