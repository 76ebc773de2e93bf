"""
Training/test datasets built from the synthetic transmitter, and their
on-disk container.

Container layout (little-endian)::

    offset  size  field
    0       4     magic b"SICD"
    4       2     version (u16)
    6       2     flags (u16, bit 0: noiseless SI block present)
    8       8     n_samples (u64)
    16      8     split_index (u64)
    24      8     sample_rate_hz (f64)
    32      24    x mean re, x mean im, x variance (f64)
    56      24    residual mean re, residual mean im, residual variance (f64)
    80      4     residual_taps (u32)
    84      4     reserved
    88      ...   x, y[, y_si] as interleaved (re, im) f64 blocks

A JSON sidecar (``<file>.json``) mirrors the header plus generation metadata.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from sic.errors import ConfigError, DataError

from .signals import ComplexSeq, TxChainConfig, gen_ofdm_qpsk, papr_db, run_tx_chain

logger = logging.getLogger(__name__)

MAGIC = b'SICD'
FORMAT_VERSION = 1
FLAG_NOISELESS = 0x1
HEADER = struct.Struct('<4sHHQQd3d3dII')

MIN_SAMPLES = 512
DEFAULT_SPLIT_FRACTION = 0.9


class DatasetFormatError(DataError):
    """Malformed dataset file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class WaveformConfig:
    n_carriers: int = 2048
    oversample: int = 4
    bandwidth_hz: float = 20e6

    @property
    def symbol_length(self) -> int:
        return self.n_carriers * self.oversample


@dataclass(frozen=True)
class NormStats:
    """Training-portion statistics of x and of the non-linear residual target."""

    x_mean: complex
    x_var: float
    ynl_mean: complex
    ynl_var: float
    residual_taps: int

    def __post_init__(self):
        if not (self.x_var > 0 and self.ynl_var > 0):
            raise DataError(f"normalisation variances must be positive, got x={self.x_var}, y_nl={self.ynl_var}")


@dataclass
class Dataset:
    x: ComplexSeq
    y: ComplexSeq
    split_index: int
    norm_stats: NormStats
    y_si: Optional[ComplexSeq] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise DataError(f"x has {len(self.x)} samples but y has {len(self.y)}")
        if self.y_si is not None and len(self.y_si) != len(self.x):
            raise DataError("noiseless SI block length differs from x")
        if not 0 < self.split_index < len(self.x):
            raise DataError(f"split_index {self.split_index} outside (0, {len(self.x)})")

    def __len__(self):
        return len(self.x)

    @property
    def sample_rate_hz(self) -> float:
        return self.x.sample_rate_hz

    @property
    def x_train(self) -> ComplexSeq:
        return self.x.segment(0, self.split_index)

    @property
    def y_train(self) -> ComplexSeq:
        return self.y.segment(0, self.split_index)

    @property
    def x_test(self) -> ComplexSeq:
        return self.x.segment(self.split_index)

    @property
    def y_test(self) -> ComplexSeq:
        return self.y.segment(self.split_index)

    def normalize_x(self, seq: ComplexSeq) -> ComplexSeq:
        """Apply the training-set normalisers (used for the test set too)."""
        stats = self.norm_stats
        return seq.like((seq.samples - stats.x_mean) / math.sqrt(stats.x_var))

    def header(self) -> dict:
        stats = self.norm_stats
        return {
            'version': FORMAT_VERSION,
            'n_samples': len(self),
            'split_index': self.split_index,
            'sample_rate_hz': self.sample_rate_hz,
            'has_noiseless': self.y_si is not None,
            'norm_stats': {
                'x_mean': [stats.x_mean.real, stats.x_mean.imag],
                'x_var': stats.x_var,
                'ynl_mean': [stats.ynl_mean.real, stats.ynl_mean.imag],
                'ynl_var': stats.ynl_var,
                'residual_taps': stats.residual_taps,
            },
        }


def _mean_var(samples: np.ndarray):
    mean = complex(np.mean(samples))
    return mean, float(np.mean(np.abs(samples - mean) ** 2))


def compute_norm_stats(x: ComplexSeq, y: ComplexSeq, residual_taps: int) -> NormStats:
    """Statistics of x and of y minus its best linear fit from x (residual_taps taps)."""
    # Imported here: lincanc builds on this app's signal types.
    from lincanc.canceller import apply_linear, fit_linear

    x_mean, x_var = _mean_var(x.samples)
    lin = fit_linear(x, y, residual_taps)
    y_hat = apply_linear(lin, x)
    y_nl = y.samples[y_hat.valid_from:] - y_hat.valid
    ynl_mean, ynl_var = _mean_var(y_nl)
    return NormStats(x_mean, x_var, ynl_mean, ynl_var, residual_taps)


def make_dataset(cfg: TxChainConfig, n_samples: int, waveform: Optional[WaveformConfig] = None,
                 split_fraction: float = DEFAULT_SPLIT_FRACTION, residual_taps: int = 4) -> Dataset:
    """Generate x and y, split them, and compute normalisers on the training part only."""
    if n_samples < MIN_SAMPLES:
        raise ConfigError(f"n_samples must be >= {MIN_SAMPLES}, got {n_samples}")
    if not 0 < split_fraction < 1:
        raise ConfigError(f"split_fraction must be in (0, 1), got {split_fraction}")
    waveform = waveform or WaveformConfig()

    n_symbols = math.ceil(n_samples / waveform.symbol_length)
    x = gen_ofdm_qpsk(waveform.n_carriers, n_symbols, waveform.oversample, cfg.seed, waveform.bandwidth_hz)
    x = x.segment(0, n_samples)
    chain = run_tx_chain(x, cfg)
    split_index = math.floor(split_fraction * n_samples)

    stats = compute_norm_stats(x.segment(0, split_index), chain.noisy.segment(0, split_index), residual_taps)
    noise_power = float(np.mean(np.abs(chain.noise) ** 2))
    si_power = chain.noiseless.power()
    metadata = {
        'seed': cfg.seed,
        'n_carriers': waveform.n_carriers,
        'oversample': waveform.oversample,
        'papr_db': papr_db(x),
        'tx_power': x.power(),
        'si_power': si_power,
        'measured_snr_db': 10 * math.log10(si_power / noise_power) if noise_power > 0 and si_power > 0 else None,
        'image_rejection_db': cfg.image_rejection_db(),
    }
    logger.info(f"Generated dataset: {n_samples} samples, split at {split_index}, PAPR {metadata['papr_db']:.2f} dB")
    return Dataset(x, chain.noisy, split_index, stats, chain.noiseless, metadata)


# ---------------------------------------------------------------------------
# Container I/O
# ---------------------------------------------------------------------------

def _interleave(seq: ComplexSeq) -> bytes:
    block = np.empty(2 * len(seq), dtype='<f8')
    block[0::2] = seq.samples.real
    block[1::2] = seq.samples.imag
    return block.tobytes()


def _deinterleave(buffer: bytes) -> np.ndarray:
    block = np.frombuffer(buffer, dtype='<f8')
    return block[0::2] + 1j * block[1::2]


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.json')


def save_dataset(path, dataset: Dataset, provenance: Optional[dict] = None) -> Path:
    path = Path(path)
    stats = dataset.norm_stats
    flags = FLAG_NOISELESS if dataset.y_si is not None else 0
    header = HEADER.pack(
        MAGIC, FORMAT_VERSION, flags, len(dataset), dataset.split_index, dataset.sample_rate_hz,
        stats.x_mean.real, stats.x_mean.imag, stats.x_var,
        stats.ynl_mean.real, stats.ynl_mean.imag, stats.ynl_var,
        stats.residual_taps, 0,
    )
    blocks = [dataset.x, dataset.y] + ([dataset.y_si] if dataset.y_si is not None else [])
    with open(path, 'wb') as fh:
        fh.write(header)
        for block in blocks:
            fh.write(_interleave(block))

    sidecar = dataset.header()
    sidecar['metadata'] = dataset.metadata
    if provenance is not None:
        sidecar['provenance'] = provenance
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + '\n')
    logger.debug(f"Saved dataset to {path}")
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise DatasetFormatError(f"truncated header: {len(data)} of {HEADER.size} bytes", len(data))

    (magic, version, flags, n_samples, split_index, sample_rate,
     xm_re, xm_im, x_var, ym_re, ym_im, y_var, residual_taps, _) = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version} (expected {FORMAT_VERSION})", 4)
    if flags & ~FLAG_NOISELESS:
        raise DatasetFormatError(f"unknown flags 0x{flags:04x}", 6)

    n_blocks = 3 if flags & FLAG_NOISELESS else 2
    block_size = 16 * n_samples
    expected = HEADER.size + n_blocks * block_size
    if len(data) < expected:
        raise DatasetFormatError(f"truncated payload: {len(data)} of {expected} bytes", len(data))
    if len(data) > expected:
        raise DatasetFormatError(f"{len(data) - expected} trailing bytes after payload", expected)

    blocks = []
    for index in range(n_blocks):
        start = HEADER.size + index * block_size
        samples = _deinterleave(data[start:start + block_size])
        if not np.all(np.isfinite(samples)):
            bad = int(np.flatnonzero(~np.isfinite(samples))[0])
            raise DatasetFormatError("non-finite sample", start + 16 * bad)
        blocks.append(ComplexSeq(samples, sample_rate))

    metadata = {}
    sidecar = sidecar_path(path)
    if sidecar.exists():
        metadata = json.loads(sidecar.read_text()).get('metadata', {})

    stats = NormStats(complex(xm_re, xm_im), x_var, complex(ym_re, ym_im), y_var, residual_taps)
    return Dataset(blocks[0], blocks[1], split_index, stats, blocks[2] if n_blocks == 3 else None, metadata)
