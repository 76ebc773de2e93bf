"""
Linear SI canceller: an L-tap FIR model of the SI channel estimated by
regularised least squares.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from fxp.arithmetic import FxpFormat, OpCounter, cmul3_raw, mac_reduce, quantize_array
from sic.errors import ConfigError, DataError
from sigmodel.signals import ComplexSeq

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
LINEAR_RIDGE = 1e-9


class IllConditionedError(DataError):
    """Normal equations too close to singular to trust the solution."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


def solve_normal_equations(A: np.ndarray, b: np.ndarray, ridge: float, relative: bool = False,
                           equilibrate: bool = False) -> np.ndarray:
    """Solve ``(A^H A + eps I) h = A^H b``.

    ``eps`` is ``ridge`` or, with ``relative``, ``ridge * trace / n_cols``.
    ``equilibrate`` scales the regressor columns to unit norm first, so the
    ridge acts on every column at its own scale.
    """
    scale = np.ones(A.shape[1])
    if equilibrate:
        norms = np.linalg.norm(A, axis=0)
        scale = 1.0 / np.where(norms > 0, norms, 1.0)
        A = A * scale
    gram = A.conj().T @ A
    trace = float(np.real(np.trace(gram)))
    if not trace > 0:
        raise IllConditionedError("Gram matrix has no energy", float('inf'))
    eps = ridge * trace / gram.shape[0] if relative else ridge
    gram = gram + eps * np.eye(gram.shape[0])
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise IllConditionedError("Gram matrix is rank deficient beyond regularisation", condition)
    solution = scipy.linalg.solve(gram, A.conj().T @ b, assume_a='her')
    logger.debug(f"Solved {gram.shape[0]} normal equations, condition {condition:.3e}")
    return solution * scale


def delay_matrix(samples: np.ndarray, taps: int) -> np.ndarray:
    """Rows ``n = taps-1 .. N-1`` holding ``[s[n], s[n-1], ..., s[n-taps+1]]``."""
    return np.lib.stride_tricks.sliding_window_view(samples, taps)[:, ::-1]


@dataclass(frozen=True)
class LinModel:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128).reshape(-1)
        if taps.size < 1:
            raise ConfigError("a linear model needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise DataError("linear taps must be finite")
        object.__setattr__(self, 'taps', taps)

    @property
    def L(self) -> int:
        return self.taps.size


def _check_pair(x: ComplexSeq, y: ComplexSeq, min_len: int, what: str):
    if len(x) != len(y):
        raise DataError(f"x has {len(x)} samples but y has {len(y)}")
    if len(x) < min_len:
        raise DataError(f"{what} needs at least {min_len} samples, got {len(x)}")


def fit_linear(x: ComplexSeq, y: ComplexSeq, L: int) -> LinModel:
    """Least-squares FIR taps over the samples with a full history (n >= L-1)."""
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")
    _check_pair(x, y, 4 * L, "fit_linear")
    A = delay_matrix(x.samples, L)
    taps = solve_normal_equations(A, y.samples[L - 1:], LINEAR_RIDGE)
    return LinModel(taps)


def apply_linear(m: LinModel, x: ComplexSeq) -> ComplexSeq:
    """FIR reconstruction; outputs before index L-1 are marked invalid."""
    if len(x) < m.L:
        raise DataError(f"apply_linear needs at least {m.L} samples, got {len(x)}")
    out = np.zeros(len(x), dtype=np.complex128)
    out[m.L - 1:] = delay_matrix(x.samples, m.L) @ m.taps
    return x.like(out, valid_from=m.L - 1)


# ---------------------------------------------------------------------------
# Fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedLinModel:
    re: np.ndarray
    im: np.ndarray
    fmt: FxpFormat

    @property
    def L(self) -> int:
        return self.re.size


def quantize_linear(m: LinModel, fmt: FxpFormat) -> QuantizedLinModel:
    return QuantizedLinModel(quantize_array(m.taps.real, fmt), quantize_array(m.taps.imag, fmt), fmt)


def apply_linear_fxp(m: QuantizedLinModel, x_re, x_im, lanes: int = 1,
                     counter: Optional[OpCounter] = None):
    """Fixed-point FIR on raw inputs; returns raw (re, im), zero before L-1.

    Tap ``l`` is multiplied with ``x[n-l]`` and the L products are reduced on
    ``lanes`` complex accumulators (``mac_reduce`` order). ``counter`` sees the
    executed kernels: 3L mults and 7L - 2 adds per output.
    """
    x_re = np.asarray(x_re, dtype=np.int64)
    x_im = np.asarray(x_im, dtype=np.int64)
    if x_re.size < m.L:
        raise DataError(f"apply_linear_fxp needs at least {m.L} samples, got {x_re.size}")
    win_re = delay_matrix(x_re, m.L)
    win_im = delay_matrix(x_im, m.L)
    p_re, p_im = cmul3_raw(m.re, m.im, win_re, win_im, m.fmt, counter)
    out_re = np.zeros(x_re.size, dtype=np.int64)
    out_im = np.zeros(x_re.size, dtype=np.int64)
    out_re[m.L - 1:] = mac_reduce(p_re, lanes, m.fmt, counter)
    out_im[m.L - 1:] = mac_reduce(p_im, lanes, m.fmt, counter)
    return out_re, out_im
