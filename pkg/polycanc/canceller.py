"""
Polynomial (parallel-Hammerstein) SI canceller.

The model reconstructs ``sum_{p,q,l} h_{p,q}[l] BF_{p,q}(x[n-l])``. Inputs are
prescaled by ``2**-input_shift`` before the basis functions are formed so the
high-order terms stay inside a fixed-point range; fitting uses the same
prescaled input, so float and fixed paths see identical regressors.

Terms are summed in the hardware schedule order (``schedule_order``): the
buffered delays ``l = 1..L-1`` first, then the fresh sample ``l = 0``, with
``(p, q)`` lexicographic inside each delay.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Tuple

import numpy as np

from fxp.arithmetic import (
    FxpFormat,
    OpCounter,
    add_raw,
    cmul3_raw,
    dequantize_array,
    mac_reduce,
    quantize_array,
)
from lincanc.canceller import (
    LinModel,
    QuantizedLinModel,
    apply_linear,
    apply_linear_fxp,
    delay_matrix,
    fit_linear,
    quantize_linear,
    solve_normal_equations,
)
from sic.errors import ConfigError, DataError
from sigmodel.signals import ComplexSeq

from .basis import BfCounter, BfIndex, bf_indices, bf_matrix, bf_matrix_fxp, bf_per_sample, n_bf

logger = logging.getLogger(__name__)

POLY_RIDGE = 1e-9


@lru_cache(maxsize=None)
def schedule_order(P: int, L: int) -> Tuple[Tuple[int, int], ...]:
    """(basis index, delay) pairs in accumulation order: buffered delays first."""
    width = bf_per_sample(P)
    delays = list(range(1, L)) + [0]
    return tuple((i, l) for l in delays for i in range(width))


@dataclass(frozen=True)
class PolyModel:
    """Coefficients ``h_{p,q}[l]`` stored as ``coeffs[bf_index, l]``."""

    P: int
    L: int
    coeffs: np.ndarray
    input_shift: int = 0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        expected = (bf_per_sample(self.P), self.L)
        n_bf(self.L, self.P)
        if coeffs.shape != expected:
            raise DataError(f"coefficient array has shape {coeffs.shape}, expected {expected}")
        if not np.all(np.isfinite(coeffs)):
            raise DataError("polynomial coefficients must be finite")
        if self.input_shift < 0:
            raise ConfigError(f"input_shift must be >= 0, got {self.input_shift}")
        object.__setattr__(self, 'coeffs', coeffs)

    @classmethod
    def zeros(cls, P: int, L: int, input_shift: int = 0) -> 'PolyModel':
        return cls(P, L, np.zeros((bf_per_sample(P), L), dtype=np.complex128), input_shift)

    @classmethod
    def from_map(cls, P: int, L: int, coeffs: dict, input_shift: int = 0) -> 'PolyModel':
        """Build from ``{(p, q, l): value}``; missing terms are zero."""
        array = np.zeros((bf_per_sample(P), L), dtype=np.complex128)
        position = {index: i for i, index in enumerate(bf_indices(P))}
        for (p, q, l), value in coeffs.items():
            index = BfIndex(p, q)
            if index not in position or not 0 <= l < L:
                raise DataError(f"term (p={p}, q={q}, l={l}) outside a P={P}, L={L} model")
            array[position[index], l] = value
        return cls(P, L, array, input_shift)

    @property
    def n_bf(self) -> int:
        return n_bf(self.L, self.P)

    def coeff(self, p: int, q: int, l: int) -> complex:
        return complex(self.coeffs[bf_indices(self.P).index(BfIndex(p, q)), l])

    def items(self):
        """((p, q, l), value) in lexicographic order."""
        for i, index in enumerate(bf_indices(self.P)):
            for l in range(self.L):
                yield (index.p, index.q, l), complex(self.coeffs[i, l])


def prescale(samples: np.ndarray, input_shift: int) -> np.ndarray:
    return samples * 2.0 ** -input_shift


def _active_columns(P: int, L: int, active: Optional[Iterable]) -> np.ndarray:
    indices = bf_indices(P)
    if active is None:
        return np.ones(len(indices) * L, dtype=bool)
    wanted = {BfIndex(*a) if not isinstance(a, BfIndex) else a for a in active}
    unknown = wanted - set(indices)
    if unknown:
        raise ConfigError(f"active terms {sorted((i.p, i.q) for i in unknown)} exceed P={P}")
    rows = np.array([index in wanted for index in indices])
    return np.repeat(rows, L)


def regressor_matrix(bfs: np.ndarray, L: int) -> np.ndarray:
    """Rows n >= L-1, columns (basis index, delay) in lexicographic order."""
    width, n = bfs.shape
    stacked = np.stack([delay_matrix(bfs[i], L) for i in range(width)], axis=1)
    return stacked.reshape(n - L + 1, width * L)


def fit_poly(x: ComplexSeq, y_nl: ComplexSeq, P: int, L: int, active: Optional[Iterable] = None,
             input_shift: int = 0) -> PolyModel:
    """Least-squares fit of ``y_nl`` on the basis-function regressors.

    ``active`` restricts the fit to a subset of ``(p, q)`` pairs (all delays);
    inactive coefficients are zero.
    """
    total = n_bf(L, P)
    if len(x) != len(y_nl):
        raise DataError(f"x has {len(x)} samples but y_nl has {len(y_nl)}")
    if len(x) < 4 * total:
        raise DataError(f"fit_poly needs at least {4 * total} samples for {total} regressors, got {len(x)}")

    columns = _active_columns(P, L, active)
    A = regressor_matrix(bf_matrix(prescale(x.samples, input_shift), P), L)[:, columns]
    solution = solve_normal_equations(A, y_nl.samples[L - 1:], POLY_RIDGE, relative=True, equilibrate=True)
    flat = np.zeros(total, dtype=np.complex128)
    flat[columns] = solution
    logger.debug(f"Fitted polynomial canceller P={P} L={L} with {int(columns.sum())} active regressors")
    return PolyModel(P, L, flat.reshape(bf_per_sample(P), L), input_shift)


def apply_poly(m: PolyModel, x: ComplexSeq, bf_counter: Optional[BfCounter] = None,
               recompute: bool = False) -> ComplexSeq:
    """Synthesize the non-linear cancellation signal; outputs before L-1 are invalid.

    The default path computes each sample's basis functions once and reuses
    them for the next L-1 outputs. ``recompute`` rebuilds them from
    ``x[n-l]`` for every delay; both paths sum in the same order and agree
    exactly. ``bf_counter`` receives the basis-function cost; the weighted
    sum is counted on the fixed-point path.
    """
    if len(x) < m.L:
        raise DataError(f"apply_poly needs at least {m.L} samples, got {len(x)}")
    xs = prescale(x.samples, m.input_shift)
    n, valid = len(xs), len(xs) - m.L + 1
    if recompute:
        delayed = {l: bf_matrix(xs[m.L - 1 - l:n - l], m.P, bf_counter) for l in range(m.L)}
    else:
        fresh = bf_matrix(xs, m.P, bf_counter)
        delayed = {l: fresh[:, m.L - 1 - l:n - l] for l in range(m.L)}

    acc = np.zeros(valid, dtype=np.complex128)
    for i, l in schedule_order(m.P, m.L):
        acc = acc + m.coeffs[i, l] * delayed[l][i]

    out = np.zeros(n, dtype=np.complex128)
    out[m.L - 1:] = acc
    return x.like(out, valid_from=m.L - 1)


# ---------------------------------------------------------------------------
# Fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedPolyModel:
    P: int
    L: int
    re: np.ndarray
    im: np.ndarray
    fmt: FxpFormat
    input_shift: int = 0

    @property
    def n_bf(self) -> int:
        return n_bf(self.L, self.P)


def quantize_poly(m: PolyModel, fmt: FxpFormat) -> QuantizedPolyModel:
    return QuantizedPolyModel(m.P, m.L, quantize_array(m.coeffs.real, fmt), quantize_array(m.coeffs.imag, fmt),
                              fmt, m.input_shift)


def quantize_input(x: ComplexSeq, fmt: FxpFormat, input_shift: int = 0):
    xs = prescale(x.samples, input_shift)
    return quantize_array(xs.real, fmt), quantize_array(xs.imag, fmt)


def schedule_products(m: QuantizedPolyModel, bf_re: np.ndarray, bf_im: np.ndarray, start: int, stop: int,
                      counter: Optional[OpCounter] = None):
    """Raw coefficient x BF products for outputs ``start..stop-1`` in schedule order."""
    prods_re, prods_im = [], []
    for i, l in schedule_order(m.P, m.L):
        re, im = cmul3_raw(m.re[i, l], m.im[i, l], bf_re[i, start - l:stop - l], bf_im[i, start - l:stop - l],
                           m.fmt, counter)
        prods_re.append(re)
        prods_im.append(im)
    return np.stack(prods_re, axis=-1), np.stack(prods_im, axis=-1)


def apply_poly_fxp(m: QuantizedPolyModel, x_re, x_im, lanes: int = 1, counter: Optional[OpCounter] = None,
                   bf_counter: Optional[OpCounter] = None):
    """Bit-exact reference of the CPE datapath on raw (prescaled) inputs.

    Term ``t`` of the schedule is accumulated on CPE ``t % lanes``; the CPE
    partial sums meet in the adder tree. Returns raw (re, im), zero before L-1.
    ``counter`` records the executed multiplies and adds of the weighted sum,
    ``bf_counter`` those of the basis functions.
    """
    x_re = np.asarray(x_re, dtype=np.int64)
    x_im = np.asarray(x_im, dtype=np.int64)
    n = x_re.size
    if n < m.L:
        raise DataError(f"apply_poly_fxp needs at least {m.L} samples, got {n}")
    bf_re, bf_im = bf_matrix_fxp(x_re, x_im, m.P, m.fmt, bf_counter)
    prods_re, prods_im = schedule_products(m, bf_re, bf_im, m.L - 1, n, counter)
    out_re = np.zeros(n, dtype=np.int64)
    out_im = np.zeros(n, dtype=np.int64)
    out_re[m.L - 1:] = mac_reduce(prods_re, lanes, m.fmt, counter)
    out_im[m.L - 1:] = mac_reduce(prods_im, lanes, m.fmt, counter)
    return out_re, out_im


# ---------------------------------------------------------------------------
# Linear + polynomial canceller
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HybridPolyModel:
    """Linear FIR beside a polynomial model of the non-linear residual."""

    lin: LinModel
    poly: PolyModel

    @property
    def warmup(self) -> int:
        return max(self.lin.L, self.poly.L) - 1


def fit_hybrid_poly(x: ComplexSeq, y: ComplexSeq, linear_taps: int, P: int, L: int,
                    input_shift: int = 0, active: Optional[Iterable] = None) -> HybridPolyModel:
    lin = fit_linear(x, y, linear_taps)
    y_lin = apply_linear(lin, x)
    start = max(linear_taps, L) - 1
    y_nl = y.samples[start:] - y_lin.samples[start:]
    poly = fit_poly(x.segment(start), x.like(y_nl, valid_from=0), P, L, active, input_shift)
    return HybridPolyModel(lin, poly)


def predict_hybrid_poly(m: HybridPolyModel, x: ComplexSeq) -> ComplexSeq:
    linear = apply_linear(m.lin, x)
    nonlinear = apply_poly(m.poly, x)
    return x.like(linear.samples + nonlinear.samples, valid_from=m.warmup)


@dataclass(frozen=True)
class QuantizedHybridPoly:
    lin: QuantizedLinModel
    poly: QuantizedPolyModel

    @property
    def fmt(self) -> FxpFormat:
        return self.poly.fmt


def quantize_hybrid_poly(m: HybridPolyModel, fmt: FxpFormat) -> QuantizedHybridPoly:
    return QuantizedHybridPoly(quantize_linear(m.lin, fmt), quantize_poly(m.poly, fmt))


def predict_hybrid_poly_fxp(m: QuantizedHybridPoly, x: ComplexSeq, linear_lanes: int = 1,
                            poly_lanes: int = 1) -> ComplexSeq:
    """Fixed-point linear and polynomial paths combined with saturating adds."""
    fmt = m.fmt
    lin_re, lin_im = apply_linear_fxp(m.lin, *quantize_input(x, fmt), lanes=linear_lanes)
    poly_re, poly_im = apply_poly_fxp(m.poly, *quantize_input(x, fmt, m.poly.input_shift), lanes=poly_lanes)
    re = add_raw(lin_re, poly_re, fmt)
    im = add_raw(lin_im, poly_im, fmt)
    warmup = max(m.lin.L, m.poly.L) - 1
    return x.like(dequantize_array(re, fmt) + 1j * dequantize_array(im, fmt), valid_from=warmup)


def term_labels(P: int, L: int) -> List[Tuple[int, int, int]]:
    """(p, q, l) of each schedule slot."""
    indices = bf_indices(P)
    return [(indices[i].p, indices[i].q, l) for i, l in schedule_order(P, L)]
