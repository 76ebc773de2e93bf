"""
Basis functions BF_{p,q}(x) = x^q (x*)^(p-q) of the polynomial SI model.

``bf_dp`` evaluates every basis function of a sample with the dynamic
programme BF_{p,q} = x^2 BF_{p-2,q-2} for q >= (p+1)/2 and conjugate symmetry
BF_{p,p-q} = conj(BF_{p,q}) for the rest. All functions accept scalars or
numpy arrays of samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional

import numpy as np

from fxp.arithmetic import FxpFormat, OpCounter, cmul3_raw, neg_raw
from sic.errors import ConfigError, DataError


def check_order(P: int):
    if P < 1 or P % 2 == 0:
        raise ConfigError(f"P must be odd and >= 1, got {P}")


@dataclass(frozen=True, order=True)
class BfIndex:
    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.p % 2 == 0:
            raise ConfigError(f"basis order p must be odd and positive, got {self.p}")
        if not 0 <= self.q <= self.p:
            raise ConfigError(f"q must be in [0, {self.p}], got {self.q}")

    @property
    def mirror(self) -> 'BfIndex':
        return BfIndex(self.p, self.p - self.q)


@lru_cache(maxsize=None)
def bf_indices(P: int) -> List[BfIndex]:
    """All (p, q) for odd p <= P, lexicographic."""
    check_order(P)
    return [BfIndex(p, q) for p in range(1, P + 1, 2) for q in range(p + 1)]


def bf_per_sample(P: int) -> int:
    return (P + 1) * (P + 3) // 4


def n_bf(L: int, P: int) -> int:
    """Number of (p, q, l) regressors: L (P+1)(P+3) / 4."""
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")
    check_order(P)
    return L * bf_per_sample(P)


def n_mul_bf(P: int) -> int:
    check_order(P)
    return (P + 1) * (P + 3) // 8 - 1


@dataclass
class BfCounter:
    """Complex multiplications of the DP: recurrence lines and the x^2 precompute."""

    mults: int = 0
    precompute: int = 0


def bf_direct(x, p: int, q: int):
    """Literal x^q (x*)^(p-q) by repeated multiplication."""
    BfIndex(p, q)
    x = np.asarray(x, dtype=np.complex128) if not isinstance(x, complex) else x
    result = 1.0 + 0.0j
    for _ in range(q):
        result = result * x
    for _ in range(p - q):
        result = result * np.conj(x)
    return result


def bf_dp(x, P: int, counter: Optional[BfCounter] = None) -> Dict[BfIndex, complex]:
    check_order(P)
    times = int(np.size(x))
    conj_x = np.conj(x)
    out = {BfIndex(1, 1): x, BfIndex(1, 0): conj_x}
    if P == 1:
        return out
    x2 = x * x
    if counter is not None:
        counter.precompute += times
    for p in range(3, P + 1, 2):
        for q in range((p + 1) // 2, p + 1):
            value = x2 * out[BfIndex(p - 2, q - 2)]
            out[BfIndex(p, q)] = value
            out[BfIndex(p, p - q)] = np.conj(value)
        if counter is not None:
            counter.mults += times * (p + 1) // 2
    return out


def bf_matrix(x: np.ndarray, P: int, counter: Optional[BfCounter] = None) -> np.ndarray:
    """``(n_bf_per_sample, len(x))`` matrix in ``bf_indices`` order."""
    values = bf_dp(np.asarray(x, dtype=np.complex128), P, counter)
    return np.stack([values[index] for index in bf_indices(P)])


def bf_matrix_fxp(x_re, x_im, P: int, fmt: FxpFormat, counter: Optional[OpCounter] = None):
    """Fixed-point DP on raw inputs; returns raw (re, im) matrices in ``bf_indices`` order.

    Products use ``cmul3_raw``; conjugation only negates the imaginary part.
    """
    check_order(P)
    x_re = np.asarray(x_re, dtype=np.int64)
    x_im = np.asarray(x_im, dtype=np.int64)
    out = {BfIndex(1, 1): (x_re, x_im), BfIndex(1, 0): (x_re, neg_raw(x_im, fmt))}
    if P > 1:
        x2 = cmul3_raw(x_re, x_im, x_re, x_im, fmt, counter)
        for p in range(3, P + 1, 2):
            for q in range((p + 1) // 2, p + 1):
                prev_re, prev_im = out[BfIndex(p - 2, q - 2)]
                re, im = cmul3_raw(x2[0], x2[1], prev_re, prev_im, fmt, counter)
                out[BfIndex(p, q)] = (re, im)
                out[BfIndex(p, p - q)] = (re, neg_raw(im, fmt))
    indices = bf_indices(P)
    return (np.stack([out[i][0] for i in indices]), np.stack([out[i][1] for i in indices]))


class BfBuffer:
    """Circular buffer of the basis functions of the last L-1 samples.

    Holds ``(L-1) (P+1)(P+3) / 4`` entries. ``push`` stores the fresh sample's
    basis functions, evicting the oldest; ``delayed(l)`` returns those of
    ``x[n-l]`` for ``1 <= l <= L-1`` (zeros until the buffer has filled).
    """

    def __init__(self, L: int, P: int, dtype=np.complex128, channels: int = 1):
        n_bf(L, P)
        self.L = L
        self.P = P
        self.width = bf_per_sample(P)
        self._slots = np.zeros((max(L - 1, 0), channels, self.width), dtype=dtype)
        self._head = 0

    @property
    def capacity(self) -> int:
        return (self.L - 1) * self.width

    def push(self, fresh):
        if self.L == 1:
            return
        fresh = np.asarray(fresh).reshape(self._slots.shape[1:])
        self._head = (self._head - 1) % (self.L - 1)
        self._slots[self._head] = fresh

    def delayed(self, l: int) -> np.ndarray:
        if not 1 <= l <= self.L - 1:
            raise DataError(f"delay {l} outside the buffer (1..{self.L - 1})")
        return self._slots[(self._head + l - 1) % (self.L - 1)]
