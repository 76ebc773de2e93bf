"""
Saturating two's-complement fixed-point arithmetic.

Two layers live here:

* scalar values (``FxpReal`` / ``FxpComplex``) with the user-facing operations
  ``quantize``, ``fxp_add`` and ``cmul3``;
* vectorised raw kernels (``*_raw``) working on int64 numpy arrays of raw
  values. Every fixed-point datapath in the project (reference evaluators and
  the cycle simulators) is built from these kernels, so equal operation order
  gives bit-identical results.

Conventions: round half to even when dropping fraction bits, saturation on
every overflow, products formed in double width and quantized once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from sic.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

MIN_TOTAL_BITS = 2
MAX_TOTAL_BITS = 32


class InvalidFormatError(ConfigError):
    """Fixed-point format outside the supported range."""


class FormatMismatchError(DataError):
    """Operands carry different fixed-point formats."""


@dataclass(frozen=True)
class FxpFormat:
    """Signed fixed-point format: ``total_bits`` wide, ``frac_bits`` fractional."""

    total_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if not MIN_TOTAL_BITS <= self.total_bits <= MAX_TOTAL_BITS:
            raise InvalidFormatError(
                f"total_bits must be in [{MIN_TOTAL_BITS}, {MAX_TOTAL_BITS}], got {self.total_bits}"
            )
        if not 0 <= self.frac_bits < self.total_bits:
            raise InvalidFormatError(
                f"frac_bits must be in [0, {self.total_bits - 1}], got {self.frac_bits}"
            )
        if not self.signed:
            raise InvalidFormatError("only signed formats are supported")

    @classmethod
    def with_int_bits(cls, total_bits: int, int_bits: int = 4) -> 'FxpFormat':
        """Format with ``int_bits`` integer bits (sign included)."""
        return cls(total_bits, max(0, total_bits - int_bits))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    @property
    def max_value(self) -> float:
        return self.raw_max / self.scale

    @property
    def min_value(self) -> float:
        return self.raw_min / self.scale

    def __str__(self):
        return f"Q{self.total_bits}.{self.frac_bits}"


@dataclass
class OpCounter:
    """Real-valued operation tally; one per worker / evaluation context."""

    mults: int = 0
    adds: int = 0

    def record(self, mults: int = 0, adds: int = 0, times: int = 1):
        self.mults += mults * times
        self.adds += adds * times

    def reset(self):
        self.mults = 0
        self.adds = 0

    def as_tuple(self):
        return self.mults, self.adds


def _count(counter: Optional[OpCounter], result, mults: int = 0, adds: int = 0):
    if counter is not None:
        counter.record(mults=mults, adds=adds, times=int(np.size(result)))


# ---------------------------------------------------------------------------
# Raw kernels
# ---------------------------------------------------------------------------

def saturate(raw, fmt: FxpFormat) -> np.ndarray:
    return np.clip(np.asarray(raw, dtype=np.int64), fmt.raw_min, fmt.raw_max)


def overflowed(raw, fmt: FxpFormat) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.int64)
    return (raw > fmt.raw_max) | (raw < fmt.raw_min)


def round_shift(raw, shift: int) -> np.ndarray:
    """Divide by ``2**shift`` with round half to even; ``shift <= 0`` multiplies."""
    raw = np.asarray(raw, dtype=np.int64)
    if shift <= 0:
        return raw << -shift
    quotient = raw >> shift
    remainder = raw & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    round_up = (remainder > half) | ((remainder == half) & ((quotient & 1) == 1))
    return quotient + round_up.astype(np.int64)


def quantize_array(x, fmt: FxpFormat) -> np.ndarray:
    """Float array to raw values (round half to even, saturate)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise DataError(f"cannot quantize non-finite values to {fmt}")
    scaled = np.rint(x * fmt.scale)
    return np.clip(scaled, fmt.raw_min, fmt.raw_max).astype(np.int64)


def dequantize_array(raw, fmt: FxpFormat) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) / fmt.scale


def add_raw(a, b, fmt: FxpFormat, counter: Optional[OpCounter] = None) -> np.ndarray:
    result = saturate(np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64), fmt)
    _count(counter, result, adds=1)
    return result


def sub_raw(a, b, fmt: FxpFormat, counter: Optional[OpCounter] = None) -> np.ndarray:
    result = saturate(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64), fmt)
    _count(counter, result, adds=1)
    return result


def neg_raw(a, fmt: FxpFormat) -> np.ndarray:
    # Sign change only (conjugation); not an adder.
    return saturate(-np.asarray(a, dtype=np.int64), fmt)


def mul_raw(a, b, fmt: FxpFormat, counter: Optional[OpCounter] = None) -> np.ndarray:
    """Double-width product, rounded once back to ``fmt``."""
    wide = np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)
    result = saturate(round_shift(wide, fmt.frac_bits), fmt)
    _count(counter, result, mults=1)
    return result


def relu_raw(a, counter: Optional[OpCounter] = None) -> np.ndarray:
    result = np.maximum(np.asarray(a, dtype=np.int64), 0)
    _count(counter, result, adds=1)
    return result


def shift_raw(a, shift: int, fmt: FxpFormat) -> np.ndarray:
    """Scale by ``2**shift``: saturating left shift or rounded right shift."""
    a = np.asarray(a, dtype=np.int64)
    if shift >= 0:
        # Clamp before shifting so the int64 intermediate cannot wrap.
        limit = fmt.raw_max >> shift
        return saturate(np.clip(a, -limit - 1, limit + 1) << shift, fmt)
    return saturate(round_shift(a, -shift), fmt)


def cmul3_raw(ar, ai, br, bi, fmt: FxpFormat, counter: Optional[OpCounter] = None,
              wide: bool = False):
    """Complex product with three real multiplications and five additions.

    s1 = ac, s2 = bd, s3 = (a+b)(c+d); result = (s1-s2) + j(s3-s1-s2).
    In ``wide`` mode nothing is quantized until the two final components,
    which are rounded once from the exact double-width value.
    """
    if wide:
        if fmt.total_bits > 30:
            # (a+b)(c+d) must stay inside int64.
            raise InvalidFormatError(f"wide mode supports at most 30 bits, got {fmt}")
        a, b, c, d = (np.asarray(v, dtype=np.int64) for v in (ar, ai, br, bi))
        s1, s2, s3 = a * c, b * d, (a + b) * (c + d)
        re = saturate(round_shift(s1 - s2, fmt.frac_bits), fmt)
        im = saturate(round_shift(s3 - s1 - s2, fmt.frac_bits), fmt)
        _count(counter, re, mults=3, adds=5)
        return re, im
    s1 = mul_raw(ar, br, fmt)
    s2 = mul_raw(ai, bi, fmt)
    s3 = mul_raw(add_raw(ar, ai, fmt), add_raw(br, bi, fmt), fmt)
    re = sub_raw(s1, s2, fmt)
    im = sub_raw(sub_raw(s3, s1, fmt), s2, fmt)
    _count(counter, re, mults=3, adds=5)
    return re, im


def adder_tree(partials: Sequence, fmt: FxpFormat, counter: Optional[OpCounter] = None):
    """Pairwise saturating reduction in ascending lane order.

    Level by level: (0,1), (2,3), ...; an odd last lane is carried up.
    """
    level = [np.asarray(p, dtype=np.int64) for p in partials]
    if not level:
        raise DataError("adder tree needs at least one lane")
    while len(level) > 1:
        paired = [add_raw(level[i], level[i + 1], fmt, counter) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]


def mac_reduce(products, lanes: int, fmt: FxpFormat, counter: Optional[OpCounter] = None):
    """Reduce the last axis of ``products`` the way a PE array does.

    Term ``i`` is accumulated on lane ``i % lanes`` in ascending order with
    saturation after every add; the lanes that received a term then meet in
    ``adder_tree``. Empty lanes add nothing and cost no adder.
    """
    products = np.asarray(products, dtype=np.int64)
    n_terms = products.shape[-1]
    if lanes < 1:
        raise DataError(f"lanes must be >= 1, got {lanes}")
    partials = []
    for lane in range(lanes):
        terms = range(lane, n_terms, lanes)
        if not terms:
            break
        acc = products[..., terms[0]]
        for t in terms[1:]:
            acc = add_raw(acc, products[..., t], fmt, counter)
        partials.append(acc)
    if not partials:
        return np.zeros(products.shape[:-1], dtype=np.int64)
    return adder_tree(partials, fmt, counter)


def sequential_sum(values: Sequence, fmt: FxpFormat, counter: Optional[OpCounter] = None):
    """Left-to-right saturating sum; the documented order for plain reductions."""
    acc = np.asarray(values[0], dtype=np.int64)
    for value in values[1:]:
        acc = add_raw(acc, value, fmt, counter)
    return acc


# ---------------------------------------------------------------------------
# Scalar values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FxpReal:
    raw: int
    fmt: FxpFormat
    overflow: bool = False

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise DataError(f"raw value {self.raw} does not fit {self.fmt}")

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale

    @property
    def exact(self) -> Fraction:
        return Fraction(self.raw, self.fmt.scale)


@dataclass(frozen=True)
class FxpComplex:
    re: FxpReal
    im: FxpReal

    def __post_init__(self):
        if self.re.fmt != self.im.fmt:
            raise FormatMismatchError(f"real part is {self.re.fmt}, imaginary part is {self.im.fmt}")

    @property
    def fmt(self) -> FxpFormat:
        return self.re.fmt

    @property
    def value(self) -> complex:
        return complex(self.re.value, self.im.value)

    @classmethod
    def from_complex(cls, z: complex, fmt: FxpFormat) -> 'FxpComplex':
        return cls(quantize(z.real, fmt), quantize(z.imag, fmt))


def check_same_format(*values):
    formats = {v.fmt for v in values}
    if len(formats) != 1:
        raise FormatMismatchError(f"operands use different formats: {sorted(map(str, formats))}")
    return formats.pop()


def _real(raw, fmt: FxpFormat, unsaturated=None) -> FxpReal:
    flag = bool(overflowed(unsaturated, fmt)) if unsaturated is not None else False
    return FxpReal(int(raw), fmt, flag)


def quantize(x: float, fmt: FxpFormat) -> FxpReal:
    """Round to nearest (ties to even) and saturate; overflow flagged, not raised."""
    if not math.isfinite(x):
        raise DataError(f"cannot quantize {x} to {fmt}")
    scaled = float(np.rint(float(x) * fmt.scale))
    raw = int(min(max(scaled, fmt.raw_min), fmt.raw_max))
    return FxpReal(raw, fmt, not fmt.raw_min <= scaled <= fmt.raw_max)


def dequantize(v: FxpReal) -> float:
    return v.value


def fxp_add(a: FxpReal, b: FxpReal, counter: Optional[OpCounter] = None) -> FxpReal:
    fmt = check_same_format(a, b)
    return _real(add_raw(a.raw, b.raw, fmt, counter), fmt, a.raw + b.raw)


def fxp_sub(a: FxpReal, b: FxpReal, counter: Optional[OpCounter] = None) -> FxpReal:
    fmt = check_same_format(a, b)
    return _real(sub_raw(a.raw, b.raw, fmt, counter), fmt, a.raw - b.raw)


def fxp_mul(a: FxpReal, b: FxpReal, counter: Optional[OpCounter] = None) -> FxpReal:
    fmt = check_same_format(a, b)
    unsaturated = round_shift(a.raw * b.raw, fmt.frac_bits)
    return _real(mul_raw(a.raw, b.raw, fmt, counter), fmt, unsaturated)


def fxp_sum(values: Sequence[FxpReal], counter: Optional[OpCounter] = None) -> FxpReal:
    """Saturating sum in the fixed left-to-right order."""
    fmt = check_same_format(*values)
    return _real(sequential_sum([v.raw for v in values], fmt, counter), fmt)


def _cmul3_saturation(a: FxpComplex, b: FxpComplex, fmt: FxpFormat, wide: bool) -> Tuple[bool, bool]:
    """Whether producing each component saturated at any stage of ``cmul3_raw``."""
    hit = []

    def stage(unsaturated) -> int:
        hit.append(bool(overflowed(unsaturated, fmt)))
        return int(saturate(unsaturated, fmt))

    ar, ai, br, bi = a.re.raw, a.im.raw, b.re.raw, b.im.raw
    if wide:
        s1, s2 = ar * br, ai * bi
        stage(round_shift(s1 - s2, fmt.frac_bits))
        stage(round_shift((ar + ai) * (br + bi) - s1 - s2, fmt.frac_bits))
        return hit[0], hit[1]
    s1 = stage(round_shift(ar * br, fmt.frac_bits))
    s2 = stage(round_shift(ai * bi, fmt.frac_bits))
    stage(s1 - s2)
    re_hit = any(hit)
    s3 = stage(round_shift(stage(ar + ai) * stage(br + bi), fmt.frac_bits))
    stage(stage(s3 - s1) - s2)
    return re_hit, any(hit)


def cmul3(a: FxpComplex, b: FxpComplex, counter: Optional[OpCounter] = None,
          wide: bool = False) -> FxpComplex:
    """Complex product; a component is flagged when any stage behind it saturated."""
    fmt = check_same_format(a, b)
    re, im = cmul3_raw(a.re.raw, a.im.raw, b.re.raw, b.im.raw, fmt, counter, wide=wide)
    re_hit, im_hit = _cmul3_saturation(a, b, fmt, wide)
    return FxpComplex(FxpReal(int(re), fmt, re_hit), FxpReal(int(im), fmt, im_hit))
