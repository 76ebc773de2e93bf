"""
Closed-form per-sample cost of the three cancellers, in real additions and
real multiplications. A complex multiply costs three multiplications and five
additions, a complex addition two additions.
"""

from dataclasses import asdict, dataclass
from typing import Optional

from sic.errors import ConfigError

KINDS = ('linear', 'poly', 'nn')


@dataclass(frozen=True)
class ComplexityReport:
    n_add: int
    n_mul: int
    n_bf: Optional[int] = None
    n_mul_bf: Optional[int] = None

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be non-negative, got {value}")

    def as_dict(self) -> dict:
        return {key: value for key, value in asdict(self).items() if value is not None}


def _positive(**params):
    for name, value in params.items():
        if not isinstance(value, int) or value < 1:
            raise ConfigError(f"{name} must be a positive integer, got {value!r}")


def linear_complexity(L: int) -> ComplexityReport:
    _positive(L=L)
    return ComplexityReport(n_add=7 * L - 2, n_mul=3 * L)


def poly_complexity(L: int, P: int) -> ComplexityReport:
    _positive(L=L, P=P)
    if P % 2 == 0:
        raise ConfigError(f"P must be odd, got {P}")
    n_bf = L * (P + 1) * (P + 3) // 4
    return ComplexityReport(
        n_add=7 * n_bf - 2,
        n_mul=3 * n_bf,
        n_bf=n_bf,
        n_mul_bf=(P + 1) * (P + 3) // 8 - 1,
    )


def nn_complexity(L: int, N_h: int, N_l: int = 1) -> ComplexityReport:
    """Hidden layers, output layer, linear canceller and the two combining adds."""
    _positive(L=L, N_h=N_h, N_l=N_l)
    n_add = (2 * L + 3 + (N_l - 1) * (N_h + 1)) * N_h + 7 * L
    n_mul = (2 * L + 2 + (N_l - 1) * N_h) * N_h + 3 * L
    return ComplexityReport(n_add=n_add, n_mul=n_mul)


def complexity(kind: str, **params) -> ComplexityReport:
    if kind == 'linear':
        return linear_complexity(**params)
    if kind == 'poly':
        return poly_complexity(**params)
    if kind == 'nn':
        return nn_complexity(**params)
    raise ConfigError(f"unknown canceller kind {kind!r}; expected one of {', '.join(KINDS)}")
