"""
Feedforward NN canceller: a linear FIR for the linear SI part and a small ReLU
network for the non-linear residual.

Layer ``l`` computes ``f(W_l h_{l-1} + b_l)`` with ReLU on the hidden layers
and the identity on the output layer. The input layer holds the ``2L`` real
values ``[Re x[n], Im x[n], ..., Re x[n-L+1], Im x[n-L+1]]`` of the
normalised transmit signal; the two outputs are the normalised real and
imaginary parts of the non-linear SI estimate. Denormalisation multiplies by
``2**denorm_shift`` per component and adds ``denorm_mean``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fxp.arithmetic import (
    FxpFormat,
    FxpReal,
    OpCounter,
    add_raw,
    dequantize_array,
    mac_reduce,
    mul_raw,
    quantize_array,
    relu_raw,
    shift_raw,
)
from lincanc.canceller import (
    LinModel,
    QuantizedLinModel,
    apply_linear,
    apply_linear_fxp,
    delay_matrix,
    quantize_linear,
)
from sic.errors import ConfigError, DataError
from sigmodel.signals import ComplexSeq

logger = logging.getLogger(__name__)

MAX_SHIFT = 32


def layer_sizes(L: int, N_l: int, N_h: int) -> List[int]:
    """NE_0 = 2L, NE_1..NE_{N_l} = N_h, NE_{N_l+1} = 2."""
    for name, value in (('L', L), ('N_l', N_l), ('N_h', N_h)):
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return [2 * L] + [N_h] * N_l + [2]


def power_of_two_shift(std: float) -> int:
    """Exponent ``s`` such that ``std / 2**s`` is closest to ``1/sqrt(2)`` on a log scale."""
    if not std > 0:
        return -MAX_SHIFT
    return int(np.clip(round(float(np.log2(std * np.sqrt(2.0)))), -MAX_SHIFT, MAX_SHIFT))


@dataclass
class NNModel:
    L: int
    N_l: int
    N_h: int
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    lin: LinModel
    denorm_shift: Tuple[int, int] = (0, 0)
    denorm_mean: complex = 0j
    input_mean: complex = 0j
    input_scale: float = 1.0

    def __post_init__(self):
        sizes = layer_sizes(self.L, self.N_l, self.N_h)
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DataError(f"expected {len(sizes) - 1} layers, got {len(self.weights)} weight matrices "
                            f"and {len(self.biases)} bias vectors")
        self.weights = [np.array(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.array(b, dtype=np.float64).reshape(-1) for b in self.biases]
        for index, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            expected = (sizes[index], sizes[index - 1])
            if w.shape != expected or b.shape != (sizes[index],):
                raise DataError(f"layer {index}: weights {w.shape} / bias {b.shape}, expected {expected} / "
                                f"({sizes[index]},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataError(f"layer {index} has non-finite parameters")
        if self.lin.L != self.L:
            raise DataError(f"linear canceller has {self.lin.L} taps but the network window is L={self.L}")
        if not self.input_scale > 0:
            raise DataError(f"input_scale must be positive, got {self.input_scale}")
        self.denorm_shift = tuple(int(s) for s in self.denorm_shift)
        self.denorm_mean = complex(self.denorm_mean)
        self.input_mean = complex(self.input_mean)

    @property
    def layer_sizes(self) -> List[int]:
        return layer_sizes(self.L, self.N_l, self.N_h)

    @property
    def activations(self) -> Tuple[str, ...]:
        return ('relu',) * self.N_l + ('identity',)

    @classmethod
    def zeros(cls, L: int, N_l: int, N_h: int, lin: Optional[LinModel] = None, **kwargs) -> 'NNModel':
        sizes = layer_sizes(L, N_l, N_h)
        weights = [np.zeros((n_out, n_in)) for n_in, n_out in zip(sizes, sizes[1:])]
        biases = [np.zeros(n_out) for n_out in sizes[1:]]
        return cls(L, N_l, N_h, weights, biases, lin or LinModel(np.zeros(L)), **kwargs)

    def with_params(self, weights, biases) -> 'NNModel':
        return NNModel(self.L, self.N_l, self.N_h, weights, biases, self.lin, self.denorm_shift,
                       self.denorm_mean, self.input_mean, self.input_scale)


def glorot_uniform(sizes: Sequence[int], rng: np.random.Generator):
    """Weights uniform in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
    weights, biases = [], []
    for n_in, n_out in zip(sizes, sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return weights, biases


def windows(re: np.ndarray, im: np.ndarray, L: int) -> np.ndarray:
    """Input vectors for outputs ``n = L-1 .. N-1``, shape ``(N-L+1, 2L)``."""
    taps_re, taps_im = delay_matrix(re, L), delay_matrix(im, L)
    return np.stack([taps_re, taps_im], axis=-1).reshape(taps_re.shape[0], 2 * L)


def normalize_input(m, samples: np.ndarray) -> np.ndarray:
    return (samples - m.input_mean) * m.input_scale


def forward_pass(weights, biases, inputs: np.ndarray) -> List[np.ndarray]:
    """Every layer's output for a batch ``(..., NE_0)``; the last entry is the network output."""
    outputs = [inputs]
    last = len(weights) - 1
    for index, (w, b) in enumerate(zip(weights, biases)):
        z = outputs[-1] @ w.T + b
        outputs.append(z if index == last else np.maximum(z, 0.0))
    return outputs


def nn_forward(m: NNModel, window) -> np.ndarray:
    """Network output (normalised units) for one window or a batch of windows."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 0 or window.shape[-1] != 2 * m.L:
        raise DataError(f"window must end in an axis of length {2 * m.L}, got shape {window.shape}")
    return forward_pass(m.weights, m.biases, window)[-1]


def loss_and_gradients(weights, biases, inputs: np.ndarray, targets: np.ndarray):
    """Mean squared error over the batch and both outputs, with its gradients."""
    outputs = forward_pass(weights, biases, inputs)
    error = outputs[-1] - targets
    loss = float(np.mean(error ** 2))
    delta = 2.0 * error / error.size
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    for index in reversed(range(len(weights))):
        grad_w[index] = delta.T @ outputs[index]
        grad_b[index] = delta.sum(axis=0)
        if index:
            delta = (delta @ weights[index]) * (outputs[index] > 0)
    return loss, grad_w, grad_b


def mse(weights, biases, inputs: np.ndarray, targets: np.ndarray) -> float:
    return float(np.mean((forward_pass(weights, biases, inputs)[-1] - targets) ** 2))


def denormalize(m: NNModel, out: np.ndarray) -> np.ndarray:
    s_re, s_im = m.denorm_shift
    return out[..., 0] * 2.0 ** s_re + 1j * (out[..., 1] * 2.0 ** s_im) + m.denorm_mean


def nonlinear_estimate(m: NNModel, x: ComplexSeq) -> np.ndarray:
    """Denormalised NN output for every sample with a full window (``n >= L-1``)."""
    xn = normalize_input(m, x.samples)
    return denormalize(m, nn_forward(m, windows(xn.real, xn.imag, m.L)))


def predict_nn(m: NNModel, x: ComplexSeq) -> ComplexSeq:
    """Linear FIR plus denormalised network output; invalid before L-1."""
    if len(x) < m.L:
        raise DataError(f"predict_nn needs at least {m.L} samples, got {len(x)}")
    linear = apply_linear(m.lin, x)
    y_nl = nonlinear_estimate(m, x)
    out = np.zeros(len(x), dtype=np.complex128)
    out[m.L - 1:] = linear.samples[m.L - 1:] + y_nl
    return x.like(out, valid_from=m.L - 1)


# ---------------------------------------------------------------------------
# Fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizedNN:
    """Raw weights and biases; the denormalisation mean is folded into the output bias."""

    L: int
    N_l: int
    N_h: int
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    fmt: FxpFormat
    lin: QuantizedLinModel
    denorm_shift: Tuple[int, int] = (0, 0)
    input_mean: complex = 0j
    input_scale: float = 1.0
    default_lanes: Tuple[int, ...] = field(default=())

    @property
    def layer_sizes(self) -> List[int]:
        return layer_sizes(self.L, self.N_l, self.N_h)

    def lanes(self, lanes: Optional[Sequence[int]] = None) -> Tuple[int, ...]:
        lanes = tuple(lanes or self.default_lanes or (1,) * (self.N_l + 1))
        if len(lanes) != self.N_l + 1 or any(lane < 1 for lane in lanes):
            raise DataError(f"need {self.N_l + 1} positive lane counts, got {lanes}")
        return lanes


def quantize_nn(m: NNModel, fmt: FxpFormat, lanes: Optional[Sequence[int]] = None) -> QuantizedNN:
    s_re, s_im = m.denorm_shift
    folded = np.array([m.denorm_mean.real * 2.0 ** -s_re, m.denorm_mean.imag * 2.0 ** -s_im])
    biases = list(m.biases[:-1]) + [m.biases[-1] + folded]
    return QuantizedNN(
        m.L, m.N_l, m.N_h,
        [quantize_array(w, fmt) for w in m.weights],
        [quantize_array(b, fmt) for b in biases],
        fmt,
        quantize_linear(m.lin, fmt),
        m.denorm_shift,
        m.input_mean,
        m.input_scale,
        tuple(lanes or ()),
    )


def layer_fxp(w: np.ndarray, b: np.ndarray, inputs: np.ndarray, lanes: int, fmt: FxpFormat, relu: bool,
              counter: Optional[OpCounter] = None) -> np.ndarray:
    products = mul_raw(inputs[..., None, :], w, fmt, counter)
    acc = add_raw(mac_reduce(products, lanes, fmt, counter), b, fmt, counter)
    return relu_raw(acc, counter) if relu else acc


def nn_forward_fxp(qm: QuantizedNN, window_raw, lanes: Optional[Sequence[int]] = None,
                   counter: Optional[OpCounter] = None) -> np.ndarray:
    """Bit-exact fixed-point forward pass on raw windows ``(..., 2L)``; returns raw ``(..., 2)``."""
    h = np.asarray(window_raw, dtype=np.int64)
    if h.ndim == 0 or h.shape[-1] != 2 * qm.L:
        raise DataError(f"window must end in an axis of length {2 * qm.L}, got shape {h.shape}")
    lanes = qm.lanes(lanes)
    last = len(qm.weights) - 1
    for index, (w, b) in enumerate(zip(qm.weights, qm.biases)):
        h = layer_fxp(w, b, h, lanes[index], qm.fmt, index < last, counter)
    return h


def nn_window_fxp(qm: QuantizedNN, window: Sequence[FxpReal],
                  lanes: Optional[Sequence[int]] = None) -> Tuple[FxpReal, FxpReal]:
    """Scalar form of ``nn_forward_fxp`` for a single window of ``FxpReal`` values."""
    for value in window:
        if value.fmt != qm.fmt:
            raise DataError(f"window value in {value.fmt}, network in {qm.fmt}")
    out = nn_forward_fxp(qm, [v.raw for v in window], lanes)
    return FxpReal(int(out[0]), qm.fmt), FxpReal(int(out[1]), qm.fmt)


def quantized_windows(qm: QuantizedNN, x: ComplexSeq) -> np.ndarray:
    xn = normalize_input(qm, x.samples)
    return windows(quantize_array(xn.real, qm.fmt), quantize_array(xn.imag, qm.fmt), qm.L)


def combine_fxp(qm: QuantizedNN, lin_re, lin_im, nn_out,
                counter: Optional[OpCounter] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Denormalising shifts and the two saturating combining adds, for outputs ``n >= L-1``."""
    s_re, s_im = qm.denorm_shift
    re = add_raw(lin_re[qm.L - 1:], shift_raw(nn_out[..., 0], s_re, qm.fmt), qm.fmt, counter)
    im = add_raw(lin_im[qm.L - 1:], shift_raw(nn_out[..., 1], s_im, qm.fmt), qm.fmt, counter)
    return re, im


def predict_nn_fxp(qm: QuantizedNN, x: ComplexSeq, lanes: Optional[Sequence[int]] = None,
                   linear_lanes: int = 1, counter: Optional[OpCounter] = None) -> ComplexSeq:
    """Fixed-point hybrid canceller output (dequantised), invalid before L-1.

    ``counter`` is shared by the linear FIR, the network and the combining adds.
    """
    if len(x) < qm.L:
        raise DataError(f"predict_nn_fxp needs at least {qm.L} samples, got {len(x)}")
    lin_re, lin_im = apply_linear_fxp(qm.lin, quantize_array(x.samples.real, qm.fmt),
                                      quantize_array(x.samples.imag, qm.fmt), lanes=linear_lanes, counter=counter)
    nn_out = nn_forward_fxp(qm, quantized_windows(qm, x), lanes, counter)
    re, im = combine_fxp(qm, lin_re, lin_im, nn_out, counter)
    out = np.zeros(len(x), dtype=np.complex128)
    out[qm.L - 1:] = dequantize_array(re, qm.fmt) + 1j * dequantize_array(im, qm.fmt)
    return x.like(out, valid_from=qm.L - 1)
