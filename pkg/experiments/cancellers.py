"""
Canceller kinds available to the experiment commands.

Each kind wraps one canceller family behind the same small interface
(fit, float and fixed-point prediction, complexity, model files, hardware
presets) so the commands can treat them uniformly.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Optional

from fxp.arithmetic import FxpFormat, dequantize_array, quantize_array
from hwmodel.analytical import HwConfig, PolyHwConfig
from lincanc.canceller import LinModel, apply_linear, apply_linear_fxp, fit_linear, quantize_linear
from lincanc.serializers import LinModelSerializer
from metrics.complexity import ComplexityReport, complexity
from nncanc.network import NNModel, predict_nn, predict_nn_fxp, quantize_nn
from nncanc.serializers import NNModelSerializer
from nncanc.training import TrainConfig, TrainingHistory, train
from polycanc.canceller import (
    HybridPolyModel,
    fit_hybrid_poly,
    predict_hybrid_poly,
    predict_hybrid_poly_fxp,
    quantize_hybrid_poly,
)
from polycanc.serializers import HybridPolySerializer
from sic.errors import ConfigError, DataError
from sigmodel.datasets import Dataset
from sigmodel.signals import ComplexSeq

logger = logging.getLogger(__name__)


class ModelMismatchError(DataError):
    """A model file does not match the configuration or the dataset it is used with."""


class BaseCanceller(ABC):
    """One canceller family configured from a RunConfig."""

    name = "Base Canceller"
    description = "Base class for all canceller kinds"
    complexity_kind = ''

    def __init__(self, run_config):
        self.run_config = run_config

    @property
    @abstractmethod
    def params(self) -> dict:
        """Hyperparameters taken from the configuration."""

    @property
    def quant_bits(self) -> int:
        return self.run_config.section('quant')['nn_Q']

    def fxp_format(self, Q: Optional[int] = None) -> FxpFormat:
        return FxpFormat.with_int_bits(Q or self.quant_bits, self.run_config.section('quant')['int_bits'])

    @abstractmethod
    def fit(self, dataset: Dataset, history: Optional[TrainingHistory] = None):
        """Fit or train a model on the training part of ``dataset``."""

    @abstractmethod
    def predict(self, model, x: ComplexSeq) -> ComplexSeq:
        """Floating-point estimate of the SI signal."""

    @abstractmethod
    def predict_fxp(self, model, x: ComplexSeq, Q: Optional[int] = None) -> ComplexSeq:
        """Bit-exact fixed-point estimate at ``Q`` bits (dequantised)."""

    @abstractmethod
    def linear_part(self, model, x: ComplexSeq) -> ComplexSeq:
        """The model's linear-only estimate."""

    @abstractmethod
    def model_params(self, model) -> dict:
        """Hyperparameters recorded in a fitted model."""

    @abstractmethod
    def dump(self, model) -> dict:
        pass

    @abstractmethod
    def load(self, data: dict):
        pass

    def complexity(self) -> ComplexityReport:
        return complexity(self.complexity_kind, **self.params)

    def expected_params(self) -> dict:
        return self.params

    def warmup(self) -> int:
        return self.params['L'] - 1

    def check(self, model, dataset: Optional[Dataset] = None):
        """Raise ``ModelMismatchError`` when ``model`` disagrees with the configuration or the data is too short."""
        recorded = self.model_params(model)
        expected = self.expected_params()
        diffs = ', '.join(f"{key}={recorded[key]} (configured {expected[key]})"
                          for key in sorted(expected) if recorded[key] != expected[key])
        if diffs:
            raise ModelMismatchError(f"{self.name} model does not match the configuration: {diffs}")
        if dataset is not None and len(dataset.x_test) <= self.warmup():
            raise ModelMismatchError(f"{self.name} needs more than {self.warmup()} test samples, "
                                     f"the dataset has {len(dataset.x_test)}")


class LinearCanceller(BaseCanceller):
    name = "Linear"
    description = "Least-squares complex FIR of the SI channel"
    complexity_kind = 'linear'

    @property
    def params(self) -> dict:
        return {'L': self.run_config.section('linear')['L']}

    def fit(self, dataset, history=None) -> LinModel:
        return fit_linear(dataset.x_train, dataset.y_train, self.params['L'])

    def predict(self, model, x):
        return apply_linear(model, x)

    def predict_fxp(self, model, x, Q=None):
        fmt = self.fxp_format(Q)
        re, im = apply_linear_fxp(quantize_linear(model, fmt), quantize_array(x.samples.real, fmt),
                                  quantize_array(x.samples.imag, fmt))
        return x.like(dequantize_array(re, fmt) + 1j * dequantize_array(im, fmt), valid_from=model.L - 1)

    def linear_part(self, model, x):
        return self.predict(model, x)

    def model_params(self, model) -> dict:
        return {'L': model.L}

    def dump(self, model):
        return LinModelSerializer.dump(model)

    def load(self, data):
        return LinModelSerializer.load(data)


class PolyCanceller(BaseCanceller):
    name = "Polynomial"
    description = "Linear FIR plus a parallel-Hammerstein model of the non-linear residual"
    complexity_kind = 'poly'

    @property
    def params(self) -> dict:
        section = self.run_config.section('poly')
        return {'L': section['L'], 'P': section['P']}

    @property
    def quant_bits(self) -> int:
        return self.run_config.section('quant')['poly_Q']

    def fit(self, dataset, history=None) -> HybridPolyModel:
        section = self.run_config.section('poly')
        return fit_hybrid_poly(dataset.x_train, dataset.y_train, section['linear_taps'], section['P'],
                               section['L'], section['input_shift'])

    def warmup(self) -> int:
        section = self.run_config.section('poly')
        return max(section['L'], section['linear_taps']) - 1

    def predict(self, model, x):
        return predict_hybrid_poly(model, x)

    def predict_fxp(self, model, x, Q=None):
        return predict_hybrid_poly_fxp(quantize_hybrid_poly(model, self.fxp_format(Q)), x)

    def linear_part(self, model, x):
        return apply_linear(model.lin, x)

    def expected_params(self) -> dict:
        section = self.run_config.section('poly')
        return {key: section[key] for key in ('L', 'P', 'linear_taps', 'input_shift')}

    def model_params(self, model) -> dict:
        return {'L': model.poly.L, 'P': model.poly.P, 'linear_taps': model.lin.L,
                'input_shift': model.poly.input_shift}

    def dump(self, model):
        return HybridPolySerializer.dump(model)

    def load(self, data):
        return HybridPolySerializer.load(data)

    def hw_config(self) -> PolyHwConfig:
        section = self.run_config.section('poly')
        hardware = self.run_config.section('hardware')
        return PolyHwConfig(section['P'], section['L'], hardware['poly']['N_CPE'], hardware['poly']['N_CPE_BF'],
                            Q=self.quant_bits, clock_hz=hardware['clock_hz'])


class NNCanceller(BaseCanceller):
    complexity_kind = 'nn'
    variant = ''

    @property
    def params(self) -> dict:
        shape = self.run_config.section('nn')[self.variant]
        return {'L': shape['L'], 'N_l': shape['N_l'], 'N_h': shape['N_h']}

    def train_config(self, epochs: Optional[int] = None) -> TrainConfig:
        section = self.run_config.section('nn')['train']
        return TrainConfig(
            batch_size=section['batch_size'],
            learning_rate=section['learning_rate'],
            epochs=section['epochs'] if epochs is None else epochs,
            seed=self.run_config.seed,
            keep_checkpoints=section['keep_checkpoints'],
        )

    def fit(self, dataset, history=None) -> NNModel:
        return train(dataset, cfg=self.train_config(), history=history, **self.params)

    def predict(self, model, x):
        return predict_nn(model, x)

    def predict_fxp(self, model, x, Q=None):
        return predict_nn_fxp(quantize_nn(model, self.fxp_format(Q)), x)

    def linear_part(self, model, x):
        return apply_linear(model.lin, x)

    def model_params(self, model) -> dict:
        return {'L': model.L, 'N_l': model.N_l, 'N_h': model.N_h}

    def dump(self, model):
        return NNModelSerializer.dump(model)

    def load(self, data):
        return NNModelSerializer.load(data)

    def hw_config(self) -> HwConfig:
        hardware = self.run_config.section('hardware')
        preset = hardware[self.variant]
        return HwConfig.for_network(n_pe=preset['n_pe'], N_CPE_linear=preset['N_CPE_linear'], Q=self.quant_bits,
                                    clock_hz=hardware['clock_hz'], **self.params)


class EquiNNCanceller(NNCanceller):
    name = "Equi NN"
    description = "Small network matching the polynomial canceller's cancellation"
    variant = 'equi'


class PeakNNCanceller(NNCanceller):
    name = "Peak NN"
    description = "Network sized for the highest cancellation"
    variant = 'peak'


CANCELLER_REGISTRY = {
    'linear': LinearCanceller,
    'poly': PolyCanceller,
    'equi_nn': EquiNNCanceller,
    'peak_nn': PeakNNCanceller,
}

HARDWARE_KINDS = ('poly', 'equi_nn', 'peak_nn')

# Reference (adds, mults) quoted for the two NN presets, keyed by (L, N_l, N_h); the
# closed forms give 70/54 and 402/352 for these shapes.
PRINTED_NN_COUNTS = {
    (2, 1, 8): (82, 60),
    (4, 1, 34): (428, 364),
}


def get_canceller(canceller_key: str, run_config) -> BaseCanceller:
    """
    Get a canceller kind by key.

    Args:
        canceller_key: Key from CANCELLER_REGISTRY
        run_config: Resolved RunConfig supplying the hyperparameters

    Raises:
        ConfigError: If canceller_key is not found
    """
    if canceller_key not in CANCELLER_REGISTRY:
        raise ConfigError(f"Canceller '{canceller_key}' not found. Available: {list(CANCELLER_REGISTRY.keys())}")
    return CANCELLER_REGISTRY[canceller_key](run_config)


def get_all_cancellers(run_config) -> List[Dict]:
    """List of all canceller kinds with metadata."""
    cancellers = []
    for key, CancellerClass in CANCELLER_REGISTRY.items():
        instance = CancellerClass(run_config)
        cancellers.append({
            'key': key,
            'name': instance.name,
            'description': instance.description,
            'params': instance.params,
        })
    return cancellers
