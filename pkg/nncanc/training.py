"""
Two-step training of the NN canceller.

First a linear FIR is fitted by least squares on the raw training data, then
the network learns the normalised residual ``y - y_lin`` by mini-batch
backpropagation with Adam on the mean squared error.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from lincanc.canceller import apply_linear, fit_linear
from metrics.cancellation import c_db
from sic.errors import ConfigError, DataError
from sigmodel.datasets import Dataset
from sigmodel.signals import ComplexSeq

from .network import (
    NNModel,
    glorot_uniform,
    layer_sizes,
    loss_and_gradients,
    mse,
    normalize_input,
    power_of_two_shift,
    predict_nn,
    windows,
)

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['epoch', 'train_mse', 'test_mse', 'c_db_total']


class TrainingDivergedError(DataError):
    """Training loss became NaN or infinite."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged in epoch {epoch} (loss {loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.004
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    keep_checkpoints: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ConfigError("Adam needs 0 <= beta < 1 and epsilon > 0")


class Adam:
    def __init__(self, params: List[np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        """Update ``params`` in place."""
        cfg = self.cfg
        self.t += 1
        correction1 = 1 - cfg.beta1 ** self.t
        correction2 = 1 - cfg.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + cfg.epsilon)


@dataclass
class TrainingHistory:
    """Per-epoch losses, and parameter copies when checkpoints are kept."""

    rows: List[dict] = field(default_factory=list)
    checkpoints: List[Tuple[List[np.ndarray], List[np.ndarray]]] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=HISTORY_COLUMNS)


@dataclass(frozen=True)
class ResidualTarget:
    """Network inputs and normalised residual targets for one data segment."""

    inputs: np.ndarray
    targets: np.ndarray


def residual_target(model: NNModel, x: ComplexSeq, y: ComplexSeq) -> ResidualTarget:
    y_lin = apply_linear(model.lin, x)
    residual = y.samples[model.L - 1:] - y_lin.valid
    s_re, s_im = model.denorm_shift
    mean = model.denorm_mean
    targets = np.stack([(residual.real - mean.real) * 2.0 ** -s_re,
                        (residual.imag - mean.imag) * 2.0 ** -s_im], axis=1)
    xn = normalize_input(model, x.samples)
    return ResidualTarget(windows(xn.real, xn.imag, model.L), targets)


def prepare_model(dataset: Dataset, L: int, N_l: int, N_h: int, rng: np.random.Generator) -> NNModel:
    """Linear fit, residual statistics and a freshly initialised network."""
    x, y = dataset.x_train, dataset.y_train
    lin = fit_linear(x, y, L)
    residual = y.samples[L - 1:] - apply_linear(lin, x).valid
    mean = complex(np.mean(residual))
    shifts = (power_of_two_shift(float(np.std(residual.real))), power_of_two_shift(float(np.std(residual.imag))))
    weights, biases = glorot_uniform(layer_sizes(L, N_l, N_h), rng)
    stats = dataset.norm_stats
    return NNModel(L, N_l, N_h, weights, biases, lin, shifts, mean, stats.x_mean, 1.0 / math.sqrt(stats.x_var))


def total_c_db(model: NNModel, x: ComplexSeq, y: ComplexSeq) -> float:
    return c_db(y, predict_nn(model, x))


def train(dataset: Dataset, L: int, N_l: int, N_h: int, cfg: Optional[TrainConfig] = None,
          history: Optional[TrainingHistory] = None) -> NNModel:
    """Fit the linear stage, then train the network for ``cfg.epochs`` epochs.

    After each epoch the training and test MSE (normalised units) and the
    total test-set C_dB are appended to ``history``.
    """
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    model = prepare_model(dataset, L, N_l, N_h, rng)
    train_set = residual_target(model, dataset.x_train, dataset.y_train)
    test_set = residual_target(model, dataset.x_test, dataset.y_test)
    params = model.weights + model.biases
    optimizer = Adam(params, cfg)
    n_layers = len(model.weights)
    n = train_set.inputs.shape[0]

    logger.info(f"Training NN canceller L={L} N_l={N_l} N_h={N_h} on {n} windows for {cfg.epochs} epochs")
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grad_w, grad_b = loss_and_gradients(model.weights, model.biases,
                                                      train_set.inputs[batch], train_set.targets[batch])
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            optimizer.step(params, grad_w + grad_b)

        train_mse = mse(model.weights, model.biases, train_set.inputs, train_set.targets)
        if not math.isfinite(train_mse):
            raise TrainingDivergedError(epoch, train_mse)
        if history is not None:
            history.rows.append({
                'epoch': epoch,
                'train_mse': train_mse,
                'test_mse': mse(model.weights, model.biases, test_set.inputs, test_set.targets),
                'c_db_total': total_c_db(model, dataset.x_test, dataset.y_test),
            })
            if cfg.keep_checkpoints:
                history.checkpoints.append((copy.deepcopy(params[:n_layers]), copy.deepcopy(params[n_layers:])))
        logger.debug(f"Epoch {epoch}: train MSE {train_mse:.6e}")

    return model.with_params(params[:n_layers], params[n_layers:])


def checkpoint_mse(model: NNModel, checkpoint, x: ComplexSeq, y: ComplexSeq) -> float:
    """Re-evaluate a stored checkpoint's MSE on a segment."""
    weights, biases = checkpoint
    data = residual_target(model, x, y)
    return mse(weights, biases, data.inputs, data.targets)
