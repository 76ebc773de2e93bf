"""
Experiment steps shared by the ``sic_*`` management commands.

The commands only parse arguments, call into this module and write files;
everything numerical happens here or in the canceller apps.
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fxp.arithmetic import dequantize_array
from hwmodel.analytical import nn_pipeline_report, poly_hw_report
from hwmodel.reports import HwReport
from hwmodel.simulator import NNPipelineSimulator, PolySimulator
from metrics.cancellation import c_db, psd_frame
from metrics.complexity import complexity
from nncanc.network import predict_nn, predict_nn_fxp, quantize_nn
from nncanc.training import TrainConfig, TrainingHistory, train
from polycanc.canceller import apply_poly_fxp, fit_hybrid_poly, predict_hybrid_poly, quantize_hybrid_poly, quantize_input
from sic.errors import ConfigError, DataError
from sigmodel.datasets import Dataset, load_dataset, make_dataset
from sigmodel.signals import ComplexSeq, papr_db

from .cancellers import CANCELLER_REGISTRY, HARDWARE_KINDS, PRINTED_NN_COUNTS, get_canceller
from .outputs import model_path, read_model

logger = logging.getLogger(__name__)


DATASET_FILE = 'dataset.sicd'


class GridError(ConfigError):
    """A sweep grid without cells."""


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

def obtain_dataset(run_config, dataset_path=None) -> Dataset:
    """Load ``dataset_path`` or generate the configured dataset."""
    if dataset_path:
        try:
            dataset = load_dataset(dataset_path)
        except OSError as exc:
            raise DataError(f"cannot read dataset {dataset_path}: {exc.strerror or exc}") from exc
        logger.info(f"Loaded dataset {dataset_path} ({len(dataset)} samples)")
        return dataset
    section = run_config.section('dataset')
    return make_dataset(run_config.tx_chain(), section['n_samples'], run_config.waveform(),
                        section['split_fraction'], section['residual_taps'])


def dataset_summary(dataset: Dataset) -> dict:
    """PAPR, powers and SNR of a dataset."""
    summary = {
        'n_samples': len(dataset),
        'split_index': dataset.split_index,
        'sample_rate_hz': dataset.sample_rate_hz,
        'papr_db': papr_db(dataset.x),
        'tx_power': dataset.x.power(),
        'rx_power': dataset.y.power(),
        'snr_db': None,
    }
    if dataset.y_si is not None:
        noise = dataset.y.samples - dataset.y_si.samples
        noise_power = float(np.mean(np.abs(noise) ** 2))
        si_power = dataset.y_si.power()
        summary['si_power'] = si_power
        if noise_power > 0 and si_power > 0:
            summary['snr_db'] = 10 * math.log10(si_power / noise_power)
    return summary


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

def fit_model(canceller, dataset: Dataset, history: Optional[TrainingHistory] = None):
    model = canceller.fit(dataset, history)
    canceller.check(model, dataset)
    return model


def obtain_models(run_config, dataset: Dataset, keys: Sequence[str], models_dir=None) -> Dict[str, tuple]:
    """``{key: (canceller, model)}``, read from ``models_dir`` when a file exists, fitted otherwise."""
    models = {}
    for key in keys:
        canceller = get_canceller(key, run_config)
        path = model_path(models_dir, key) if models_dir else None
        if path is not None and path.exists():
            model = read_model(path, key, canceller)
            canceller.check(model, dataset)
            logger.info(f"✓ Loaded {canceller.name} model from {path}")
        else:
            logger.warning(f"⚠ No {key} model file, fitting {canceller.name} on the training data")
            model = fit_model(canceller, dataset)
        models[key] = (canceller, model)
    return models


def _aligned(a: ComplexSeq, b: ComplexSeq) -> Tuple[ComplexSeq, ComplexSeq]:
    start = max(a.valid_from, b.valid_from)
    return a.like(a.samples, valid_from=start), b.like(b.samples, valid_from=start)


def evaluate_model(canceller, model, dataset: Dataset) -> Tuple[dict, ComplexSeq]:
    """Test-set cancellation (total, linear-only, non-linear increment, fixed point) and the estimate."""
    x, y = dataset.x_test, dataset.y_test
    estimate, linear = _aligned(canceller.predict(model, x), canceller.linear_part(model, x))
    total = c_db(y, estimate)
    linear_only = c_db(y, linear)
    increment = total - linear_only if math.isfinite(linear_only) else 0.0
    fixed = c_db(y, canceller.predict_fxp(model, x))
    result = {
        'name': canceller.name,
        'params': canceller.model_params(model),
        'c_db_total': total,
        'c_db_linear': linear_only,
        'c_db_nonlinear': increment,
        'c_db_train': c_db(dataset.y_train, canceller.predict(model, dataset.x_train)),
        'c_db_fixed': fixed,
        'Q': canceller.quant_bits,
        'complexity': canceller.complexity().as_dict(),
    }
    logger.info(f"✅ {canceller.name}: C_dB {total:.2f} (linear {linear_only:.2f}, fixed point {fixed:.2f})")
    return result, estimate


def psd_curves(dataset: Dataset, estimates: Dict[str, ComplexSeq]) -> Dict[str, ComplexSeq]:
    """Received SI, the residual after each canceller and the noise floor, over the test set."""
    y = dataset.y_test
    curves = {'no_cancellation': y}
    for key, estimate in estimates.items():
        curves[key] = y.like(y.samples - estimate.samples, valid_from=estimate.valid_from)
    if dataset.y_si is not None:
        y_si = dataset.y_si.samples[dataset.split_index:]
        curves['noise_floor'] = y.like(y.samples - y_si, valid_from=0)
    return curves


def psd_table(run_config, dataset: Dataset, estimates: Dict[str, ComplexSeq]) -> pd.DataFrame:
    section = run_config.section('psd')
    return psd_frame(psd_curves(dataset, estimates), section['nfft'], section['overlap'])


def complexity_table(run_config) -> pd.DataFrame:
    """Real additions and multiplications per sample, one row per canceller kind."""
    rows = []
    for key in CANCELLER_REGISTRY:
        canceller = get_canceller(key, run_config)
        report = canceller.complexity()
        printed = PRINTED_NN_COUNTS.get(tuple(canceller.params.get(k) for k in ('L', 'N_l', 'N_h')))
        note = ''
        if canceller.complexity_kind == 'nn' and printed and printed != (report.n_add, report.n_mul):
            note = f"reference counts {printed[0]} adds / {printed[1]} mults"
        rows.append({
            'canceller': key,
            'params': ' '.join(f"{k}={v}" for k, v in canceller.params.items()),
            'n_add': report.n_add,
            'n_mul': report.n_mul,
            'note': note,
        })
    return pd.DataFrame(rows, columns=['canceller', 'params', 'n_add', 'n_mul', 'note'])


# ---------------------------------------------------------------------------
# Design-space sweeps
# ---------------------------------------------------------------------------

def poly_cell(dataset: Dataset, L: int, P: int, linear_taps: int, input_shift: int) -> dict:
    model = fit_hybrid_poly(dataset.x_train, dataset.y_train, linear_taps, P, L, input_shift)
    report = complexity('poly', L=L, P=P)
    return {'L': L, 'P': P, 'c_db': c_db(dataset.y_test, predict_hybrid_poly(model, dataset.x_test)),
            'n_mul': report.n_mul, 'n_add': report.n_add}


def nn_cell(dataset: Dataset, L: int, N_l: int, N_h: int, cfg: TrainConfig) -> dict:
    model = train(dataset, L, N_l, N_h, cfg)
    report = complexity('nn', L=L, N_h=N_h, N_l=N_l)
    return {'L': L, 'N_h': N_h, 'c_db': c_db(dataset.y_test, predict_nn(model, dataset.x_test)),
            'n_mul': report.n_mul, 'n_add': report.n_add}


def run_cells(cell: Callable, tasks: List[tuple], workers: int = 1) -> List[dict]:
    """Evaluate ``cell(*task)`` for every task; results come back in task order."""
    if workers > 1 and len(tasks) > 1:
        with Pool(min(workers, len(tasks))) as pool:
            return pool.starmap(cell, tasks)
    return [cell(*task) for task in tasks]


def select_operating_point(cells: List[dict], tolerance_db: float) -> dict:
    """Fewest multiplications among the cells within ``tolerance_db`` of the best C_dB.

    Ties go to the higher C_dB, then to the earlier cell.
    """
    if not cells:
        raise GridError("cannot select an operating point from an empty grid")
    best = max(cell['c_db'] for cell in cells)
    eligible = [cell for cell in cells if cell['c_db'] >= best - tolerance_db]
    return min(eligible, key=lambda cell: (cell['n_mul'], -cell['c_db']))


def select_matching_point(cells: List[dict], target_db: float) -> Optional[dict]:
    """Fewest multiplications among the cells reaching ``target_db``, or None."""
    eligible = [cell for cell in cells if cell['c_db'] >= target_db]
    if not eligible:
        return None
    return min(eligible, key=lambda cell: (cell['n_mul'], -cell['c_db']))


def grid_matrix(cells: List[dict], column: str, value: str) -> pd.DataFrame:
    """Rows L, one column per ``column`` value."""
    frame = pd.DataFrame(cells).pivot(index='L', columns=column, values=value)
    frame.columns.name = None
    return frame.sort_index().sort_index(axis=1)


@dataclass
class SweepResult:
    poly_cells: List[dict]
    nn_cells: List[dict]
    selection: Dict[str, Optional[dict]] = field(default_factory=dict)


def design_sweep(run_config, dataset: Dataset) -> SweepResult:
    section = run_config.section('sweep')
    poly = run_config.section('poly')
    if not section['poly_L'] or not section['poly_P']:
        raise GridError("the polynomial grid is empty (sweep.poly_L / sweep.poly_P)")
    if not section['nn_L'] or not section['nn_N_h']:
        raise GridError("the NN grid is empty (sweep.nn_L / sweep.nn_N_h)")

    poly_tasks = [(dataset, L, P, poly['linear_taps'], poly['input_shift'])
                  for L in section['poly_L'] for P in section['poly_P']]
    train_cfg = get_canceller('equi_nn', run_config).train_config(epochs=section['nn_epochs'])
    nn_tasks = [(dataset, L, section['nn_N_l'], N_h, train_cfg)
                for L in section['nn_L'] for N_h in section['nn_N_h']]

    logger.info(f"Sweeping {len(poly_tasks)} polynomial and {len(nn_tasks)} NN configurations "
                f"on {section['workers']} worker(s)")
    poly_cells = run_cells(poly_cell, poly_tasks, section['workers'])
    nn_cells = run_cells(nn_cell, nn_tasks, section['workers'])

    tolerance = section['tolerance_db']
    poly_point = select_operating_point(poly_cells, tolerance)
    selection = {
        'poly': poly_point,
        'peak_nn': select_operating_point(nn_cells, tolerance),
        'equi_nn': select_matching_point(nn_cells, poly_point['c_db']),
    }
    if selection['equi_nn'] is None:
        logger.warning(f"⚠ No NN in the grid reaches the polynomial canceller's {poly_point['c_db']:.2f} dB")
    return SweepResult(poly_cells, nn_cells, selection)


# ---------------------------------------------------------------------------
# Bit-width sweep
# ---------------------------------------------------------------------------

def quantization_sweep(models: Dict[str, tuple], dataset: Dataset, q_values: Sequence[int],
                       tolerance_db: float) -> pd.DataFrame:
    """Fixed-point C_dB per canceller and Q; ``selected`` marks the smallest Q within tolerance of float."""
    x, y = dataset.x_test, dataset.y_test
    rows = []
    for key, (canceller, model) in models.items():
        reference = c_db(y, canceller.predict(model, x))
        chosen = None
        for Q in q_values:
            fixed = c_db(y, canceller.predict_fxp(model, x, Q))
            within = reference - fixed <= tolerance_db
            selected = within and chosen is None
            if selected:
                chosen = Q
            rows.append({'canceller': key, 'Q': Q, 'c_db': fixed, 'c_db_float': reference,
                         'loss_db': reference - fixed, 'within_tolerance': within, 'selected': selected})
        if chosen is None:
            logger.warning(f"⚠ {canceller.name}: no bit-width within {tolerance_db} dB of floating point")
        else:
            logger.info(f"✅ {canceller.name}: {chosen} bits are within {tolerance_db} dB of floating point")
    return pd.DataFrame(rows, columns=['canceller', 'Q', 'c_db', 'c_db_float', 'loss_db',
                                       'within_tolerance', 'selected'])


# ---------------------------------------------------------------------------
# Hardware
# ---------------------------------------------------------------------------

@dataclass
class HardwareResult:
    reports: Dict[str, HwReport]
    checks: Dict[str, dict]
    schedule: Optional[pd.DataFrame] = None


def _check(report: HwReport, bit_exact: bool) -> dict:
    return {
        'bit_exact': bit_exact,
        'throughput_matches': report.simulated_throughput == report.throughput,
        'latency_within_bound': (report.simulated_latency <= report.latency
                                 if report.bound_applies and report.latency is not None else None),
    }


def simulate_poly_hardware(canceller, model, x: ComplexSeq) -> Tuple[HwReport, dict, pd.DataFrame]:
    cfg = canceller.hw_config()
    qm = quantize_hybrid_poly(model, canceller.fxp_format()).poly
    simulator = PolySimulator(qm, cfg)
    out, report = simulator.run(x)
    re, im = apply_poly_fxp(qm, *quantize_input(x, qm.fmt, qm.input_shift), lanes=cfg.N_CPE)
    expected = dequantize_array(re, qm.fmt) + 1j * dequantize_array(im, qm.fmt)
    return report, _check(report, bool(np.array_equal(out.samples, expected))), simulator.schedule_frame()


def simulate_nn_hardware(canceller, model, x: ComplexSeq) -> Tuple[HwReport, dict]:
    cfg = canceller.hw_config()
    qm = quantize_nn(model, canceller.fxp_format())
    out, report = NNPipelineSimulator(qm, cfg).run(x)
    expected = predict_nn_fxp(qm, x, lanes=cfg.lanes, linear_lanes=cfg.N_CPE_linear)
    return report, _check(report, bool(np.array_equal(out.samples, expected.samples)))


def hardware_study(run_config, dataset: Dataset, models: Dict[str, tuple]) -> HardwareResult:
    """Analytical reports and cycle simulations on the first test samples."""
    n = min(run_config.section('hardware')['sim_samples'], len(dataset.x_test))
    x = dataset.x_test.segment(0, n)
    result = HardwareResult({}, {})
    for key in HARDWARE_KINDS:
        if key not in models:
            continue
        canceller, model = models[key]
        if key == 'poly':
            report, check, result.schedule = simulate_poly_hardware(canceller, model, x)
        else:
            report, check = simulate_nn_hardware(canceller, model, x)
        result.reports[key] = report
        result.checks[key] = check
        if not check['bit_exact']:
            logger.error(f"❌ {canceller.name}: simulator output differs from the fixed-point reference")
    return result


def hardware_table(result: HardwareResult) -> pd.DataFrame:
    """Report rows side by side, one column per canceller."""
    frame = pd.DataFrame({key: report.rows() for key, report in result.reports.items()})
    frame.index.name = 'metric'
    return frame.fillna('-')


def reports_payload(result: HardwareResult) -> dict:
    return {key: dict(report.to_dict(), checks=result.checks[key]) for key, report in result.reports.items()}


def output_path(run_config, name: str) -> Path:
    return run_config.output_dir / name


def analytical_study(run_config) -> HardwareResult:
    """Closed-form reports only; no models or data needed."""
    result = HardwareResult({}, {})
    for key in HARDWARE_KINDS:
        canceller = get_canceller(key, run_config)
        cfg = canceller.hw_config()
        result.reports[key] = poly_hw_report(cfg) if key == 'poly' else nn_pipeline_report(cfg)
        result.checks[key] = {}
    return result
