"""
Cycle-accurate simulators of the NN and polynomial canceller datapaths.

Both walk a cycle counter, execute the work the schedules allow in each cycle
and compute every value with the same fixed-point kernels as the reference
functions, so their outputs match ``predict_nn_fxp`` and ``apply_poly_fxp``
bit for bit. Window/sample ``s`` of the stream arrives at cycle ``s``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fxp.arithmetic import (
    OpCounter,
    add_raw,
    adder_tree,
    cmul3_raw,
    dequantize_array,
    mac_reduce,
    mul_raw,
    neg_raw,
    quantize_array,
    relu_raw,
)
from lincanc.canceller import delay_matrix
from nncanc.network import QuantizedNN, combine_fxp, quantized_windows
from polycanc.basis import BfBuffer, BfIndex, bf_indices
from polycanc.canceller import QuantizedPolyModel, quantize_input, schedule_order, term_labels
from sic.errors import ConfigError, ConstraintViolation, DataError
from sigmodel.signals import ComplexSeq

from .analytical import (
    NBN,
    HwConfig,
    PolyHwConfig,
    StageConfig,
    bf_latency_new,
    nn_pipeline_report,
    poly_hw_report,
    stage_steps,
)
from .reports import HwReport

logger = logging.getLogger(__name__)

DEADLOCK_FACTOR = 10
NOT_READY = np.iinfo(np.int64).max


class SimulationDeadlockError(ConstraintViolation):
    """No stage made progress for too long; ``trace`` says what each one waits for."""

    def __init__(self, message: str, cycle: int, trace: List[dict]):
        self.cycle = cycle
        self.trace = trace
        lines = '; '.join(f"stage {t['stage']}: sample {t['sample']} step {t['step']} ({t['waiting']})" for t in trace)
        super().__init__(f"{message} at cycle {cycle}: {lines}")


def average_period(times: Sequence[int]) -> Fraction:
    """Samples per cycle over the second half of the output times."""
    if len(times) < 2:
        raise DataError("throughput needs at least two simulated samples")
    mid = (len(times) - 1) // 2
    return Fraction(len(times) - 1 - mid, times[-1] - times[mid])


def ops_per_sample(counter: OpCounter, samples: int) -> Dict[str, Fraction]:
    return {'n_add': Fraction(counter.adds, samples), 'n_mul': Fraction(counter.mults, samples)}


# ---------------------------------------------------------------------------
# NN macro-pipeline
# ---------------------------------------------------------------------------

@dataclass
class StageState:
    """Run-time state of one macro-pipeline stage."""

    config: StageConfig
    weights: np.ndarray
    bias: np.ndarray
    relu: bool
    steps: Tuple = ()
    closes: Tuple = ()
    sample: Optional[int] = None
    step: int = 0
    finished: int = -1
    acc: Optional[np.ndarray] = None
    touched: Optional[np.ndarray] = None
    outputs: Dict[int, np.ndarray] = field(default_factory=dict)
    ready: Dict[int, np.ndarray] = field(default_factory=dict)
    waiting: str = 'idle'

    def __post_init__(self):
        self.steps = stage_steps(self.config)
        last = {}
        for index, step in enumerate(self.steps):
            for neuron in step.neurons:
                last[neuron] = index
        # Neurons whose sum is complete after each step.
        self.closes = tuple(np.array([j for j, s in sorted(last.items()) if s == index], dtype=np.int64)
                            for index in range(len(self.steps)))

    def begin(self, sample: int):
        shape = (self.config.NE_out, self.config.lanes)
        self.sample = sample
        self.step = 0
        self.acc = np.zeros(shape, dtype=np.int64)
        self.touched = np.zeros(shape, dtype=bool)
        self.outputs[sample] = np.zeros(self.config.NE_out, dtype=np.int64)
        self.ready[sample] = np.full(self.config.NE_out, NOT_READY, dtype=np.int64)

    def execute(self, inputs: np.ndarray, cycle: int, fmt, counter: OpCounter):
        """One cycle of MACs; each (neuron, lane) pair is touched at most once per step."""
        step = self.steps[self.step]
        neurons = np.array(step.neurons)
        idx = np.array(step.inputs)
        lanes = idx % self.config.lanes
        products = mul_raw(self.weights[np.ix_(neurons, idx)], inputs[idx], fmt, counter)
        rows, cols = np.ix_(neurons, lanes)
        touched = self.touched[rows, cols]
        summed = add_raw(self.acc[rows, cols], products, fmt)
        counter.record(adds=int(touched.sum()))
        self.acc[rows, cols] = np.where(touched, summed, products)
        self.touched[rows, cols] = True

        closing = self.closes[self.step]
        if closing.size:
            out = adder_tree([self.acc[closing, lane] for lane in range(self.config.lanes)
                              if self.touched[closing, lane].any()], fmt, counter)
            out = add_raw(out, self.bias[closing], fmt, counter)
            self.outputs[self.sample][closing] = relu_raw(out, counter) if self.relu else out
            self.ready[self.sample][closing] = cycle + 2
        self.step += 1


class NNPipelineSimulator:
    """Macro-pipeline of NBN/IBI stages plus the linear FIR unit.

    A stage starts sample ``s`` after it has finished ``s-1`` and the next
    stage has finished ``s-2``: the two output buffers between stages are
    used ping-pong. NBN stages wait for their whole input vector; IBI stages
    start early and stall each step until its inputs are readable. Outputs
    are readable two cycles after the cycle that computed them.
    """

    def __init__(self, qm: QuantizedNN, cfg: HwConfig):
        if (cfg.L, cfg.N_l, cfg.N_h) != (qm.L, qm.N_l, qm.N_h):
            raise ConfigError(
                f"hardware is L={cfg.L}, N_l={cfg.N_l}, N_h={cfg.N_h} but the model is "
                f"L={qm.L}, N_l={qm.N_l}, N_h={qm.N_h}"
            )
        self.qm = qm
        self.cfg = cfg
        self.report = nn_pipeline_report(cfg)
        last = len(cfg.stages) - 1
        self.stages = [StageState(stage, qm.weights[i], qm.biases[i], i < last) for i, stage in enumerate(cfg.stages)]
        self.counter = OpCounter()
        self.patience = DEADLOCK_FACTOR * (self.report.latency or sum(s.latency for s in self.report.stages))

    def _inputs(self, index: int, sample: int, windows: np.ndarray):
        """(values, ready cycle per value) of stage ``index``'s input vector for ``sample``."""
        if index == 0:
            return windows[sample], np.full(windows.shape[1], sample)
        upstream = self.stages[index - 1]
        if sample not in upstream.ready:
            return None, None
        return upstream.outputs[sample], upstream.ready[sample]

    def _may_start(self, index: int, sample: int, n_samples: int, cycle: int) -> Optional[str]:
        stage = self.stages[index]
        if sample >= n_samples:
            return 'done'
        if sample > cycle:
            return 'input not arrived'
        if index + 1 < len(self.stages) and self.stages[index + 1].finished < sample - 2:
            return 'output buffer busy'
        if stage.config.schedule == NBN and index > 0:
            ready = self.stages[index - 1].ready.get(sample)
            if ready is None or ready.max() > cycle:
                return 'input vector incomplete'
        return None

    def _tick(self, index: int, windows: np.ndarray, cycle: int) -> bool:
        stage = self.stages[index]
        n_samples = windows.shape[0]
        if stage.sample is None:
            reason = self._may_start(index, stage.finished + 1, n_samples, cycle)
            if reason:
                stage.waiting = reason
                return False
            stage.begin(stage.finished + 1)
        values, ready = self._inputs(index, stage.sample, windows)
        step = stage.steps[stage.step]
        if values is None or ready[list(step.inputs)].max() > cycle:
            stage.waiting = 'step inputs not ready'
            return False
        stage.execute(values, cycle, self.qm.fmt, self.counter)
        if stage.step == len(stage.steps):
            if index < len(self.stages) - 1:
                stage.outputs.pop(stage.sample - 2, None)
                stage.ready.pop(stage.sample - 2, None)
            stage.finished = stage.sample
            stage.sample = None
        stage.waiting = 'running'
        return True

    def _linear(self, x_re: np.ndarray, x_im: np.ndarray, n_samples: int):
        """Non-pipelined complex MAC unit: one sample per ceil(L / N_CPE_linear) cycles."""
        lin = self.qm.lin
        lanes = self.cfg.N_CPE_linear
        win_re, win_im = delay_matrix(x_re, lin.L), delay_matrix(x_im, lin.L)
        out_re = np.zeros(x_re.size, dtype=np.int64)
        out_im = np.zeros(x_re.size, dtype=np.int64)
        times = []
        free = 0
        for s in range(n_samples):
            start = max(s, free)
            p_re, p_im = cmul3_raw(lin.re, lin.im, win_re[s], win_im[s], lin.fmt, self.counter)
            out_re[s + lin.L - 1] = mac_reduce(p_re, lanes, lin.fmt, self.counter)
            out_im[s + lin.L - 1] = mac_reduce(p_im, lanes, lin.fmt, self.counter)
            free = start + self.cfg.linear_cycles
            times.append(free)
        return out_re, out_im, times

    def run(self, x: ComplexSeq) -> Tuple[ComplexSeq, HwReport]:
        qm = self.qm
        if len(x) < qm.L + 1:
            raise DataError(f"the simulator needs at least {qm.L + 1} samples, got {len(x)}")
        windows = quantized_windows(qm, x)
        n_samples = windows.shape[0]
        out_stage = self.stages[-1]

        cycle = 0
        idle = 0
        while out_stage.finished < n_samples - 1:
            progressed = False
            for index in reversed(range(len(self.stages))):
                progressed |= self._tick(index, windows, cycle)
            idle = 0 if progressed else idle + 1
            if idle > self.patience:
                raise SimulationDeadlockError("NN pipeline stalled", cycle, self.trace())
            cycle += 1

        nn_out = np.stack([out_stage.outputs[s] for s in range(n_samples)])
        lin_re, lin_im, lin_times = self._linear(quantize_array(x.samples.real, qm.fmt),
                                                 quantize_array(x.samples.imag, qm.fmt), n_samples)
        re, im = combine_fxp(qm, lin_re, lin_im, nn_out, self.counter)
        times = [max(int(out_stage.ready[s].max()), lin_times[s]) for s in range(n_samples)]

        out = np.zeros(len(x), dtype=np.complex128)
        out[qm.L - 1:] = dequantize_array(re, qm.fmt) + 1j * dequantize_array(im, qm.fmt)
        report = self.report.with_simulation(times[0], average_period(times), ops_per_sample(self.counter, n_samples))
        logger.info(f"✅ NN pipeline: {n_samples} samples in {cycle} cycles, latency {times[0]}, "
                    f"throughput {report.simulated_throughput}")
        return x.like(out, valid_from=qm.L - 1), report

    def trace(self) -> List[dict]:
        return [{'stage': index + 1, 'sample': stage.sample if stage.sample is not None else stage.finished + 1,
                 'step': stage.step, 'waiting': stage.waiting}
                for index, stage in enumerate(self.stages)]


def simulate_nn_pipeline(qm: QuantizedNN, cfg: HwConfig, x: ComplexSeq) -> Tuple[ComplexSeq, HwReport]:
    return NNPipelineSimulator(qm, cfg).run(x)


# ---------------------------------------------------------------------------
# Polynomial canceller
# ---------------------------------------------------------------------------

class PolySimulator:
    """N_CPE complex MAC units fed by an N_CPE_BF-wide basis-function unit.

    CPE ``k`` owns the schedule terms ``t`` with ``t % N_CPE == k`` and runs
    them in ascending order, one per cycle. Terms on buffered basis functions
    are ready at once; terms on the fresh sample wait until the basis-function
    unit has finished (``bf_latency_new`` cycles). A sample's output is
    readable two cycles after its last MAC and the next sample starts the
    cycle after that MAC.
    """

    def __init__(self, qm: QuantizedPolyModel, cfg: PolyHwConfig):
        if (cfg.P, cfg.L) != (qm.P, qm.L):
            raise ConfigError(f"hardware is P={cfg.P}, L={cfg.L} but the model is P={qm.P}, L={qm.L}")
        self.qm = qm
        self.cfg = cfg
        self.report = poly_hw_report(cfg)
        self.order = schedule_order(qm.P, qm.L)
        self.labels = term_labels(qm.P, qm.L)
        self.n_old = (qm.L - 1) * len(bf_indices(qm.P))
        # P = 1 needs no recurrence: x and conj(x) are ready at once.
        self.new_ready = bf_latency_new(cfg.P, cfg.N_CPE_BF) if qm.P > 1 else 0
        self.queues = [list(range(k, len(self.order), cfg.N_CPE)) for k in range(cfg.N_CPE)]
        self.counter = OpCounter()
        self.bf_counter = OpCounter()
        self.bf_lines = 0
        self.issue: List[dict] = []

    def basis_unit(self, x_re: int, x_im: int) -> np.ndarray:
        """Fresh basis functions as raw ``(2, width)``, N_CPE_BF recurrence lines per cycle after x^2."""
        fmt = self.qm.fmt
        values = {BfIndex(1, 1): (x_re, x_im), BfIndex(1, 0): (x_re, int(neg_raw(x_im, fmt)))}
        if self.qm.P > 1:
            x2 = cmul3_raw(x_re, x_im, x_re, x_im, fmt, self.bf_counter)
            for p in range(3, self.qm.P + 1, 2):
                lines = list(range((p + 1) // 2, p + 1))
                for start in range(0, len(lines), self.cfg.N_CPE_BF):
                    for q in lines[start:start + self.cfg.N_CPE_BF]:
                        prev_re, prev_im = values[BfIndex(p - 2, q - 2)]
                        re, im = cmul3_raw(x2[0], x2[1], prev_re, prev_im, fmt, self.bf_counter)
                        values[BfIndex(p, q)] = (int(re), int(im))
                        values[BfIndex(p, p - q)] = (int(re), int(neg_raw(im, fmt)))
                        self.bf_lines += 1
        indices = bf_indices(self.qm.P)
        return np.array([[values[i][0] for i in indices], [values[i][1] for i in indices]], dtype=np.int64)

    def _sample(self, fresh: np.ndarray, buffer: BfBuffer, record: bool) -> Tuple[int, int, int]:
        """Run one output through the CPEs; returns (re, im, last MAC cycle relative to the start)."""
        qm = self.qm
        lanes = self.cfg.N_CPE
        acc = np.zeros((2, lanes), dtype=np.int64)
        touched = np.zeros(lanes, dtype=bool)
        heads = [0] * lanes
        cycle = 0
        last = 0
        remaining = len(self.order)
        while remaining:
            active = [k for k in range(lanes) if heads[k] < len(self.queues[k])
                      and (self.queues[k][heads[k]] < self.n_old or cycle >= self.new_ready)]
            if active:
                terms = [self.queues[k][heads[k]] for k in active]
                bf = np.stack([fresh[:, i] if l == 0 else buffer.delayed(l)[:, i]
                               for i, l in (self.order[t] for t in terms)], axis=1)
                coeff_re = np.array([qm.re[self.order[t]] for t in terms])
                coeff_im = np.array([qm.im[self.order[t]] for t in terms])
                p_re, p_im = cmul3_raw(coeff_re, coeff_im, bf[0], bf[1], qm.fmt, self.counter)
                k = np.array(active)
                was = touched[k]
                sum_re = add_raw(acc[0, k], p_re, qm.fmt)
                sum_im = add_raw(acc[1, k], p_im, qm.fmt)
                self.counter.record(adds=2 * int(was.sum()))
                acc[0, k] = np.where(was, sum_re, p_re)
                acc[1, k] = np.where(was, sum_im, p_im)
                touched[k] = True
                if record:
                    self.issue.extend({'cpe': int(cpe), 'cycle': cycle, 'term': t, 'p': self.labels[t][0],
                                       'q': self.labels[t][1], 'l': self.labels[t][2]}
                                      for cpe, t in zip(active, terms))
                for cpe in active:
                    heads[cpe] += 1
                remaining -= len(active)
                last = cycle
            cycle += 1
        used = [lane for lane in range(lanes) if touched[lane]]
        re = adder_tree([acc[0, lane] for lane in used], qm.fmt, self.counter)
        im = adder_tree([acc[1, lane] for lane in used], qm.fmt, self.counter)
        return int(re), int(im), last

    def run(self, x: ComplexSeq) -> Tuple[ComplexSeq, HwReport]:
        qm = self.qm
        if len(x) < qm.L + 1:
            raise DataError(f"the simulator needs at least {qm.L + 1} samples, got {len(x)}")
        x_re, x_im = quantize_input(x, qm.fmt, qm.input_shift)
        buffer = BfBuffer(qm.L, qm.P, dtype=np.int64, channels=2)
        out_re = np.zeros(len(x), dtype=np.int64)
        out_im = np.zeros(len(x), dtype=np.int64)
        times = []
        start = 0
        for n in range(len(x)):
            fresh = self.basis_unit(int(x_re[n]), int(x_im[n]))
            if n >= qm.L - 1:
                start = max(start, n - (qm.L - 1))
                out_re[n], out_im[n], last = self._sample(fresh, buffer, record=n == qm.L - 1)
                times.append(start + last + 2)
                start += last + 1
            buffer.push(fresh)

        valid = len(times)
        ops = ops_per_sample(self.counter, valid)
        ops['n_mul_bf'] = Fraction(self.bf_lines, len(x))
        report = self.report.with_simulation(times[0], average_period(times), ops)
        logger.info(f"✅ Polynomial canceller: {valid} samples, latency {times[0]}, "
                    f"throughput {report.simulated_throughput}")
        out = np.zeros(len(x), dtype=np.complex128)
        out[qm.L - 1:] = dequantize_array(out_re[qm.L - 1:], qm.fmt) + 1j * dequantize_array(out_im[qm.L - 1:], qm.fmt)
        return x.like(out, valid_from=qm.L - 1), report

    def schedule_frame(self) -> pd.DataFrame:
        """CPE issue slots of the first valid output, one row per MAC."""
        return pd.DataFrame(self.issue, columns=['cpe', 'cycle', 'term', 'p', 'q', 'l'])


def simulate_poly(qm: QuantizedPolyModel, cfg: PolyHwConfig, x: ComplexSeq) -> Tuple[ComplexSeq, HwReport]:
    return PolySimulator(qm, cfg).run(x)
