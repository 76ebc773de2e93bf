"""
Closed-form cycle models of the two canceller architectures.

NN canceller: one macro-pipeline stage per layer, neuron-by-neuron (NBN)
and input-by-input (IBI) schedules alternating from the first layer. Each
stage has N_PE real MAC units; a register between the PE array and the
output interface adds one cycle.

Polynomial canceller: N_CPE complex MAC units weight the basis functions
while N_CPE_BF complex multipliers compute the fresh sample's basis
functions; products that only need buffered basis functions are scheduled
first so the two overlap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from metrics.complexity import complexity
from nncanc.network import layer_sizes
from polycanc.basis import bf_per_sample, check_order, n_bf
from sic.errors import ConfigError, ConstraintViolation

from .reports import HwReport, StageReport

logger = logging.getLogger(__name__)

NBN = 'NBN'
IBI = 'IBI'
SCHEDULES = (NBN, IBI)


class ScheduleConstraintError(ConstraintViolation):
    """PE count or stage ordering the architecture cannot realise."""


@dataclass(frozen=True)
class StageConfig:
    schedule: str
    NE_in: int
    NE_out: int
    N_PE: int
    Q: int = 16

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        for name in ('NE_in', 'NE_out', 'N_PE', 'Q'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.N_PE > self.NE_in * self.NE_out:
            raise ScheduleConstraintError(
                f"{self.schedule} stage has {self.N_PE} PEs but only NE_in*NE_out = {self.NE_in * self.NE_out} products"
            )
        if self.schedule == NBN and self.N_PE > self.NE_in and self.N_PE % self.NE_in:
            raise ScheduleConstraintError(
                f"NBN stage with N_PE > NE_(l-1) needs N_PE = k*NE_(l-1); got N_PE={self.N_PE}, NE_(l-1)={self.NE_in}"
            )
        if self.schedule == IBI and self.N_PE > self.NE_out and self.N_PE % self.NE_out:
            raise ScheduleConstraintError(
                f"IBI stage with N_PE > NE_l needs N_PE = k*NE_l; got N_PE={self.N_PE}, NE_l={self.NE_out}"
            )

    @property
    def parallel(self) -> int:
        """Neurons per cycle (NBN) or inputs per cycle (IBI) when the PEs outnumber one row."""
        if self.schedule == NBN:
            return self.N_PE // self.NE_in if self.N_PE > self.NE_in else 1
        return self.N_PE // self.NE_out if self.N_PE > self.NE_out else 1

    @property
    def lanes(self) -> int:
        """Accumulators that share one neuron's sum."""
        if self.schedule == NBN:
            return min(self.N_PE, self.NE_in)
        return self.parallel

    @property
    def cycles(self) -> int:
        if self.schedule == NBN:
            if self.N_PE <= self.NE_in:
                return self.NE_out * math.ceil(self.NE_in / self.N_PE)
            return math.ceil(self.NE_out / self.parallel)
        if self.N_PE <= self.NE_out:
            return self.NE_in * math.ceil(self.NE_out / self.N_PE)
        return math.ceil(self.NE_in / self.parallel)


@dataclass(frozen=True)
class StageTiming:
    latency: int
    first_latency: int
    throughput: Fraction


def stage_latency(stage: StageConfig) -> StageTiming:
    """(L_l, L_l,first, T_l) of one macro-pipeline stage."""
    cycles = stage.cycles
    if stage.schedule == NBN:
        first = math.ceil(stage.NE_in / stage.N_PE) + 1
    else:
        first = cycles + 1
    return StageTiming(cycles + 1, first, Fraction(1, cycles))


@dataclass(frozen=True)
class Step:
    """Work of one stage cycle: every (neuron, input) product of the listed indices."""

    neurons: Tuple[int, ...]
    inputs: Tuple[int, ...]


@lru_cache(maxsize=None)
def stage_steps(stage: StageConfig) -> Tuple[Step, ...]:
    """Cycle-by-cycle work plan of a stage; its length is ``stage.cycles``."""
    steps = []
    if stage.schedule == NBN:
        if stage.N_PE <= stage.NE_in:
            for neuron in range(stage.NE_out):
                for start in range(0, stage.NE_in, stage.N_PE):
                    steps.append(Step((neuron,), tuple(range(start, min(start + stage.N_PE, stage.NE_in)))))
        else:
            k = stage.parallel
            for start in range(0, stage.NE_out, k):
                steps.append(Step(tuple(range(start, min(start + k, stage.NE_out))), tuple(range(stage.NE_in))))
    else:
        if stage.N_PE <= stage.NE_out:
            for i in range(stage.NE_in):
                for start in range(0, stage.NE_out, stage.N_PE):
                    steps.append(Step(tuple(range(start, min(start + stage.N_PE, stage.NE_out))), (i,)))
        else:
            k = stage.parallel
            for start in range(0, stage.NE_in, k):
                steps.append(Step(tuple(range(stage.NE_out)), tuple(range(start, min(start + k, stage.NE_in)))))
    return tuple(steps)


def output_offsets(stage: StageConfig) -> List[int]:
    """Cycle, relative to an unstalled stage start, at which each output becomes readable."""
    steps = stage_steps(stage)
    if stage.schedule == IBI:
        return [len(steps) + 1] * stage.NE_out
    last = {}
    for index, step in enumerate(steps):
        for neuron in step.neurons:
            last[neuron] = index
    return [last[neuron] + 2 for neuron in range(stage.NE_out)]


def consumes_in_time(producer: StageConfig, consumer: StageConfig) -> bool:
    """True when an IBI stage started at the producer's first-output time never waits for input."""
    ready = output_offsets(producer)
    start = stage_latency(producer).first_latency
    return all(max(ready[i] for i in step.inputs) <= start + index
               for index, step in enumerate(stage_steps(consumer)))


def memory_layout(stage: StageConfig) -> dict:
    """Weight memory: one N_PE*Q-bit word per cycle. Bias memory: k*Q bits (NBN) or NE_l*Q bits (IBI)."""
    if stage.schedule == NBN:
        bias_bits, bias_words = stage.parallel * stage.Q, math.ceil(stage.NE_out / stage.parallel)
    else:
        bias_bits, bias_words = stage.NE_out * stage.Q, 1
    return {
        'weight_word_bits': stage.N_PE * stage.Q,
        'weight_words': stage.cycles,
        'bias_word_bits': bias_bits,
        'bias_words': bias_words,
    }


def stage_report(stage: StageConfig) -> StageReport:
    timing = stage_latency(stage)
    return StageReport(stage.schedule, stage.NE_in, stage.NE_out, stage.N_PE, stage.lanes, stage.cycles,
                       timing.latency, timing.first_latency, timing.throughput, **memory_layout(stage))


@dataclass(frozen=True)
class HwConfig:
    """NN canceller hardware: one stage per layer plus the linear FIR's complex PEs."""

    L: int
    stages: Tuple[StageConfig, ...]
    N_CPE_linear: int = 1
    clock_hz: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'stages', tuple(self.stages))
        if not self.stages:
            raise ConfigError("a pipeline needs at least one stage")
        if not 1 <= self.N_CPE_linear <= self.L:
            raise ScheduleConstraintError(f"N_CPE_linear must be in [1, L={self.L}], got {self.N_CPE_linear}")
        if self.stages[0].NE_in != 2 * self.L or self.stages[-1].NE_out != 2:
            raise ScheduleConstraintError(
                f"stages map {self.stages[0].NE_in} -> {self.stages[-1].NE_out} values, expected {2 * self.L} -> 2"
            )
        for index, stage in enumerate(self.stages):
            expected = SCHEDULES[index % 2]
            if stage.schedule != expected:
                raise ScheduleConstraintError(f"stage {index + 1} must be {expected}: NBN and IBI alternate from NBN")
            if index and stage.NE_in != self.stages[index - 1].NE_out:
                raise ScheduleConstraintError(
                    f"stage {index + 1} expects {stage.NE_in} inputs, stage {index} produces {self.stages[index - 1].NE_out}"
                )

    @classmethod
    def for_network(cls, L: int, N_l: int, N_h: int, n_pe: Sequence[int], N_CPE_linear: int = 1, Q: int = 16,
                    clock_hz: Optional[float] = None) -> 'HwConfig':
        sizes = layer_sizes(L, N_l, N_h)
        if len(n_pe) != len(sizes) - 1:
            raise ConfigError(f"need {len(sizes) - 1} PE counts (one per layer), got {len(n_pe)}")
        stages = [StageConfig(SCHEDULES[i % 2], sizes[i], sizes[i + 1], n_pe[i], Q) for i in range(len(n_pe))]
        return cls(L, tuple(stages), N_CPE_linear, clock_hz)

    @property
    def N_l(self) -> int:
        return len(self.stages) - 1

    @property
    def N_h(self) -> int:
        return self.stages[0].NE_out if self.N_l else 0

    @property
    def lanes(self) -> Tuple[int, ...]:
        return tuple(stage.lanes for stage in self.stages)

    @property
    def linear_cycles(self) -> int:
        return math.ceil(self.L / self.N_CPE_linear)


def nn_pipeline_report(cfg: HwConfig) -> HwReport:
    """Analytical throughput and, for an even number of stages, the closed-form latency.

    T = min(T_linear, min_l T_l). The latency sums L_first of each NBN stage
    and L_l of the IBI stage behind it, and takes the maximum with the
    linear canceller's ceil(L / N_CPE_linear) cycles.
    """
    stages = [stage_report(stage) for stage in cfg.stages]
    throughput = min([Fraction(1, cfg.linear_cycles)] + [stage.throughput for stage in stages])

    latency = None
    bound_applies = False
    if len(cfg.stages) % 2 == 0:
        pipeline = sum(stages[i].first_latency + stages[i + 1].latency for i in range(0, len(stages), 2))
        latency = max(cfg.linear_cycles, pipeline)
        bound_applies = all(consumes_in_time(cfg.stages[i], cfg.stages[i + 1]) for i in range(0, len(stages), 2))
    else:
        logger.info(f"⚠ {len(cfg.stages)} stages: no closed-form latency, simulator value only")

    memory = {
        'weight_bits': sum(s.weight_word_bits * s.weight_words for s in stages),
        'bias_bits': sum(s.bias_word_bits * s.bias_words for s in stages),
    }
    return HwReport(
        architecture='nn',
        throughput=throughput,
        latency=latency,
        op_counts=complexity('nn', L=cfg.L, N_h=cfg.N_h, N_l=cfg.N_l),
        stages=stages,
        details={'linear_latency': cfg.linear_cycles, 'linear_throughput': Fraction(1, cfg.linear_cycles)},
        memory=memory,
        bound_applies=bound_applies,
        clock_hz=cfg.clock_hz,
    )


@dataclass(frozen=True)
class PolyHwConfig:
    P: int
    L: int
    N_CPE: int
    N_CPE_BF: int
    Q: int = 25
    clock_hz: Optional[float] = None

    def __post_init__(self):
        check_order(self.P)
        if self.L < 1 or self.N_CPE < 1 or self.N_CPE_BF < 1 or self.Q < 1:
            raise ConfigError("L, N_CPE, N_CPE_BF and Q must all be >= 1")
        if self.N_CPE_BF > (self.P + 1) // 2:
            raise ScheduleConstraintError(
                f"N_CPE_BF must be <= (P+1)/2 = {(self.P + 1) // 2}, got {self.N_CPE_BF}"
            )
        if self.N_CPE > n_bf(self.L, self.P):
            raise ScheduleConstraintError(f"N_CPE={self.N_CPE} exceeds N_BF={n_bf(self.L, self.P)}")

    @property
    def n_bf(self) -> int:
        return n_bf(self.L, self.P)


def bf_latency_new(P: int, N_CPE_BF: int) -> int:
    """1 + sum over odd p = 3..P of ceil((p+1) / (2 N_CPE_BF))."""
    return 1 + sum(math.ceil((p + 1) / (2 * N_CPE_BF)) for p in range(3, P + 1, 2))


def bf_latency_old(cfg: PolyHwConfig) -> int:
    """ceil((L-1)/L * N_BF / N_CPE): cycles of products on buffered basis functions."""
    return math.ceil((cfg.L - 1) * bf_per_sample(cfg.P) / cfg.N_CPE)


def poly_hw_report(cfg: PolyHwConfig) -> HwReport:
    new = bf_latency_new(cfg.P, cfg.N_CPE_BF)
    old = bf_latency_old(cfg)
    if old >= new:
        latency = math.ceil(cfg.n_bf / cfg.N_CPE) + 1
    else:
        latency = new + math.ceil(bf_per_sample(cfg.P) / cfg.N_CPE) + 1
    memory = {
        'parameter_words': math.ceil(cfg.n_bf / cfg.N_CPE),
        'parameter_word_bits': 2 * cfg.Q * cfg.N_CPE,
        'bf_buffer_entries': (cfg.L - 1) * bf_per_sample(cfg.P),
    }
    return HwReport(
        architecture='poly',
        throughput=Fraction(1, latency - 1),
        latency=latency,
        op_counts=complexity('poly', L=cfg.L, P=cfg.P),
        details={'L_BF_new': new, 'L_BF_old': old, 'N_BF': cfg.n_bf},
        memory=memory,
        clock_hz=cfg.clock_hz,
    )
