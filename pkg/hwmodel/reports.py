"""
Hardware report objects and their JSON / text renderings.

Throughputs are exact fractions (samples per cycle). The text table uses the
row names of the usual implementation-results tables so reports from several
cancellers can be read side by side.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional

import pandas as pd

from metrics.complexity import ComplexityReport


def fraction_text(value: Optional[Fraction]) -> Optional[str]:
    if value is None:
        return None
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class StageReport:
    schedule: str
    NE_in: int
    NE_out: int
    N_PE: int
    lanes: int
    cycles: int
    latency: int
    first_latency: int
    throughput: Fraction
    weight_word_bits: int
    weight_words: int
    bias_word_bits: int
    bias_words: int

    def to_dict(self) -> dict:
        data = asdict(self)
        data['throughput'] = fraction_text(self.throughput)
        return data


@dataclass(frozen=True)
class HwReport:
    architecture: str
    throughput: Fraction
    latency: Optional[int]
    op_counts: ComplexityReport
    stages: List[StageReport] = field(default_factory=list)
    details: Dict[str, object] = field(default_factory=dict)
    memory: Dict[str, int] = field(default_factory=dict)
    simulated_latency: Optional[int] = None
    simulated_throughput: Optional[Fraction] = None
    simulated_ops: Optional[Dict[str, Fraction]] = None
    bound_applies: bool = True
    clock_hz: Optional[float] = None

    def with_simulation(self, latency: int, throughput: Fraction, ops: Dict[str, Fraction]) -> 'HwReport':
        return replace(self, simulated_latency=latency, simulated_throughput=throughput, simulated_ops=ops)

    def ns(self, cycles: Optional[int]) -> Optional[float]:
        if cycles is None or not self.clock_hz:
            return None
        return cycles / self.clock_hz * 1e9

    def to_dict(self) -> dict:
        data = {
            'architecture': self.architecture,
            'throughput_samples_per_cycle': fraction_text(self.throughput),
            'latency_cycles': self.latency,
            'simulated_latency_cycles': self.simulated_latency,
            'simulated_throughput_samples_per_cycle': fraction_text(self.simulated_throughput),
            'simulated_ops_per_sample': (
                {key: fraction_text(value) for key, value in self.simulated_ops.items()}
                if self.simulated_ops is not None else None
            ),
            'bound_applies': self.bound_applies,
            'op_counts': self.op_counts.as_dict(),
            'stages': [stage.to_dict() for stage in self.stages],
            'details': {key: fraction_text(v) if isinstance(v, Fraction) else v for key, v in self.details.items()},
            'memory': dict(self.memory),
        }
        if self.clock_hz:
            data['clock_hz'] = self.clock_hz
            data['latency_ns'] = self.ns(self.latency)
            data['throughput_msamples_per_s'] = float(self.throughput) * self.clock_hz / 1e6
        return data

    def rows(self) -> Dict[str, object]:
        rows = {
            'Throughput (samples/cycle)': fraction_text(self.throughput),
            'Latency (cycles)': self.latency if self.latency is not None else '-',
            'Simulated throughput (samples/cycle)': fraction_text(self.simulated_throughput) or '-',
            'Simulated latency (cycles)': self.simulated_latency if self.simulated_latency is not None else '-',
            'Real additions / sample': self.op_counts.n_add,
            'Real multiplications / sample': self.op_counts.n_mul,
        }
        if self.clock_hz:
            rows['Latency (ns)'] = f"{self.ns(self.latency):.1f}" if self.latency is not None else '-'
            rows['Throughput (MSamples/s)'] = f"{float(self.throughput) * self.clock_hz / 1e6:.1f}"
        return rows


def reports_table(reports: Dict[str, HwReport]) -> str:
    """One column per canceller, one row per figure of merit."""
    frame = pd.DataFrame({name: report.rows() for name, report in reports.items()})
    return frame.fillna('-').to_string()


def stages_table(report: HwReport) -> str:
    frame = pd.DataFrame([stage.to_dict() for stage in report.stages])
    return frame.to_string(index=False)
