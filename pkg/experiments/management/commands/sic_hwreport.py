"""
Hardware report of the polynomial and NN cancellers.

Run with: python manage.py sic_hwreport [--analytical-only] [--dataset FILE] [--models DIR] [--out DIR]
"""

from experiments.cancellers import HARDWARE_KINDS
from experiments.outputs import write_csv, write_json
from experiments.pipeline import (
    analytical_study,
    complexity_table,
    hardware_study,
    hardware_table,
    obtain_models,
    reports_payload,
)
from experiments.runner import ExperimentCommand, add_dataset_argument, add_models_argument
from hwmodel.reports import fraction_text, reports_table, stages_table


class Command(ExperimentCommand):
    help = 'Throughput, latency and memory of the hardware presets, analytical and cycle-simulated'
    command_name = 'sic_hwreport'

    def add_command_arguments(self, parser):
        parser.add_argument('--analytical-only', action='store_true',
                            help='Skip the cycle simulations (no models or dataset needed)')
        add_dataset_argument(parser)
        add_models_argument(parser)

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        if options['analytical_only']:
            result = analytical_study(run_config)
        else:
            dataset = self.dataset(run_config, options)
            models = obtain_models(run_config, dataset, HARDWARE_KINDS, self.models_dir(run_config, options))
            result = hardware_study(run_config, dataset, models)

        out = run_config.output_dir
        table = hardware_table(result)
        complexity = complexity_table(run_config)
        write_csv(out / 'hwreport.csv', table, provenance, index=True)
        write_csv(out / 'complexity.csv', complexity, provenance)
        write_json(out / 'hwreport.json', {'reports': reports_payload(result)}, provenance)
        if result.schedule is not None:
            write_csv(out / 'poly_schedule.csv', result.schedule, provenance)

        self.heading('Implementation results')
        self.stdout.write(reports_table(result.reports))
        for key, report in result.reports.items():
            if report.stages:
                self.heading(f'{key} pipeline stages')
                self.stdout.write(stages_table(report))
        self.heading('Complexity per sample')
        self.table(complexity)

        for key, check in result.checks.items():
            if not check:
                continue
            report = result.reports[key]
            if check['bit_exact'] and check['throughput_matches']:
                self.stdout.write(self.style.SUCCESS(
                    f"✓ {key}: simulation is bit-exact, throughput {fraction_text(report.simulated_throughput)} "
                    f"as predicted, latency {report.simulated_latency} cycles"
                ))
            else:
                self.stdout.write(self.style.ERROR(
                    f"❌ {key}: bit-exact={check['bit_exact']}, simulated throughput "
                    f"{fraction_text(report.simulated_throughput)} vs {fraction_text(report.throughput)}"
                ))
        return {key: {'throughput': report.throughput, 'latency': report.latency,
                      'simulated_throughput': report.simulated_throughput,
                      'simulated_latency': report.simulated_latency}
                for key, report in result.reports.items()}
