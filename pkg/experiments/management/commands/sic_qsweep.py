"""
Fixed-point bit-width sweep.

Run with: python manage.py sic_qsweep [--kinds ...] [--dataset FILE] [--models DIR] [--out DIR]
"""

from experiments.cancellers import CANCELLER_REGISTRY
from experiments.outputs import write_csv, write_json
from experiments.pipeline import obtain_models, quantization_sweep
from experiments.runner import ExperimentCommand, add_dataset_argument, add_models_argument


class Command(ExperimentCommand):
    help = 'Fixed-point C_dB of each canceller for every datapath width Q in [quant.q_min, quant.q_max]'
    command_name = 'sic_qsweep'

    def add_command_arguments(self, parser):
        parser.add_argument('--kinds', nargs='+', choices=list(CANCELLER_REGISTRY), default=list(CANCELLER_REGISTRY))
        add_dataset_argument(parser)
        add_models_argument(parser)

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        quant = run_config.section('quant')
        dataset = self.dataset(run_config, options)
        models = obtain_models(run_config, dataset, options['kinds'], self.models_dir(run_config, options))
        frame = quantization_sweep(models, dataset, range(quant['q_min'], quant['q_max'] + 1), quant['tolerance_db'])

        selected = {
            key: (int(rows.loc[rows['selected'], 'Q'].iloc[0]) if rows['selected'].any() else None)
            for key, rows in frame.groupby('canceller', sort=False)
        }
        write_csv(run_config.output_dir / 'qsweep.csv', frame, provenance)
        write_json(run_config.output_dir / 'qsweep.json', {
            'tolerance_db': quant['tolerance_db'],
            'smallest_Q': selected,
            'float_c_db': {key: float(rows['c_db_float'].iloc[0]) for key, rows in frame.groupby('canceller', sort=False)},
        }, provenance)

        self.heading(f"Smallest Q within {quant['tolerance_db']} dB of floating point")
        for key, Q in selected.items():
            if Q is None:
                self.stdout.write(self.style.WARNING(f'⚠ {key}: none in [{quant["q_min"]}, {quant["q_max"]}]'))
            else:
                self.stdout.write(f'  {key:8s} Q={Q}')
        return {'smallest_Q': selected}
