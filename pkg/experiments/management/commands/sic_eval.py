"""
Evaluate the cancellers on the test set.

Run with: python manage.py sic_eval [--kinds linear poly ...] [--dataset FILE] [--models DIR] [--out DIR]

Model files found in --models are used as they are; missing ones are fitted
or trained first.
"""

import pandas as pd

from experiments.cancellers import CANCELLER_REGISTRY
from experiments.outputs import write_csv, write_json
from experiments.pipeline import complexity_table, dataset_summary, evaluate_model, obtain_models, psd_table
from experiments.runner import ExperimentCommand, add_dataset_argument, add_models_argument


class Command(ExperimentCommand):
    help = 'Report C_dB (total, linear-only, non-linear increment), op counts and PSD curves per canceller'
    command_name = 'sic_eval'

    def add_command_arguments(self, parser):
        parser.add_argument('--kinds', nargs='+', choices=list(CANCELLER_REGISTRY), default=list(CANCELLER_REGISTRY))
        add_dataset_argument(parser)
        add_models_argument(parser)

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        dataset = self.dataset(run_config, options)
        models = obtain_models(run_config, dataset, options['kinds'], self.models_dir(run_config, options))

        results = {}
        estimates = {}
        for key, (canceller, model) in models.items():
            results[key], estimates[key] = evaluate_model(canceller, model, dataset)

        frame = pd.DataFrame([
            {
                'canceller': key,
                'c_db_total': result['c_db_total'],
                'c_db_linear': result['c_db_linear'],
                'c_db_nonlinear': result['c_db_nonlinear'],
                'c_db_train': result['c_db_train'],
                'c_db_fixed': result['c_db_fixed'],
                'Q': result['Q'],
                'n_add': result['complexity']['n_add'],
                'n_mul': result['complexity']['n_mul'],
            }
            for key, result in results.items()
        ])
        complexity = complexity_table(run_config)
        write_csv(run_config.output_dir / 'eval.csv', frame, provenance)
        write_csv(run_config.output_dir / 'complexity.csv', complexity, provenance)
        write_csv(run_config.output_dir / 'psd.csv', psd_table(run_config, dataset, estimates), provenance)
        write_json(run_config.output_dir / 'eval.json', {
            'dataset': dataset_summary(dataset),
            'cancellers': results,
            'complexity_table': complexity.to_dict(orient='records'),
        }, provenance)

        self.heading('Cancellation on the test set (dB)')
        self.table(frame.round(2))
        self.heading('Complexity per sample')
        self.table(complexity)
        return {'cancellers': results}
