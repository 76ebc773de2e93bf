"""
Fit the least-squares cancellers (linear FIR and linear + polynomial).

Run with: python manage.py sic_fit [--kind linear|poly|all] [--dataset FILE] [--out DIR]
"""

from experiments.cancellers import get_canceller
from experiments.outputs import write_json, write_model
from experiments.pipeline import evaluate_model, fit_model
from experiments.runner import ExperimentCommand, add_dataset_argument

FIT_KINDS = ('linear', 'poly')


class Command(ExperimentCommand):
    help = 'Fit the linear and polynomial cancellers by least squares and write their model files'
    command_name = 'sic_fit'

    def add_command_arguments(self, parser):
        parser.add_argument('--kind', choices=FIT_KINDS + ('all',), default='all')
        add_dataset_argument(parser)

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        dataset = self.dataset(run_config, options)
        kinds = FIT_KINDS if options['kind'] == 'all' else (options['kind'],)

        summary = {}
        for key in kinds:
            canceller = get_canceller(key, run_config)
            model = fit_model(canceller, dataset)
            result, _ = evaluate_model(canceller, model, dataset)
            write_model(run_config.output_dir, key, canceller, model, provenance)
            write_json(run_config.output_dir / f'{key}_fit.json', result, provenance)
            summary[key] = result
            self.stdout.write(self.style.SUCCESS(
                f"✓ {canceller.name}: test C_dB {result['c_db_total']:.2f} dB "
                f"(training {result['c_db_train']:.2f} dB, {result['complexity']['n_mul']} mults/sample)"
            ))
        return summary
