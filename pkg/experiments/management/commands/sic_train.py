"""
Train the NN cancellers.

Run with: python manage.py sic_train [--variant equi|peak|all] [--dataset FILE] [--out DIR]
"""

from experiments.cancellers import get_canceller
from experiments.outputs import write_csv, write_json, write_model
from experiments.pipeline import evaluate_model, fit_model
from experiments.runner import ExperimentCommand, add_dataset_argument
from nncanc.training import TrainingHistory, checkpoint_mse

VARIANTS = ('equi', 'peak')


class Command(ExperimentCommand):
    help = 'Train the equi and peak NN cancellers and write their model files and training logs'
    command_name = 'sic_train'

    def add_command_arguments(self, parser):
        parser.add_argument('--variant', choices=VARIANTS + ('all',), default='all')
        add_dataset_argument(parser)

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        dataset = self.dataset(run_config, options)
        variants = VARIANTS if options['variant'] == 'all' else (options['variant'],)

        summary = {}
        for variant in variants:
            key = f'{variant}_nn'
            canceller = get_canceller(key, run_config)
            history = TrainingHistory()
            model = fit_model(canceller, dataset, history)
            result, _ = evaluate_model(canceller, model, dataset)
            if history.checkpoints:
                result['final_checkpoint_test_mse'] = checkpoint_mse(model, history.checkpoints[-1],
                                                                     dataset.x_test, dataset.y_test)
            write_model(run_config.output_dir, key, canceller, model, provenance)
            write_csv(run_config.output_dir / f'{key}_history.csv', history.frame(), provenance)
            write_json(run_config.output_dir / f'{key}_train.json', result, provenance)
            summary[key] = result
            self.stdout.write(self.style.SUCCESS(
                f"✓ {canceller.name} ({' '.join(f'{k}={v}' for k, v in canceller.params.items())}): "
                f"test C_dB {result['c_db_total']:.2f} dB, non-linear gain {result['c_db_nonlinear']:.2f} dB"
            ))
        return summary
