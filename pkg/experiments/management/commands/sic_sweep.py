"""
Design-space sweep of the polynomial and NN cancellers.

Run with: python manage.py sic_sweep [--dataset FILE] [--set sweep.workers=4] [--out DIR]
"""

import pandas as pd

from experiments.outputs import write_csv, write_json
from experiments.pipeline import design_sweep, grid_matrix
from experiments.runner import ExperimentCommand, add_dataset_argument


class Command(ExperimentCommand):
    help = 'Evaluate C_dB and multiplications over the (L, P) and (L, N_h) grids and select operating points'
    command_name = 'sic_sweep'

    def add_command_arguments(self, parser):
        add_dataset_argument(parser)

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        dataset = self.dataset(run_config, options)
        result = design_sweep(run_config, dataset)

        out = run_config.output_dir
        for family, cells, column in (('poly', result.poly_cells, 'P'), ('nn', result.nn_cells, 'N_h')):
            write_csv(out / f'{family}_c_db.csv', grid_matrix(cells, column, 'c_db'), provenance, index=True)
            write_csv(out / f'{family}_n_mul.csv', grid_matrix(cells, column, 'n_mul'), provenance, index=True)
            write_csv(out / f'{family}_cells.csv', pd.DataFrame(cells), provenance)
        write_json(out / 'selection.json', {
            'tolerance_db': run_config.section('sweep')['tolerance_db'],
            'selection': result.selection,
        }, provenance)

        self.heading('Selected operating points')
        for name, cell in result.selection.items():
            if cell is None:
                self.stdout.write(self.style.WARNING(f'⚠ {name}: no configuration qualifies'))
                continue
            params = ', '.join(f'{k}={v}' for k, v in cell.items() if k not in ('c_db', 'n_mul', 'n_add'))
            self.stdout.write(f"  {name:8s} {params}: {cell['c_db']:.2f} dB, {cell['n_mul']} mults/sample")
        return {'selection': result.selection}
