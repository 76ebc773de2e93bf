"""
Generate the synthetic full-duplex dataset.

Run with: python manage.py sic_gen [--config FILE] [--set KEY=VALUE] [--seed N] [--out DIR]
"""

from experiments.outputs import write_json
from experiments.pipeline import DATASET_FILE, dataset_summary, obtain_dataset
from experiments.runner import ExperimentCommand
from sigmodel.datasets import save_dataset


class Command(ExperimentCommand):
    help = 'Generate the OFDM / transmitter-chain dataset and print its PAPR, power and SNR'
    command_name = 'sic_gen'

    def run(self, run_config, **options):
        provenance = run_config.provenance(self.command_name)
        dataset = obtain_dataset(run_config)
        summary = dataset_summary(dataset)
        path = save_dataset(run_config.output_dir / DATASET_FILE, dataset, provenance)
        write_json(run_config.output_dir / 'dataset_summary.json', summary, provenance)

        self.heading(f'✓ Dataset written to {path}')
        self.stdout.write(f"  Samples:      {summary['n_samples']} (training {summary['split_index']})")
        self.stdout.write(f"  PAPR:         {summary['papr_db']:.2f} dB")
        self.stdout.write(f"  TX power:     {summary['tx_power']:.4f}")
        self.stdout.write(f"  RX power:     {summary['rx_power']:.4f}")
        if summary['snr_db'] is not None:
            self.stdout.write(f"  SNR:          {summary['snr_db']:.2f} dB")
        else:
            self.stdout.write(self.style.WARNING('  SNR:          noiseless'))
        return summary
