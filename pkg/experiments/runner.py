"""
Common plumbing of the ``sic_*`` management commands: configuration flags,
output directory, run ledger and the mapping of domain errors to exit codes.
"""

import logging

from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from django.utils import timezone

from sic.errors import exit_code_for

from .config import resolve_config
from .models import ExperimentRun
from .outputs import ensure_output_dir, plain
from .pipeline import DATASET_FILE, obtain_dataset

logger = logging.getLogger(__name__)


class ExperimentCommand(BaseCommand):
    """Subclasses implement ``add_command_arguments`` and ``run``; ``run`` returns the ledger summary."""

    command_name = ''

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file merged over config/defaults.json')
        parser.add_argument('--set', action='append', default=[], dest='overrides', metavar='KEY=VALUE',
                            help='Override one value, e.g. --set nn.train.epochs=5 (repeatable)')
        parser.add_argument('--seed', type=int, help='Random seed (overrides the configuration)')
        parser.add_argument('--out', help='Output directory (default: $SIC_OUTPUT_ROOT/run-<hash>)')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, run_config, **options) -> dict:
        raise NotImplementedError('subclasses of ExperimentCommand must provide a run() method')

    def handle(self, *args, **options):
        entry = self._ledger(command=self.command_name)
        try:
            run_config = resolve_config(options.get('config'), options.get('overrides'),
                                        options.get('seed'), options.get('out'))
            output_dir = ensure_output_dir(run_config.output_dir)
            self._update(entry, config_sha256=run_config.sha256, seed=run_config.seed, output_dir=str(output_dir))
            summary = self.run(run_config, **options)
        except ValueError as exc:
            code = exit_code_for(exc)
            self._update(entry, status='failed', exit_code=code, error=str(exc), finished_at=timezone.now())
            if code == 1:
                raise
            self.stderr.write(self.style.ERROR(f"❌ {exc}"))
            raise CommandError(str(exc), returncode=code) from exc
        except Exception as exc:
            self._update(entry, status='failed', exit_code=1, error=str(exc), finished_at=timezone.now())
            raise
        self._update(entry, status='succeeded', exit_code=0, summary=plain(summary or {}),
                     finished_at=timezone.now())
        self.stdout.write(self.style.SUCCESS(f"\n✓ Results written to {output_dir}"))

    # The ledger is bookkeeping only: a missing or unmigrated database never fails a run.

    def _ledger(self, **fields):
        try:
            return ExperimentRun.objects.create(**fields)
        except DatabaseError as exc:
            logger.warning(f"⚠ Run ledger unavailable: {exc}")
            return None

    def _update(self, entry, **fields):
        if entry is None:
            return
        for name, value in fields.items():
            setattr(entry, name, value)
        try:
            entry.save(update_fields=list(fields))
        except DatabaseError as exc:
            logger.warning(f"⚠ Could not update run ledger: {exc}")

    # Output helpers shared by the commands.

    def heading(self, text: str):
        self.stdout.write(self.style.SUCCESS(f"\n{text}"))

    def table(self, frame, index: bool = False):
        self.stdout.write(frame.to_string(index=index))

    def dataset(self, run_config, options):
        """``--dataset``, else the dataset already in the output directory, else a freshly generated one."""
        path = options.get('dataset')
        if not path:
            candidate = run_config.output_dir / DATASET_FILE
            path = candidate if candidate.exists() else None
        return obtain_dataset(run_config, path)

    def models_dir(self, run_config, options):
        return options.get('models') or run_config.output_dir


def add_dataset_argument(parser):
    parser.add_argument('--dataset', help=f'Dataset file (default: {DATASET_FILE} in the output directory, '
                                          'generated from the configuration if absent)')


def add_models_argument(parser):
    parser.add_argument('--models', help='Directory holding <kind>.json model files (default: the output directory)')
