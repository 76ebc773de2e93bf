import hashlib
import json
import tempfile
from fractions import Fraction
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from lincanc.canceller import LinModel, fit_linear
from metrics.complexity import complexity
from nncanc.network import NNModel
from nncanc.serializers import NNModelSerializer
from nncanc.training import HISTORY_COLUMNS
from sic.errors import ConfigError
from sigmodel.datasets import load_dataset

from .cancellers import ModelMismatchError, get_all_cancellers, get_canceller
from .config import config_sha256, deep_merge, parse_override, resolve_config
from .models import ExperimentRun
from .outputs import read_csv, write_csv, write_json, write_model
from .pipeline import (
    DATASET_FILE,
    GridError,
    complexity_table,
    evaluate_model,
    fit_model,
    grid_matrix,
    obtain_dataset,
    select_matching_point,
    select_operating_point,
)

SMALL = {
    'dataset': {'n_samples': 4096, 'n_carriers': 64},
    'nn': {'train': {'epochs': 2}},
    'psd': {'nfft': 64},
    'sweep': {'poly_L': [1, 2], 'poly_P': [1, 3], 'nn_L': [1, 2], 'nn_N_h': [2, 4], 'nn_epochs': 1},
    'hardware': {'sim_samples': 64},
}


def cell(L, other, c, n_mul):
    return {'L': L, 'P': other, 'c_db': c, 'n_mul': n_mul}


class ConfigTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, name, text):
        path = Path(self.tmp.name) / name
        path.write_text(text)
        return str(path)

    def test_defaults_are_valid(self):
        cfg = resolve_config()
        self.assertEqual(cfg.seed, 0)
        self.assertEqual(len(cfg.sha256), 64)
        self.assertEqual(cfg.section('dataset')['n_samples'], 20480)
        self.assertEqual((cfg.section('poly')['L'], cfg.section('poly')['P']), (3, 7))
        self.assertEqual(cfg.section('nn')['equi'], {'L': 2, 'N_l': 1, 'N_h': 8})
        self.assertEqual(cfg.section('hardware')['poly'], {'N_CPE': 10, 'N_CPE_BF': 3})

    def test_default_pa_has_three_memory_taps(self):
        chain = resolve_config().tx_chain()
        self.assertEqual((chain.pa_order, chain.pa_memory), (7, 3))
        self.assertEqual(sorted(l for _, l in chain.pa_coeffs), [0, 0, 0, 0, 1, 2])

    def test_resolution_order(self):
        path = self.write('cfg.json', json.dumps({'seed': 3, 'nn': {'train': {'epochs': 7}}}))
        cfg = resolve_config(path)
        self.assertEqual((cfg.seed, cfg.section('nn')['train']['epochs']), (3, 7))
        self.assertEqual(cfg.section('nn')['train']['batch_size'], 32)
        cfg = resolve_config(path, ['nn.train.epochs=9'], seed=11)
        self.assertEqual((cfg.seed, cfg.section('nn')['train']['epochs']), (11, 9))

    def test_parse_override(self):
        self.assertEqual(parse_override('a.b=3'), (['a', 'b'], 3))
        self.assertEqual(parse_override('a=[1, 2]'), (['a'], [1, 2]))
        self.assertEqual(parse_override('a=abc'), (['a'], 'abc'))
        with self.assertRaises(ConfigError):
            parse_override('a.b')
        with self.assertRaises(ConfigError):
            parse_override('a..b=1')

    def test_unknown_key_names_its_path(self):
        with self.assertRaisesMessage(ConfigError, 'nn.equi.width'):
            resolve_config(overrides=['nn.equi.width=3'])

    def test_invalid_value_names_its_path(self):
        with self.assertRaisesMessage(ConfigError, 'poly.P'):
            resolve_config(overrides=['poly.P=4'])
        with self.assertRaisesMessage(ConfigError, 'quant.q_min'):
            resolve_config(overrides=['quant.q_min=20', 'quant.q_max=10'])

    def test_override_into_a_value_fails(self):
        with self.assertRaises(ConfigError):
            resolve_config(overrides=['seed.value=1'])

    def test_bad_json_reports_line(self):
        path = self.write('bad.json', '{\n  "seed": 1,\n  oops\n}')
        with self.assertRaisesMessage(ConfigError, 'line 3'):
            resolve_config(path)

    def test_missing_config_file(self):
        with self.assertRaises(ConfigError):
            resolve_config(str(Path(self.tmp.name) / 'absent.json'))

    def test_hash_ignores_output_dir_only(self):
        a = resolve_config(out='/tmp/one')
        b = resolve_config(out='/tmp/two')
        self.assertEqual(a.sha256, b.sha256)
        self.assertNotEqual(a.sha256, resolve_config(seed=1).sha256)
        self.assertEqual(a.output_dir, Path('/tmp/one'))

    def test_hash_is_canonical(self):
        self.assertEqual(config_sha256({'b': 1, 'a': [1, 2]}), config_sha256({'a': [1, 2], 'b': 1}))
        expected = hashlib.sha256(b'{"a":[1,2],"b":1}').hexdigest()
        self.assertEqual(config_sha256({'b': 1, 'a': [1, 2]}), expected)

    def test_deep_merge_does_not_alias(self):
        base = {'a': {'b': 1, 'c': 2}}
        merged = deep_merge(base, {'a': {'b': 5}})
        self.assertEqual(merged, {'a': {'b': 5, 'c': 2}})
        self.assertEqual(base, {'a': {'b': 1, 'c': 2}})


class SelectionTests(SimpleTestCase):

    def test_unique_optimum(self):
        cells = [cell(2, 3, 20.0, 36), cell(3, 7, 30.5, 180), cell(4, 9, 31.0, 360), cell(2, 9, 29.0, 120)]
        self.assertEqual(select_operating_point(cells, 1.0), cells[1])

    def test_zero_tolerance_takes_the_maximum(self):
        cells = [cell(2, 3, 20.0, 36), cell(4, 9, 31.0, 360)]
        self.assertEqual(select_operating_point(cells, 0.0), cells[1])

    def test_ties_prefer_higher_cancellation(self):
        cells = [cell(2, 5, 30.2, 90), cell(3, 3, 30.6, 90), cell(4, 3, 30.8, 300)]
        self.assertEqual(select_operating_point(cells, 1.0), cells[1])

    def test_empty_grid(self):
        with self.assertRaises(GridError):
            select_operating_point([], 1.0)
        self.assertTrue(issubclass(GridError, ConfigError))

    def test_matching_point(self):
        cells = [cell(2, 8, 29.0, 54), cell(2, 12, 31.0, 82), cell(4, 12, 31.5, 150)]
        self.assertEqual(select_matching_point(cells, 30.5), cells[1])
        self.assertIsNone(select_matching_point(cells, 40.0))

    def test_grid_matrix(self):
        cells = [cell(L, P, 10.0 * L + P, 3 * L * P) for L in (3, 2) for P in (5, 3)]
        frame = grid_matrix(cells, 'P', 'n_mul')
        self.assertEqual(list(frame.index), [2, 3])
        self.assertEqual(list(frame.columns), [3, 5])
        self.assertEqual(frame.loc[3, 5], 45)


class RegistryTests(SimpleTestCase):

    def setUp(self):
        self.cfg = resolve_config()

    def test_all_kinds(self):
        keys = [entry['key'] for entry in get_all_cancellers(self.cfg)]
        self.assertEqual(keys, ['linear', 'poly', 'equi_nn', 'peak_nn'])
        with self.assertRaises(ConfigError):
            get_canceller('volterra', self.cfg)

    def test_complexity_table(self):
        frame = complexity_table(self.cfg).set_index('canceller')
        self.assertEqual((frame.loc['poly', 'n_add'], frame.loc['poly', 'n_mul']), (418, 180))
        self.assertEqual((frame.loc['equi_nn', 'n_add'], frame.loc['equi_nn', 'n_mul']), (70, 54))
        self.assertEqual((frame.loc['peak_nn', 'n_add'], frame.loc['peak_nn', 'n_mul']), (402, 352))
        self.assertEqual((frame.loc['linear', 'n_add'], frame.loc['linear', 'n_mul']), (26, 12))
        self.assertIn('82', frame.loc['equi_nn', 'note'])
        self.assertEqual(frame.loc['poly', 'note'], '')

    def test_mismatched_models_rejected(self):
        with self.assertRaisesMessage(ModelMismatchError, 'L=3'):
            get_canceller('linear', self.cfg).check(LinModel([1.0, 0.0, 0.0]))
        with self.assertRaisesMessage(ModelMismatchError, 'N_h=6'):
            get_canceller('equi_nn', self.cfg).check(NNModel.zeros(2, 1, 6))
        get_canceller('equi_nn', self.cfg).check(NNModel.zeros(2, 1, 8))

    def test_hardware_presets(self):
        self.assertEqual(get_canceller('equi_nn', self.cfg).hw_config().lanes, (4, 2))
        self.assertEqual(get_canceller('poly', self.cfg).hw_config().N_CPE, 10)


class OutputTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.provenance = {'command': 'test', 'config_sha256': 'ab' * 32, 'seed': 0}

    def test_csv_header_carries_hash(self):
        path = write_csv(Path(self.tmp.name) / 'a.csv', pd.DataFrame({'x': [1, 2], 'y': [0.5, 0.25]}),
                         self.provenance)
        self.assertEqual(path.read_text().splitlines()[0], f"# config_sha256={'ab' * 32}")
        frame = read_csv(path)
        self.assertEqual(list(frame.columns), ['x', 'y'])
        self.assertEqual(list(frame['y']), [0.5, 0.25])

    def test_json_provenance_and_fractions(self):
        path = write_json(Path(self.tmp.name) / 'a.json', {'throughput': Fraction(1, 7)}, self.provenance)
        document = json.loads(path.read_text())
        self.assertEqual(document['throughput'], '1/7')
        self.assertEqual(document['provenance']['config_sha256'], 'ab' * 32)


class DefaultDatasetTests(SimpleTestCase):
    """Cancellation of the four cancellers on the default configuration."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        run_config = resolve_config()
        cls.dataset = obtain_dataset(run_config)
        cls.c_db = {}
        for key in ('linear', 'poly', 'equi_nn', 'peak_nn'):
            canceller = get_canceller(key, run_config)
            result, _ = evaluate_model(canceller, fit_model(canceller, cls.dataset), cls.dataset)
            cls.c_db[key] = result['c_db_total']

    def test_default_size(self):
        self.assertEqual(len(self.dataset), 20480)

    def test_nonlinear_cancellers_beat_linear(self):
        for key in ('poly', 'equi_nn', 'peak_nn'):
            self.assertGreaterEqual(self.c_db[key], self.c_db['linear'] + 5.0, key)

    def test_peak_network_at_least_matches_equi(self):
        self.assertGreaterEqual(self.c_db['peak_nn'], self.c_db['equi_nn'])


class CommandTests(TestCase):
    """End-to-end runs of the sic_* commands on a small dataset."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.config = self.root / 'small.json'
        self.config.write_text(json.dumps(SMALL))
        self.out = self.root / 'out'

    def call(self, name, *args, out=None):
        stdout = StringIO()
        call_command(name, '--config', str(self.config), '--out', str(out or self.out), *args,
                     stdout=stdout, stderr=StringIO())
        return stdout.getvalue()

    def read_json(self, name, out=None):
        return json.loads(((out or self.out) / name).read_text())

    def test_gen_is_deterministic(self):
        first, second = self.root / 'first', self.root / 'second'
        output = self.call('sic_gen', '--seed', '7', out=first)
        self.call('sic_gen', '--seed', '7', out=second)
        self.assertIn('PAPR', output)
        for name in (DATASET_FILE, DATASET_FILE + '.json', 'dataset_summary.json'):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())
        self.assertEqual(len(load_dataset(first / DATASET_FILE)), 4096)
        summary = self.read_json('dataset_summary.json', first)
        self.assertEqual(summary['provenance']['seed'], 7)
        self.assertGreater(summary['snr_db'], 30.0)

    def test_gen_creates_nested_output_dir(self):
        nested = self.root / 'a' / 'b' / 'c'
        self.call('sic_gen', out=nested)
        self.assertTrue((nested / DATASET_FILE).exists())

    def test_uncreatable_output_dir(self):
        (self.root / 'blocker').write_text('')
        with self.assertRaises(CommandError) as ctx:
            self.call('sic_gen', out=self.root / 'blocker' / 'sub')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_config_error_exit_code_and_ledger(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('sic_gen', '--set', 'poly.P=4')
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('poly.P', str(ctx.exception))
        run = ExperimentRun.objects.get()
        self.assertEqual((run.command, run.status, run.exit_code), ('sic_gen', 'failed', 2))

    def test_ledger_records_success(self):
        self.call('sic_gen')
        run = ExperimentRun.objects.get()
        self.assertEqual((run.status, run.exit_code), ('succeeded', 0))
        self.assertEqual(run.config_sha256, resolve_config(str(self.config)).sha256)
        self.assertEqual(run.summary['n_samples'], 4096)
        self.assertTrue(str(run).startswith('✓ sic_gen'))

    def test_fit_then_eval(self):
        self.call('sic_gen')
        self.call('sic_fit')
        fit = self.read_json('poly_fit.json')
        self.assertGreaterEqual(fit['c_db_train'], fit['c_db_total'] - 1.0)
        self.assertEqual(fit['complexity'], complexity('poly', L=3, P=7).as_dict())

        output = self.call('sic_eval', '--kinds', 'linear', 'poly')
        self.assertIn('Complexity per sample', output)
        report = self.read_json('eval.json')
        cancellers = report['cancellers']
        self.assertGreater(cancellers['poly']['c_db_total'], cancellers['linear']['c_db_total'])
        self.assertAlmostEqual(cancellers['poly']['c_db_total'], fit['c_db_total'], places=9)
        self.assertEqual(cancellers['linear']['complexity'], complexity('linear', L=4).as_dict())

        psd = read_csv(self.out / 'psd.csv')
        self.assertEqual(list(psd.columns), ['freq_hz', 'no_cancellation', 'linear', 'poly', 'noise_floor'])
        self.assertEqual(len(psd), 64)
        sha = report['provenance']['config_sha256']
        for name in ('psd.csv', 'eval.csv', 'complexity.csv'):
            self.assertEqual((self.out / name).read_text().splitlines()[0], f'# config_sha256={sha}')

    def test_eval_of_null_network_equals_linear_only(self):
        self.call('sic_gen')
        dataset = load_dataset(self.out / DATASET_FILE)
        cfg = resolve_config(str(self.config))
        canceller = get_canceller('equi_nn', cfg)
        model = NNModel.zeros(2, 1, 8, lin=fit_linear(dataset.x_train, dataset.y_train, 2))
        write_model(self.out, 'equi_nn', canceller, model, cfg.provenance('test'))

        self.call('sic_eval', '--kinds', 'equi_nn')
        result = self.read_json('eval.json')['cancellers']['equi_nn']
        self.assertAlmostEqual(result['c_db_total'], result['c_db_linear'], places=9)
        self.assertAlmostEqual(result['c_db_nonlinear'], 0.0, places=9)

    def test_eval_rejects_mismatched_model(self):
        self.call('sic_gen')
        cfg = resolve_config(str(self.config))
        write_model(self.out, 'equi_nn', get_canceller('equi_nn', cfg), NNModel.zeros(3, 1, 8), cfg.provenance('test'))
        with self.assertRaises(CommandError) as ctx:
            self.call('sic_eval', '--kinds', 'equi_nn')
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn('L=3', str(ctx.exception))

    def test_train_writes_model_and_history(self):
        self.call('sic_train', '--variant', 'equi')
        history = read_csv(self.out / 'equi_nn_history.csv')
        self.assertEqual(list(history.columns), HISTORY_COLUMNS)
        self.assertEqual(list(history['epoch']), [1, 2])
        document = self.read_json('equi_nn.json')
        self.assertEqual(document['kind'], 'equi_nn')
        model = NNModelSerializer.load(document['model'])
        self.assertEqual((model.L, model.N_l, model.N_h), (2, 1, 8))

    def test_sweep(self):
        output = self.call('sic_sweep')
        self.assertIn('Selected operating points', output)
        c_db = pd.read_csv(self.out / 'poly_c_db.csv', comment='#', index_col=0)
        n_mul = pd.read_csv(self.out / 'poly_n_mul.csv', comment='#', index_col=0)
        self.assertEqual(c_db.shape, (2, 2))
        for L in (1, 2):
            for P in (1, 3):
                self.assertEqual(n_mul.loc[L, str(P)], complexity('poly', L=L, P=P).n_mul)
        nn_mul = pd.read_csv(self.out / 'nn_n_mul.csv', comment='#', index_col=0)
        self.assertEqual(nn_mul.loc[2, '4'], complexity('nn', L=2, N_h=4).n_mul)
        selection = self.read_json('selection.json')['selection']
        self.assertEqual(set(selection), {'poly', 'peak_nn', 'equi_nn'})
        cells = read_csv(self.out / 'poly_cells.csv')
        best = cells['c_db'].max()
        eligible = cells[cells['c_db'] >= best - 1.0]
        self.assertEqual(selection['poly']['n_mul'], eligible['n_mul'].min())

    def test_sweep_rejects_empty_grid(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('sic_sweep', '--set', 'sweep.poly_P=[]')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_qsweep(self):
        self.call('sic_qsweep', '--kinds', 'linear', 'poly', '--set', 'poly.P=3', '--set', 'poly.L=2')
        frame = read_csv(self.out / 'qsweep.csv')
        self.assertEqual(sorted(frame['Q'].unique()), list(range(4, 29)))
        for key, rows in frame.groupby('canceller'):
            rows = rows.set_index('Q')
            self.assertLess(abs(rows.loc[28, 'loss_db']), 0.1)
            self.assertGreaterEqual(rows.loc[4, 'loss_db'], 3.0)
            self.assertEqual(int(rows['selected'].sum()), 1)
            self.assertTrue(rows.loc[rows['selected'], 'within_tolerance'].all())
        smallest = self.read_json('qsweep.json')['smallest_Q']
        self.assertEqual(set(smallest), {'linear', 'poly'})

    def test_hwreport_analytical(self):
        self.call('sic_hwreport', '--analytical-only')
        reports = self.read_json('hwreport.json')['reports']
        self.assertEqual(reports['equi_nn']['throughput_samples_per_cycle'], '1/4')
        self.assertEqual(reports['peak_nn']['throughput_samples_per_cycle'], '1/7')
        self.assertEqual(reports['poly']['latency_cycles'], 8)
        self.assertEqual(reports['poly']['throughput_samples_per_cycle'], '1/7')
        self.assertFalse((self.out / 'poly_schedule.csv').exists())

    def test_hwreport_simulation_matches(self):
        output = self.call('sic_hwreport')
        self.assertIn('Throughput (samples/cycle)', output)
        reports = self.read_json('hwreport.json')['reports']
        for key in ('poly', 'equi_nn', 'peak_nn'):
            self.assertTrue(reports[key]['checks']['bit_exact'], key)
            self.assertTrue(reports[key]['checks']['throughput_matches'], key)
        self.assertTrue(reports['equi_nn']['checks']['latency_within_bound'])
        self.assertEqual(reports['poly']['simulated_latency_cycles'], 8)
        schedule = read_csv(self.out / 'poly_schedule.csv')
        self.assertEqual(len(schedule), 60)

    def assertSameOutputs(self, first, second):
        files = sorted(p.relative_to(first) for p in first.rglob('*') if p.is_file())
        self.assertEqual(files, sorted(p.relative_to(second) for p in second.rglob('*') if p.is_file()))
        for name in files:
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), str(name))

    def test_full_run_is_byte_identical(self):
        runs = (self.root / 'first', self.root / 'second')
        for out in runs:
            for command in ('sic_gen', 'sic_fit', 'sic_train', 'sic_eval', 'sic_qsweep', 'sic_hwreport'):
                self.call(command, out=out)
        self.assertTrue((runs[0] / 'peak_nn_history.csv').exists())
        self.assertTrue((runs[0] / 'hwreport.json').exists())
        self.assertSameOutputs(*runs)

    def test_sweep_is_byte_identical_for_each_worker_count(self):
        cells = {}
        for workers in (1, 2):
            runs = (self.root / f'w{workers}-first', self.root / f'w{workers}-second')
            for out in runs:
                self.call('sic_sweep', '--set', f'sweep.workers={workers}', out=out)
            self.assertSameOutputs(*runs)
            cells[workers] = [read_csv(runs[0] / f'{family}_cells.csv') for family in ('poly', 'nn')]
        for serial, pooled in zip(cells[1], cells[2]):
            pd.testing.assert_frame_equal(serial, pooled)
