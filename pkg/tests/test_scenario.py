import copy
import json
import math
import os
import shutil
import tempfile
import unittest

import numpy as np

import fwmcat.scenario as scenario
from fwmcat.errors import ConfigurationError
from fwmcat.fock import FockSpace, build_collapse_ops, build_H_fwm, CouplingSet
from fwmcat.states import PureState, fidelity, read_state


ALPHA = {'abs2': 1.0, 'phase': math.pi / 4}

UNITARY_CONFIG = {
    'hamiltonian': 'int2',
    'alpha1': ALPHA,
    'alpha2': ALPHA,
    'truncation': {'max_occ': [8, 8, 10], 'total_cap': 12, 'max_loss': 1e-3},
    'tau_max': 3.0,
    'tau_step': 0.01,
    'solver': {'method': 'unitary'},
    'outputs': {'wigner_grid': [-5, 5, 41, -5, 5, 41]}
}

DAMPED_CONFIG = {
    'hamiltonian': 'int1',
    'couplings': {'gamma1': 0.2, 'gamma2': 0.2, 'gamma3': 0.2},
    'alpha1': ALPHA,
    'alpha2': ALPHA,
    'truncation': {'max_occ': [4, 4, 6], 'total_cap': 6, 'max_loss': 0.05},
    'tau_max': 1.0,
    'tau_step': 0.05,
    'outputs': {'tau': 0.5, 'wigner_grid': [-5, 5, 41, -5, 5, 41]}
}


def make_config(base, **changes):
    """Copy of a configuration document with modified top-level keys."""
    doc = copy.deepcopy(base)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return scenario.ScenarioConfig(doc)


class TestConfiguration(unittest.TestCase):

    def test_defaults(self):
        """Empty documents are completed with the default scenario."""
        config = scenario.ScenarioConfig({})
        self.assertEqual(config.hamiltonian, scenario.HAMILTONIAN_INT2)
        self.assertEqual(config.document['truncation']['max_occ'], [27, 27, 38])
        self.assertEqual(config.document['truncation']['total_cap'], 42)
        self.assertEqual(config.solver['method'], scenario.METHOD_AUTO)
        self.assertIsNone(config.outputs['tau'])
        self.assertEqual(len(config.tau_grid()), 251)
        self.assertAlmostEqual(config.tau_grid()[-1], 0.25)
        for alpha in config.alphas:
            self.assertAlmostEqual(abs(alpha) ** 2, 9.0)
            self.assertAlmostEqual(alpha.real, alpha.imag)
        couplings = config.couplings
        self.assertEqual(couplings.spm, (0.5, 0.5, 0.5))
        self.assertEqual(couplings.xpm, (1.0, 1.0, 1.0))
        self.assertFalse(couplings.is_dissipative)

    def test_config_hash(self):
        """Hashes identify configurations independent of the output
        directory.
        """
        config = scenario.ScenarioConfig({})
        value = scenario.config_hash(config)
        self.assertEqual(len(value), 40)
        int(value, 16)
        self.assertEqual(scenario.config_hash(scenario.ScenarioConfig({})), value)
        other = scenario.ScenarioConfig({'outputs': {'directory': '/tmp/run'}})
        self.assertEqual(scenario.config_hash(other), value)
        other = scenario.ScenarioConfig({'tau_max': 0.3})
        self.assertNotEqual(scenario.config_hash(other), value)
        self.assertFalse('directory' in scenario.canonical_document(config)['outputs'])

    def test_invalid_configurations(self):
        """Schema violations are configuration errors."""
        invalid = [
            {'unknown': 1},
            {'hamiltonian': 'int3'},
            {'tau_max': 0.001, 'tau_step': 0.01},
            {'tau_step': 0},
            {'couplings': {'g': -1}},
            {'couplings': {'gamma2': -0.1}},
            {'alpha1': {'abs2': -1, 'phase': 0}},
            {'truncation': {'max_occ': [1, 2]}},
            {'solver': {'n_traj': 0}},
            {'outputs': {'tau': 0.5}},
            {'outputs': {'wigner_grid': [-1, 1, 1.5, -1, 1, 3]}},
            {'outputs': {'wigner_grid': [1, -1, 3, -1, 1, 3]}},
            {'outputs': {'wigner_modes': [4]}},
            {'outputs': {'pictures': []}},
            {'outputs': {'artifacts': ['plots']}}
        ]
        for doc in invalid:
            with self.assertRaises(ConfigurationError):
                scenario.ScenarioConfig(doc)

    def test_presets(self):
        """Bundled presets load and accept overrides."""
        self.assertEqual(scenario.list_presets(), ['paper-s1', 'paper-s2', 'paper-s3'])
        s1 = scenario.load_config('paper-s1')
        self.assertEqual(s1.hamiltonian, scenario.HAMILTONIAN_INT2)
        s2 = scenario.load_config('paper-s2.json')
        self.assertEqual(s2.hamiltonian, scenario.HAMILTONIAN_INT1)
        s3 = scenario.load_config('paper-s3', overrides=['solver.n_traj=100', 'tau_max=0.2', 'outputs.tau=0.1'])
        self.assertEqual(s3.solver['n_traj'], 100)
        self.assertEqual(s3.document['tau_max'], 0.2)
        self.assertEqual(s3.outputs['tau'], 0.1)
        self.assertTrue(s3.couplings.is_dissipative)
        for overrides in [['solver.n_traj'], ['solver.unknown=1'], ['solver.n_traj=abc']]:
            with self.assertRaises(ConfigurationError):
                scenario.load_config('paper-s3', overrides=overrides)
        with self.assertRaises(ConfigurationError):
            scenario.load_config('paper-s9')

    def test_config_files(self):
        """Configuration files are read from disk."""
        directory = tempfile.mkdtemp()
        try:
            filename = os.path.join(directory, 'config.json')
            with open(filename, 'w') as f:
                json.dump(UNITARY_CONFIG, f)
            config = scenario.load_config(filename)
            self.assertEqual(config.document['truncation']['max_occ'], [8, 8, 10])
            with open(filename, 'w') as f:
                f.write('{"tau_max": 1.0, "tau_max": 2.0}')
            with self.assertRaises(ConfigurationError):
                scenario.load_config(filename)
        finally:
            shutil.rmtree(directory)


class TestProblemSetup(unittest.TestCase):

    def test_select_method(self):
        """Automatic and explicit solver choices."""
        small = FockSpace([2, 2, 2])
        large = FockSpace([10, 10, 10])
        damped = CouplingSet(gamma1=0.1)
        collapse_small = build_collapse_ops(small, damped)
        collapse_large = build_collapse_ops(large, damped)
        self.assertEqual(scenario.select_method('auto', small, []), scenario.METHOD_UNITARY)
        self.assertEqual(scenario.select_method('auto', small, collapse_small), scenario.METHOD_DENSE)
        self.assertEqual(scenario.select_method('auto', large, collapse_large), scenario.METHOD_TRAJECTORIES)
        self.assertEqual(scenario.select_method('trajectories', small, collapse_small), scenario.METHOD_TRAJECTORIES)
        with self.assertRaises(ConfigurationError):
            scenario.select_method('unitary', small, collapse_small)
        with self.assertRaises(ConfigurationError):
            scenario.select_method('dense', large, collapse_large)
        with self.assertRaises(ConfigurationError):
            scenario.select_method('trajectories', small, [])

    def test_pictures(self):
        """Raw and transformed pictures of both Hamiltonians."""
        problem = scenario.build_problem(make_config(UNITARY_CONFIG))
        self.assertEqual(problem.method, scenario.METHOD_UNITARY)
        self.assertEqual(problem.pictures, {'raw': 0.0, 'transformed': 1.0})
        self.assertEqual(problem.fields, {'raw': 'b', 'transformed': 'a'})
        problem = scenario.build_problem(make_config(UNITARY_CONFIG, hamiltonian='int1'))
        self.assertEqual(problem.pictures, {'raw': 0.0, 'transformed': -1.0})
        self.assertEqual(problem.fields, {'raw': 'a', 'transformed': 'b'})
        self.assertAlmostEqual(abs(problem.psi0.amplitudes[0]) ** 2, math.exp(-2.0), places=3)

    def test_rescaled_hamiltonian(self):
        """Hamiltonians are divided by the FWM coupling."""
        config = make_config(UNITARY_CONFIG, couplings={'g': 2.0})
        problem = scenario.build_problem(config)
        self.assertEqual(problem.pictures['transformed'], 1.0)
        diff = problem.hamiltonian - build_H_fwm(problem.space, 1.0)
        self.assertLess(np.abs(diff.to_dense()).max(), 1e-12)


class TestUnitaryScenario(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        """Run the small unitary scenario once."""
        cls.directory = tempfile.mkdtemp()
        cls.config = make_config(UNITARY_CONFIG)
        cls.report = scenario.run_scenario(cls.config, directory=cls.directory)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.directory)

    def test_extremal_time(self):
        """n3 maximum and n1 minimum coincide in the closed system."""
        tau_star = self.report.document['tauStar']
        self.assertIsNotNone(self.report.tau_star)
        self.assertTrue(0 < self.report.tau_star < 3.0)
        self.assertAlmostEqual(tau_star['n3Max'], tau_star['n1Min'], delta=0.01)
        self.assertEqual(self.report.artifact_tau, self.report.tau_star)
        scan = scenario.scan_extremum(self.config)
        self.assertTrue(scan['agree'])
        self.assertAlmostEqual(scan['n3Max'], self.report.tau_star, places=6)
        self.assertEqual(scan['configHash'], self.report.config_hash)

    def test_summary(self):
        """Summary document of a unitary run."""
        doc = self.report.to_dict()
        self.assertEqual(doc['configHash'], scenario.config_hash(self.config))
        self.assertEqual(doc['solver']['method'], 'unitary')
        self.assertEqual(doc['decoupling'], 'exact')
        self.assertEqual(doc['pictures']['raw']['field'], 'b')
        self.assertEqual(doc['pictures']['transformed']['field'], 'a')
        for key, value in doc['conservation'].items():
            self.assertLess(value, 1e-6)
        raw = doc['statistics']['raw']
        transformed = doc['statistics']['transformed']
        for mode in range(3):
            self.assertAlmostEqual(raw['modes'][mode]['n'], transformed['modes'][mode]['n'], places=7)
        self.assertGreater(raw['schmidtNumber'], 1.0)
        self.assertEqual(len(doc['wigner']['raw']), 2)
        for entry in doc['wigner']['raw']:
            self.assertAlmostEqual(entry['normalization'], 1.0, delta=1e-2)
        with open(os.path.join(self.directory, 'summary.json'), 'r') as f:
            self.assertEqual(json.load(f), doc)

    def test_output_files(self):
        """All artifacts are written with the configuration hash."""
        names = sorted(os.path.basename(f) for f in self.report.files)
        expected = ['distributions.tsv', 'summary.json', 'timeseries.tsv']
        expected += ['state-raw.json', 'state-transformed.json']
        for picture in ['raw', 'transformed']:
            for mode in [1, 3]:
                expected.append('wigner-mode%d-%s.tsv' % (mode, picture))
                expected.append('marginals-mode%d-%s.tsv' % (mode, picture))
            for mode in [1, 2, 3]:
                expected.append('reduced-mode%d-%s.json' % (mode, picture))
        self.assertEqual(names, sorted(expected))
        with open(os.path.join(self.directory, 'timeseries.tsv'), 'r') as f:
            lines = f.read().strip().split('\n')
        self.assertEqual(lines[0], '# config-hash: ' + self.report.config_hash)
        self.assertEqual(lines[1], '# picture: raw')
        self.assertTrue(lines[2].startswith('# tau n1 n2 n3'))
        self.assertEqual(len(lines), 3 + 301)
        # Fano factor of the empty signal mode is undefined at tau = 0
        self.assertEqual(lines[3].split('\t')[9], 'undefined')
        with open(os.path.join(self.directory, 'state-raw.json'), 'r') as f:
            doc = json.load(f)
        self.assertEqual(doc['configHash'], self.report.config_hash)
        with open(os.path.join(self.directory, 'state-raw.json'), 'r') as f:
            state = read_state(f)
        self.assertIsInstance(state, PureState)
        self.assertAlmostEqual(state.metadata['tau'], self.report.artifact_tau)
        wigner_file = os.path.join(self.directory, 'wigner-mode3-raw.tsv')
        with open(wigner_file, 'r') as f:
            rows = [line for line in f.read().strip().split('\n') if not line.startswith('#')]
        self.assertEqual(len(rows), 41 * 41)

    def test_compare_runs(self):
        """A run is identical to itself."""
        record = scenario.compare_states(self.directory, self.directory)
        self.assertEqual(len(record['fidelities']), 6)
        for entry in record['fidelities']:
            self.assertAlmostEqual(entry['fidelity'], 1.0, places=6)
        state_file = os.path.join(self.directory, 'state-raw.json')
        record = scenario.compare_states(state_file, state_file, modes=[1, 3])
        self.assertEqual([entry['mode'] for entry in record['fidelities']], [1, 3])
        reduced = scenario.reduced_file(self.directory, 3, 'raw')
        record = scenario.compare_states(reduced, reduced)
        self.assertAlmostEqual(record['fidelities'][0]['fidelity'], 1.0, places=6)
        with self.assertRaises(ConfigurationError):
            scenario.compare_states(state_file, reduced)
        with self.assertRaises(ConfigurationError):
            scenario.compare_states(self.directory, os.path.join(self.directory, 'missing'))


class TestPictureIdentity(unittest.TestCase):

    def test_decoupled_pictures(self):
        """The transformed picture of the decoupled Hamiltonian reproduces the
        raw picture of the full Hamiltonian.
        """
        directory = tempfile.mkdtemp()
        try:
            outputs = {'tau': 0.5, 'artifacts': ['states']}
            full = make_config(UNITARY_CONFIG, hamiltonian='int1', tau_max=0.5, tau_step=0.05, outputs=outputs)
            scenario.run_scenario(full, directory=directory)
            decoupled = make_config(UNITARY_CONFIG, tau_max=0.5, tau_step=0.05, outputs=outputs)
            report = scenario.run_scenario(decoupled, reference=directory)
            self.assertEqual(report.files, [])
            transformed = report.picture('transformed')
            for mode in range(3):
                with open(scenario.reduced_file(directory, mode + 1, 'raw'), 'r') as f:
                    rho = read_state(f)
                self.assertGreater(fidelity(transformed.reduced[mode], rho), 1.0 - 1e-6)
            # Reference fidelities are matched by picture name
            self.assertEqual(len(report.to_dict()['fidelities']), 6)
        finally:
            shutil.rmtree(directory)


class TestDissipativeScenarios(unittest.TestCase):

    def test_dense_run(self):
        """Small damped scenarios use the dense master equation solver."""
        report = scenario.run_scenario(make_config(DAMPED_CONFIG, outputs={'artifacts': ['timeseries']}))
        doc = report.to_dict()
        self.assertEqual(doc['solver']['method'], 'dense')
        self.assertEqual(doc['artifactTau'], 0.5)
        self.assertEqual(doc['space']['dimension'], 76)
        self.assertIsNone(doc['statistics']['raw']['schmidtNumber'])
        self.assertLess(doc['statistics']['raw']['purity3'], 1.0)
        # Damping removes photons
        self.assertGreater(doc['conservation']['N'], 1e-3)
        self.assertFalse('wigner' in doc)
        N = report.series.n.sum(axis=1)
        self.assertTrue(np.all(np.diff(N) < 1e-9))

    def test_trajectory_run(self):
        """Trajectory runs with a fixed artifact time skip the time series."""
        directory = tempfile.mkdtemp()
        try:
            config = make_config(
                DAMPED_CONFIG,
                solver={'method': 'trajectories', 'n_traj': 20, 'n_workers': 1, 'master_seed': 5},
                outputs={'artifacts': ['states', 'distributions']}
            )
            report = scenario.run_scenario(config, directory=directory)
            doc = report.to_dict()
            self.assertIsNone(report.series)
            self.assertEqual(doc['tauStar'], {'n3Max': None, 'n1Min': None})
            self.assertEqual(doc['solver']['nTraj'], 20)
            self.assertEqual(doc['solver']['masterSeed'], 5)
            self.assertEqual(len(doc['standardErrors']['n']), 3)
            self.assertIsNone(report.picture('raw').state)
            names = sorted(os.path.basename(f) for f in report.files)
            self.assertEqual(len(names), 8)
            self.assertTrue('distributions.tsv' in names)
            self.assertFalse('state-raw.json' in names)
            with open(scenario.reduced_file(directory, 1, 'raw'), 'r') as f:
                rho = read_state(f)
            self.assertEqual(rho.modes, (0,))
            self.assertAlmostEqual(rho.metadata['tau'], 0.5)
            # Same seed, same ensemble
            again = scenario.run_scenario(config)
            self.assertEqual(again.to_dict()['statistics'], doc['statistics'])
        finally:
            shutil.rmtree(directory)

    def test_trajectory_series(self):
        """Trajectory time series carry the signal mode purity."""
        directory = tempfile.mkdtemp()
        try:
            config = make_config(
                DAMPED_CONFIG,
                solver={'method': 'trajectories', 'n_traj': 10, 'n_workers': 1, 'master_seed': 3},
                outputs={'artifacts': ['timeseries']}
            )
            report = scenario.run_scenario(config, directory=directory)
            series = report.series
            self.assertIsNotNone(series.purity3)
            self.assertTrue('purity3' in series.columns())
            self.assertEqual(len(series.purity3), len(series.tau))
            # Product state with vacuum in the signal mode
            self.assertAlmostEqual(series.purity3[0], 1.0, places=10)
            self.assertTrue(np.all(series.purity3 <= 1.0 + 1e-10))
            self.assertTrue(np.all(series.purity3 > 0.0))
            with open(os.path.join(directory, scenario.FILE_TIMESERIES), 'r') as f:
                header = [line for line in f.read().splitlines() if line.startswith('#')][-1]
            self.assertTrue('purity3' in header.split())
        finally:
            shutil.rmtree(directory)


class TestHelpers(unittest.TestCase):

    def test_clean_value(self):
        value = scenario.clean_value({
            'a': np.float64(1.0 / 3.0),
            'b': float('nan'),
            'c': np.int64(3),
            'd': np.array([1.0, 2.0]),
            'e': np.bool_(True),
            'f': (1, 'x')
        })
        self.assertEqual(value, {'a': 0.333333333, 'b': None, 'c': 3, 'd': [1.0, 2.0], 'e': True, 'f': [1, 'x']})
        self.assertIsInstance(value['c'], int)

    def test_format_number(self):
        self.assertEqual(scenario.format_number(None), 'undefined')
        self.assertEqual(scenario.format_number(float('nan')), 'undefined')
        self.assertEqual(scenario.format_number(0.5), '0.5')
        self.assertEqual(scenario.format_number(1.0 / 3.0), '0.333333333')


if __name__ == '__main__':
    unittest.main()
