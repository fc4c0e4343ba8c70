"""
This module defines tests for the command line interface.
"""

import json
import os
import tempfile
import unittest

import numpy as np

from trimetro import cli, devicetools, misctools
from trimetro.unitarytools import TritterParams


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp_dir.cleanup()

    def path(self, name):
        return os.path.join(self.tmp_dir.name, name)

    def run_cli(self, *argv):
        return cli.main(['-q', *argv])

    def read_json(self, name):
        with open(self.path(name), encoding='utf-8') as file:
            return json.load(file)


class SimulateTestCase(CliTestCase):

    def test_grid(self):

        code = self.run_cli('simulate', '--config', 'ideal', '--photons', '1',
                            '--input', '3', '--grid', '30x30',
                            '--out', self.path('probs.csv'))

        table = misctools.load_table(self.path('probs.csv'))

        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(len(table), 2700)
        self.assertTrue(np.allclose(
            table.groupby(['dphi1', 'dphi2'])['probability'].sum(), 1.,
            atol=1e-9))

    def test_uncoupled_device(self):

        no_mixing = TritterParams(0., 0., 0., 0.)
        device = devicetools.ideal_device()._replace(tritter_a=no_mixing,
                                                     tritter_b=no_mixing)
        devicetools.save_config(devicetools.DeviceConfig(device, 1.,
                                                         'uncoupled'),
                                self.path('uncoupled.json'))

        code = self.run_cli('simulate', '--config', self.path('uncoupled.json'),
                            '--phases', '0,0', '--out', self.path('out.csv'))

        table = misctools.load_table(self.path('out.csv'))
        probs = dict(zip(table['event'].astype(str), table['probability']))

        self.assertEqual(code, cli.EXIT_OK)
        self.assertAlmostEqual(probs['23'], 1.)
        self.assertAlmostEqual(sum(probs.values()), 1.)

    def test_usage_errors(self):

        self.assertEqual(self.run_cli('simulate', '--input', '4,5',
                                      '--phases', '0,0'), cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('simulate', '--input', '2,3',
                                      '--photons', '3', '--phases', '0,0'),
                         cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('simulate', '--phases', '0'),
                         cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('simulate', '--phases', '0,0',
                                      '--visibility', '1.5'),
                         cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('simulate', '--config', 'missing.json',
                                      '--phases', '0,0'), cli.EXIT_USAGE)

    def test_grid_range(self):

        code = self.run_cli('simulate', '--config', 'ideal', '--grid', '4x2',
                            '--range=-1,1,0.5,1.5',
                            '--out', self.path('probs.csv'))

        table = misctools.load_table(self.path('probs.csv'))

        self.assertEqual(code, cli.EXIT_OK)
        self.assertTrue(np.allclose(np.unique(table['dphi1']),
                                    [-1., -0.5, 0., 0.5]))
        self.assertTrue(np.allclose(np.unique(table['dphi2']), [0.5, 1.]))

        self.assertEqual(self.run_cli('simulate', '--grid', '4x4',
                                      '--range', '0,1,2'), cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('simulate', '--grid', '4x4',
                                      '--range', '1,0,0,1'), cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('simulate', '--phases', '0,0',
                                      '--range', '0,1,0,1'), cli.EXIT_USAGE)

    def test_no_command(self):
        self.assertEqual(self.run_cli(), cli.EXIT_USAGE)


class CrbTestCase(CliTestCase):

    def test_no_benchmark(self):

        code = self.run_cli('crb', '--config', 'ideal', '--grid', '6x6',
                            '--benchmark', 'none',
                            '--out', self.path('crb.csv'))

        table = misctools.load_table(self.path('crb.csv'))

        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(len(table), 36)
        self.assertFalse(table['beats_benchmark'].any())

    def test_grid_range(self):

        code = self.run_cli('crb', '--config', 'ideal', '--grid', '3x5',
                            '--range', '0,3,1,2', '--benchmark', 'none',
                            '--out', self.path('crb.csv'))

        table = misctools.load_table(self.path('crb.csv'))

        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(len(table), 15)
        self.assertTrue(np.allclose(np.unique(table['dphi1']), [0., 1., 2.]))
        self.assertGreaterEqual(table['dphi2'].min(), 1.)
        self.assertLess(table['dphi2'].max(), 2.)

    def test_invalid_benchmark(self):

        self.assertEqual(self.run_cli('crb', '--input', '1,2,3', '--grid',
                                      '4x4', '--benchmark', 'sep'),
                         cli.EXIT_USAGE)


class MleTestCase(CliTestCase):

    def test_seed(self):

        dphi1, dphi2 = devicetools.WORKING_POINTS['estimation']
        argv = ['mle', f'--phases={dphi1},{dphi2}', '--sweep', '100,200',
                '--reps', '3', '--seed', '5']

        first = self.run_cli(*argv, '--out', self.path('first.csv'))
        second = self.run_cli(*argv, '--out', self.path('second.csv'))

        with open(self.path('first.csv'), encoding='utf-8') as file:
            first_text = file.read()
        with open(self.path('second.csv'), encoding='utf-8') as file:
            second_text = file.read()

        self.assertEqual((first, second), (cli.EXIT_OK, cli.EXIT_OK))
        self.assertEqual(first_text, second_text)
        self.assertEqual(
            list(misctools.load_table(self.path('first.csv'))['m']),
            [100, 200])

    def test_usage_errors(self):

        self.assertEqual(self.run_cli('mle', '--phases', '0.3,1.2', '--reps',
                                      '1'), cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('mle', '--phases', '0.3,1.2', '--sweep',
                                      '100,x'), cli.EXIT_USAGE)


class CharacterizeTestCase(CliTestCase):

    def test_noiseless_internal(self):

        code = self.run_cli('characterize', '--noise', 'none', '--init',
                            'truth', '--out', self.path('fit.json'),
                            '--scan-out', self.path('scan.csv'))

        document = self.read_json('fit.json')
        scan = misctools.load_table(self.path('scan.csv'))

        self.assertEqual(code, cli.EXIT_OK)
        self.assertLess(document['max_abs_deviation'], 1e-6)
        self.assertIn('T1A', document['parameters'])
        self.assertIn('alpha_nl_24', document['errors_1sigma'])
        self.assertEqual(document['n_params'], 26)
        self.assertEqual(len(scan), document['n_points'])

    def test_noiseless_tritter(self):

        code = self.run_cli('characterize', '--protocol', 'tritter',
                            '--noise', 'none', '--init', 'truth',
                            '--out', self.path('fit.json'))

        document = self.read_json('fit.json')

        self.assertEqual(code, cli.EXIT_OK)
        self.assertEqual(set(document['parameters']),
                         {'phi0_TA', 'phi0_TB', 'alpha_TA', 'alpha_TB',
                          'alpha_nl_TA', 'alpha_nl_TB'})
        self.assertLess(document['max_abs_deviation'], 1e-6)

    def test_invalid_noise(self):

        self.assertEqual(self.run_cli('characterize', '--noise', '0'),
                         cli.EXIT_USAGE)
        self.assertEqual(self.run_cli('characterize', '--noise', 'low'),
                         cli.EXIT_USAGE)


class ProcedureTestCase(CliTestCase):

    def test_identity(self):

        code = self.run_cli('identity', '--config', 'ideal',
                            '--out', self.path('identity.json'))

        document = self.read_json('identity.json')

        self.assertEqual(code, cli.EXIT_OK)
        self.assertGreater(document['similarity'], 1 - 1e-9)
        self.assertTrue(document['reachable'])
        self.assertNotIn('reference', document)

    def test_tritter_set(self):

        code = self.run_cli('tritter-set', '--config', 'ideal',
                            '--out', self.path('setting.json'))

        document = self.read_json('setting.json')

        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn(document['branches']['internal'], ('+1pi/3', '-1pi/3'))
        self.assertIn(document['branches']['tritter_a'], ('+1pi/2', '-1pi/2'))
        self.assertAlmostEqual(document['fidelity_a'], 1., delta=1e-6)
        self.assertEqual(set(document['powers_W']),
                         {'R1', 'R2', 'R3', 'R4', 'RTA', 'RTB'})


if __name__ == '__main__':
    unittest.main()
