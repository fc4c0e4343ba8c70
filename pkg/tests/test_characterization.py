"""
This module defines tests for the characterization scans, the fits of the
device parameters and the operating procedures.
"""

import os
import tempfile
import unittest
import warnings

import numpy as np

from trimetro import devicetools
from trimetro.characterization import (fittools, fouriertools, procedures,
                                       scantools)
from trimetro.photontools import DistinguishabilityModel
from trimetro.settings import settings
from trimetro.thermaltools import make_resistor_bank, phases_from_powers
from trimetro.unitarytools import (interferometer, make_phase_grid,
                                   symmetric_tritter)


def perturbed(x, scale, seed):

    rng = np.random.default_rng(seed)

    return np.asarray(x) + scale*rng.standard_normal(len(x))


class ScanTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.device = devicetools.reference_device()
        cls.scan = scantools.generate_scan(cls.device, noiseless=True)

    def test_curve_counts(self):

        tritter_scan = scantools.generate_scan(self.device, 'tritter',
                                               noiseless=True)

        self.assertEqual(len(self.scan.curves), 36)
        self.assertEqual(len(tritter_scan.curves), 18)
        self.assertEqual(self.scan.n_points,
                         36*settings.options['SCAN_POINTS'])
        self.assertIsNone(self.scan.counts)

    def test_noiseless_curve(self):

        curve = next(curve for curve in self.scan.curves_of('R2')
                     if curve.input_mode == 1 and curve.output_mode == 2)

        for power, prob in zip(curve.powers[::7], curve.probs[::7]):
            powers = np.zeros(6)
            powers[1] = power
            phases = phases_from_powers(self.device.bank, powers).phases
            u = np.asarray(interferometer(self.device.tritter_a,
                                          self.device.tritter_b, phases))
            self.assertAlmostEqual(prob, abs(u[1, 0])**2, places=12)

    def test_noisy_normalization(self):

        scan = scantools.generate_scan(self.device, counts=500, seed=4)
        counts = settings.options['SCAN_POINTS']

        for resistor in scantools.PROTOCOL_RESISTORS['internal']:
            for input_mode in (1, 2, 3):
                total = np.zeros(counts)
                for curve in scan.curves_of(resistor):
                    if curve.input_mode == input_mode:
                        total += curve.probs
                        self.assertTrue(np.all(curve.std_errs >= 1/500))
                self.assertTrue(np.allclose(total, 1.))

    def test_invalid_arguments(self):

        with self.assertRaises(ValueError):
            scantools.generate_scan(self.device, counts=0)

        with self.assertRaises(ValueError):
            scantools.generate_scan(self.device, protocol='external')

    def test_csv_round_trip(self):

        with tempfile.TemporaryDirectory() as tmp_dir:
            filename = os.path.join(tmp_dir, 'scan.csv')
            scantools.save_scan_csv(self.scan, filename)
            restored = scantools.load_scan_csv(filename)

        self.assertEqual(restored.protocol, 'internal')
        self.assertEqual(restored.n_points, self.scan.n_points)

        original = {(curve.input_mode, curve.output_mode, curve.resistor):
                    curve for curve in self.scan.curves}

        for curve in restored.curves:
            expected = original[(curve.input_mode, curve.output_mode,
                                 curve.resistor)]
            self.assertTrue(np.allclose(curve.powers, expected.powers))
            self.assertTrue(np.allclose(curve.probs, expected.probs))


class FourierTestCase(unittest.TestCase):

    def setUp(self):
        self.powers = scantools.scan_power_grid()

    def test_synthetic_sinusoid(self):

        probs = 0.5*(1 + np.cos(20*self.powers + 0.3))

        harmonics = fouriertools.curve_harmonics(self.powers, probs)

        self.assertAlmostEqual(harmonics[0], 20., delta=2.)

    def test_flat_curve(self):

        harmonics = fouriertools.curve_harmonics(self.powers,
                                                 np.full(len(self.powers),
                                                         0.4))

        self.assertEqual(len(harmonics), 0)

    def test_offset(self):

        probs = 0.3 + 0.2*np.cos(14*self.powers) + 0.1*np.cos(31*self.powers)

        self.assertTrue(np.allclose(
            fouriertools.curve_harmonics(self.powers, probs),
            fouriertools.curve_harmonics(self.powers, probs + 0.1)))

    def test_ideal_device(self):

        scan = scantools.generate_scan(devicetools.ideal_device(),
                                       noiseless=True)

        init = fouriertools.fourier_init(scan)

        self.assertEqual(init.alpha_lin.shape, (2, 4))
        self.assertTrue(np.all(init.alpha_nl == 0))
        self.assertLess(np.min(np.abs(init.harmonics['R1'] - 20.)), 2.)
        self.assertLess(np.min(np.abs(init.harmonics['R2'] - 20.)), 2.)

    def test_inactive_resistor(self):

        device = devicetools.ideal_device()
        bank = make_resistor_bank(alpha_lin=[[20., 0., -10., 0.],
                                             [0., 20., -5., 0.]],
                                  alpha_t_lin=[10., 10.])
        scan = scantools.generate_scan(device._replace(bank=bank),
                                       noiseless=True)

        init = fouriertools.fourier_init(scan)

        self.assertTrue(np.all(init.alpha_lin[:, 3] == 0))
        self.assertTrue(np.all(init.low_confidence[:, 3]))

    def test_wrong_protocol(self):

        scan = scantools.generate_scan(devicetools.ideal_device(), 'tritter',
                                       noiseless=True)

        with self.assertRaises(ValueError):
            fouriertools.fourier_init(scan)


class FitTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.truth = devicetools.reference_device()
        cls.scan = scantools.generate_scan(cls.truth, noiseless=True)

    def test_internal_noiseless(self):

        init = perturbed(fittools.pack_internal(self.truth), 1e-3, 0)

        result = fittools.fit_device(self.scan, init=init,
                                     template=self.truth)
        errors = fittools.parameter_errors(result, self.truth)

        self.assertTrue(result.converged)
        self.assertEqual(result.n_params, 26)
        self.assertLess(max(errors.values()), 1e-6)
        self.assertLess(result.chi_square, 1e-6)

    def test_internal_noisy(self):

        scan = scantools.generate_scan(self.truth, counts=2000, seed=7)

        result = fittools.fit_device(scan, init=self.truth)
        errors = fittools.parameter_errors(result, self.truth)

        self.assertTrue(0.8 <= result.reduced_chi_square <= 1.3)
        for name in ('T1A', 'T2A', 'T3A', 'T1B', 'T2B', 'T3B'):
            self.assertLess(errors[name], 0.01)

        truth = dict(zip(fittools.INTERNAL_PARAM_NAMES,
                         fittools.canonicalize_gauge(
                             fittools.pack_internal(self.truth))))
        for name in fittools.INTERNAL_PARAM_NAMES[10:18]:
            self.assertLessEqual(errors[name], 0.02*abs(truth[name])
                                 + 3*result.errors[name])

    def test_tritter_noiseless(self):

        scan = scantools.generate_scan(self.truth, 'tritter', noiseless=True)
        init = fittools.pack_tritter(self.truth) + np.array(
            [0.01, -0.01, 0.1, -0.1, 0.01, 0.01])

        result = fittools.fit_tritter_resistors(scan, self.truth, init=init)
        errors = fittools.parameter_errors(result, self.truth)

        self.assertTrue(result.converged)
        self.assertEqual(set(errors), set(fittools.TRITTER_PARAM_NAMES))
        self.assertLess(max(errors.values()), 1e-6)

    def test_conjugate_gauge(self):

        x = fittools.pack_internal(self.truth)
        conjugate = x.copy()
        conjugate[6:] = -conjugate[6:]

        point_model = scantools.make_point_model('internal')
        resistor_idx = np.repeat(np.arange(4), 5)
        powers = np.tile(np.linspace(0., 1., 5), 4)

        probs = point_model(fittools.unpack_internal(x, self.truth),
                            resistor_idx, powers)
        conjugate_probs = point_model(
            fittools.unpack_internal(conjugate, self.truth),
            resistor_idx, powers)

        self.assertTrue(np.allclose(probs, conjugate_probs, atol=1e-12))
        self.assertTrue(np.allclose(fittools.canonicalize_gauge(conjugate),
                                    fittools.canonicalize_gauge(x)))

    def test_wrong_protocol(self):

        tritter_scan = scantools.generate_scan(self.truth, 'tritter',
                                               noiseless=True)

        with self.assertRaises(ValueError):
            fittools.fit_device(tritter_scan, init=self.truth)

        with self.assertRaises(ValueError):
            fittools.fit_tritter_resistors(self.scan, self.truth)

    def test_result_dict(self):

        result = fittools.fit_device(self.scan, init=self.truth)
        document = result.to_dict()

        self.assertEqual(set(document['parameters']),
                         set(fittools.INTERNAL_PARAM_NAMES))
        self.assertEqual(document['n_points'], self.scan.n_points)
        self.assertTrue(document['converged'])


class TritterSettingTestCase(unittest.TestCase):

    def test_ideal_device(self):

        device = devicetools.ideal_device()

        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            setting = procedures.tritter_setting(device)

        self.assertEqual(set(setting.residuals), set(procedures.SETTING_STEPS))
        self.assertLess(max(setting.residuals.values()), 1e-6)
        self.assertTrue(set(setting.branches.values()) <= {1, -1})

        for value in setting.fidelities:
            self.assertAlmostEqual(value, 1., delta=1e-6)

        powers = np.array(list(setting.powers.values()))
        self.assertLess(float(procedures.transition_probability(
            device, powers, 3, 3)), 1e-6)
        self.assertTrue(np.all(powers <= settings.options['P_MAX']))

    def test_reference_device(self):

        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            setting = procedures.tritter_setting(
                devicetools.reference_device())

        self.assertLess(max(setting.residuals.values()), 0.05)
        for value in setting.fidelities:
            self.assertTrue(0.9 < value <= 1.)


class IdentityTestCase(unittest.TestCase):

    def test_similarity(self):

        self.assertAlmostEqual(float(procedures.similarity(np.eye(3))), 1.)
        self.assertAlmostEqual(
            float(procedures.similarity(symmetric_tritter())), 1/3)

    def test_ideal_device(self):

        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            setting = procedures.identity_configuration(
                devicetools.ideal_device())

        self.assertGreater(setting.similarity, 1 - 1e-9)
        self.assertTrue(setting.reachable)
        self.assertTrue(np.allclose(np.abs(setting.unitary), np.eye(3),
                                    atol=1e-4))

    def test_reference_device(self):

        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            setting = procedures.identity_configuration(
                devicetools.reference_device())

        self.assertGreater(setting.similarity, 0.9)
        self.assertEqual(setting.reachable, len(setting.powers) == 6)
        self.assertTrue(all(power <= settings.options['P_MAX']
                            for power in setting.powers.values()))


class SurfaceCheckTestCase(unittest.TestCase):

    def setUp(self):
        self.device = devicetools.reference_device()
        self.grid = make_phase_grid(12)

    def test_model_against_itself(self):

        model = DistinguishabilityModel(0.95)
        dataset = scantools.generate_surfaces(self.device, (2, 3), model,
                                              self.grid)

        check = procedures.verify_surfaces(self.device, dataset, model)

        self.assertEqual(len(check.r2), 6)
        self.assertAlmostEqual(check.mean_r2, 1., places=12)

    def test_sampled_surfaces(self):

        counts = scantools.counts_for_target_r2(self.device, (3,), None,
                                                self.grid, 0.97)
        dataset = scantools.generate_surfaces(self.device, (3,), None,
                                              self.grid, counts=counts,
                                              seed=0)

        check = procedures.verify_surfaces(self.device, dataset)

        self.assertGreaterEqual(check.mean_r2, 0.95)
        self.assertEqual(dataset.counts, counts)

    def test_two_photon_matched_noise(self):

        model = DistinguishabilityModel(0.95)
        grid = make_phase_grid(20)

        counts = scantools.counts_for_target_r2(self.device, (2, 3), model,
                                                grid, 0.835)
        dataset = scantools.generate_surfaces(self.device, (2, 3), model,
                                              grid, counts=counts, seed=1)

        check = procedures.verify_surfaces(self.device, dataset, model)

        self.assertTrue(0.80 <= check.mean_r2 <= 0.90)

    def test_expected_r2(self):

        probs = scantools.surface_probabilities(self.device, (3,), None,
                                                self.grid)

        low = scantools.expected_r2(probs, 10)
        high = scantools.expected_r2(probs, 1e6)

        self.assertLess(low, high)
        self.assertAlmostEqual(high, 1., delta=1e-4)

        with self.assertRaises(ValueError):
            scantools.counts_for_target_r2(self.device, (3,), None,
                                           self.grid, 1.)

    def test_constant_data(self):
        self.assertTrue(np.isnan(procedures.r_squared(np.ones(5),
                                                      np.ones(5))))


if __name__ == '__main__':
    unittest.main()
