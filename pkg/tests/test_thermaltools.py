"""
This module defines tests for the thermal phase model.
"""

import unittest

import numpy as np

from trimetro import devicetools
from trimetro.thermaltools import (UnreachablePhaseError, dissipated_power,
                                   fit_transient, make_resistor_bank,
                                   phases_from_powers,
                                   power_for_tritter_phase,
                                   powers_for_target_phases,
                                   settling_time, transient_response,
                                   voltages_from_powers)
from trimetro.unitarytools import PhaseVector, wrap_phase


def wrapped_distance(a, b):
    return np.max(np.abs(np.asarray(wrap_phase(np.asarray(a)
                                               - np.asarray(b)))))


class DissipatedPowerTestCase(unittest.TestCase):

    def test_zero_voltage(self):
        self.assertEqual(dissipated_power(0., 80.), 0.)

    def test_arithmetic(self):
        self.assertAlmostEqual(dissipated_power(2., 100.), 0.04)

    def test_fabricated_range(self):
        for r in (60., 80., 100.):
            power = dissipated_power(2.05, r)
            self.assertTrue(2.05**2/100 - 1e-12 <= power
                            <= 2.05**2/60 + 1e-12)
            self.assertAlmostEqual(power, 2.05**2/r)

    def test_invalid_resistance(self):
        with self.assertRaises(ValueError):
            dissipated_power(1., 0.)

    def test_voltage_round_trip(self):

        bank = devicetools.reference_device().bank
        powers = np.array([0.05, 0.1, 0., 0.3, 0.2, 0.7])

        voltages = voltages_from_powers(bank, powers).voltages

        self.assertTrue(np.allclose(dissipated_power(voltages,
                                                     bank.resistances),
                                    powers))


class PhasesFromPowersTestCase(unittest.TestCase):

    def setUp(self):
        self.bank = devicetools.reference_device().bank

    def test_static_phases(self):

        thermal = phases_from_powers(self.bank, np.zeros(6))

        self.assertTrue(np.allclose(
            [thermal.phases.dphi1, thermal.phases.dphi2,
             thermal.phi_ta, thermal.phi_tb],
            [-0.355, -1.441, 1.137, 0.914]))

    def test_single_resistor(self):

        powers = np.zeros(6)
        powers[0] = 0.1

        thermal = phases_from_powers(self.bank, powers)

        self.assertAlmostEqual(float(thermal.phases.dphi1), 2.0766,
                               places=10)

    def test_linear_superposition(self):

        bank = self.bank._replace(alpha_nl=np.zeros((2, 4)),
                                  static_phases=np.zeros(4))

        p_a = np.array([0.1, 0., 0.3, 0., 0., 0.])
        p_b = np.array([0., 0.2, 0., 0.4, 0., 0.])

        def dphi(powers):
            return np.asarray(phases_from_powers(bank, powers)
                              .phases.as_array())

        self.assertTrue(np.allclose(dphi(p_a + p_b), dphi(p_a) + dphi(p_b)))
        self.assertTrue(np.allclose(dphi(2*p_a), 2*dphi(p_a)))

    def test_monotone_response(self):

        powers = np.linspace(0., 1., 51)

        for i in range(4):
            for j in range(2):
                slope = (self.bank.alpha_lin[j, i]
                         + 2*self.bank.alpha_nl[j, i]*powers)
                if np.all(slope > 0) or np.all(slope < 0):
                    curve = []
                    for p in powers:
                        six = np.zeros(6)
                        six[i] = p
                        thermal = phases_from_powers(self.bank, six)
                        curve.append(float(thermal.phases[j]))
                    diffs = np.diff(curve)
                    self.assertTrue(np.all(diffs > 0) or np.all(diffs < 0))


class InverseMapTestCase(unittest.TestCase):

    def setUp(self):
        self.bank = devicetools.reference_device().bank

    def test_static_target(self):

        powers = powers_for_target_phases(self.bank,
                                          PhaseVector(-0.355, -1.441))

        self.assertTrue(np.allclose(powers, 0., atol=1e-9))

    def test_round_trip(self):

        rng = np.random.default_rng(5)

        for _ in range(10):
            truth = np.zeros(6)
            truth[:2] = rng.uniform(0.05, 0.5, 2)
            target = phases_from_powers(self.bank, truth).phases

            powers = powers_for_target_phases(self.bank, target)

            six = np.zeros(6)
            six[:2] = powers
            reached = phases_from_powers(self.bank, six).phases

            self.assertLessEqual(wrapped_distance(reached[:2], target[:2]),
                                 1e-9)

    def test_decoupled_linear(self):

        bank = make_resistor_bank(alpha_lin=[[20., 0., 0., 0.],
                                             [0., 15., 0., 0.]],
                                  static_phases=[0.1, -0.2, 0., 0.])

        powers = powers_for_target_phases(bank, PhaseVector(2.1, 2.8))

        self.assertTrue(np.allclose(powers, [(2.1 - 0.1)/20,
                                             (2.8 + 0.2)/15]))

    def test_unreachable_target(self):

        bank = make_resistor_bank(alpha_lin=[[1., 0., 0., 0.],
                                             [0., 1., 0., 0.]])

        with self.assertRaises(UnreachablePhaseError) as context:
            powers_for_target_phases(bank, PhaseVector(3., 3.), p_max=1.)

        self.assertIsNotNone(context.exception.nearest)
        self.assertTrue(np.all(context.exception.nearest_powers <= 1.))

    def test_tritter_phase(self):

        power = power_for_tritter_phase(self.bank, 'A', np.pi/2)

        six = np.zeros(6)
        six[4] = power
        thermal = phases_from_powers(self.bank, six)

        self.assertLessEqual(wrapped_distance(thermal.phi_ta, np.pi/2),
                             1e-9)

    def test_unreachable_tritter_phase(self):
        with self.assertRaises(UnreachablePhaseError):
            power_for_tritter_phase(self.bank, 'B', -np.pi/2)


class TransientTestCase(unittest.TestCase):

    def test_limits(self):

        self.assertAlmostEqual(transient_response(0.1, 0.4, 0.3, 0.), 0.1)
        self.assertAlmostEqual(transient_response(0.1, 0.4, 0.3, 1e3), 0.4)

    def test_waiting_time(self):

        residual = abs(transient_response(0., 1., 0.3, 4.) - 1.)

        self.assertLessEqual(residual, 1.7e-6)
        self.assertLess(settling_time(0.3, 1e-5), 4.)

    def test_invalid_tau(self):
        with self.assertRaises(ValueError):
            transient_response(0., 1., 0., 1.)

    def test_fit(self):

        times = np.linspace(0., 3., 61)
        signal = 0.2 + 0.5*np.exp(-times/0.3)

        fit = fit_transient(times, signal)

        self.assertAlmostEqual(fit.tau, 0.3, places=6)
        self.assertAlmostEqual(fit.offset, 0.2, places=6)


if __name__ == '__main__':
    unittest.main()
