"""
This module defines tests for the multiphoton output probabilities.
"""

import itertools
import unittest

import numpy as np

from trimetro import devicetools
from trimetro.photontools import (DistinguishabilityModel, FockState,
                                  hom_scan, multiphoton_probs,
                                  output_events, permanent,
                                  single_photon_probs, three_photon_probs,
                                  two_photon_probs)
from trimetro.unitarytools import (IDEAL_TRITTER, PhaseVector, TritterParams,
                                   coupler_matrix, interferometer,
                                   symmetric_tritter)


def random_unitaries(seed, num):

    rng = np.random.default_rng(seed)
    unitaries = []
    for _ in range(num):
        ta, tb = [TritterParams(*rng.uniform(0, 1, 3),
                                rng.uniform(-np.pi, np.pi))
                  for _ in range(2)]
        phases = PhaseVector(*rng.uniform(0, 2*np.pi, 2))
        unitaries.append(np.asarray(interferometer(ta, tb, phases)))

    return unitaries


def brute_force_coincidence(u):

    """
    Sums the amplitudes of the 3! ways three photons, one per input mode,
    leave one per output mode.
    """

    amplitude = sum(u[perm[0], 0]*u[perm[1], 1]*u[perm[2], 2]
                    for perm in itertools.permutations(range(3)))

    return abs(amplitude)**2


class PermanentTestCase(unittest.TestCase):

    def test_identity(self):
        self.assertAlmostEqual(float(permanent(np.eye(2))), 1.)

    def test_all_ones(self):
        self.assertAlmostEqual(float(permanent(np.ones((3, 3)))), 6.)

    def test_two_by_two(self):

        a, b, c, d = 1.5, -2., 0.5, 3.

        self.assertAlmostEqual(float(permanent(np.array([[a, b], [c, d]]))),
                               a*d + b*c)

    def test_non_square(self):
        with self.assertRaises(ValueError):
            permanent(np.ones((2, 3)))


class EventsTestCase(unittest.TestCase):

    def test_event_counts(self):

        self.assertEqual(len(output_events(1)), 3)
        self.assertEqual(len(output_events(2)), 6)
        self.assertEqual(len(output_events(3)), 10)

    def test_event_labels(self):
        self.assertEqual([event.label for event in output_events(2)],
                         ['11', '12', '13', '22', '23', '33'])

    def test_fock_state(self):

        state = FockState.from_modes((3, 2))

        self.assertEqual(state.occupations, (0, 1, 1))
        self.assertEqual(state.label, '23')

        with self.assertRaises(ValueError):
            FockState.from_modes((4,))


class SinglePhotonTestCase(unittest.TestCase):

    def test_identity(self):

        dist = single_photon_probs(np.eye(3), 2)

        self.assertTrue(np.allclose(dist.probs, [0., 1., 0.]))

    def test_symmetric_tritter(self):

        for mode in (1, 2, 3):
            dist = single_photon_probs(symmetric_tritter(), mode)
            self.assertTrue(np.allclose(dist.probs, 1/3))

    def test_balanced_setting(self):

        u = interferometer(IDEAL_TRITTER, IDEAL_TRITTER,
                           PhaseVector(2*np.pi/3, np.pi/3))

        self.assertAlmostEqual(single_photon_probs(u, 3).prob((3,)), 0.,
                               places=12)


class TwoPhotonTestCase(unittest.TestCase):

    def setUp(self):
        self.splitter = np.asarray(coupler_matrix(0.5, 12))

    def test_identity(self):

        dist = two_photon_probs(np.eye(3), (2, 3))

        self.assertAlmostEqual(dist.prob((2, 3)), 1.)
        self.assertAlmostEqual(sum(dist.probs) - dist.prob((2, 3)), 0.)

    def test_hong_ou_mandel_dip(self):

        dist = two_photon_probs(self.splitter, (1, 2))

        self.assertAlmostEqual(dist.prob((1, 2)), 0.)
        self.assertAlmostEqual(dist.prob((1, 1)), 0.5)
        self.assertAlmostEqual(dist.prob((2, 2)), 0.5)

    def test_distinguishable(self):

        dist = two_photon_probs(self.splitter, (1, 2),
                                DistinguishabilityModel(0.))

        self.assertAlmostEqual(dist.prob((1, 2)), 0.5)
        self.assertAlmostEqual(dist.prob((1, 1)), 0.25)
        self.assertAlmostEqual(dist.prob((2, 2)), 0.25)

    def test_normalization(self):

        for u in random_unitaries(13, 10):
            for visibility in (0., 0.5, 0.95, 1.):
                dist = two_photon_probs(
                    u, (1, 3), DistinguishabilityModel(visibility))
                self.assertAlmostEqual(float(np.sum(dist.probs)), 1.,
                                       places=9)
                self.assertTrue(np.all(dist.probs >= -1e-12))

    def test_invalid_input(self):

        with self.assertRaises(ValueError):
            two_photon_probs(np.eye(3), (1, 1))

        with self.assertRaises(ValueError):
            DistinguishabilityModel(1.2).effective_visibility()


class HomScanTestCase(unittest.TestCase):

    def setUp(self):

        device = devicetools.reference_device()
        self.u = interferometer(device.tritter_a, device.tritter_b,
                                PhaseVector(*devicetools.WORKING_POINTS[
                                    'hom_a']))
        self.model = DistinguishabilityModel(0.95)

    def test_limits(self):

        far, zero = hom_scan(self.u, (2, 3), [50., 0.], self.model)

        self.assertTrue(np.allclose(
            far.probs,
            two_photon_probs(self.u, (2, 3),
                             DistinguishabilityModel(0.)).probs))
        self.assertTrue(np.allclose(
            zero.probs, two_photon_probs(self.u, (2, 3), self.model).probs))

    def test_monotone(self):

        delays = np.linspace(0., 3., 13)
        probs = np.array([dist.probs for dist in
                          hom_scan(self.u, (2, 3), delays, self.model)])

        diffs = np.diff(probs, axis=0)

        for column in diffs.T:
            self.assertTrue(np.all(column >= -1e-12)
                            or np.all(column <= 1e-12))


class ThreePhotonTestCase(unittest.TestCase):

    def test_identity(self):

        dist = three_photon_probs(np.eye(3))

        self.assertAlmostEqual(dist.prob((1, 2, 3)), 1.)

    def test_normalization(self):

        for u in random_unitaries(17, 10):
            for visibility in (0., 0.7, 1.):
                dist = three_photon_probs(
                    u, model=DistinguishabilityModel(visibility))
                self.assertAlmostEqual(float(np.sum(dist.probs)), 1.,
                                       places=9)

    def test_brute_force_coincidence(self):

        u = np.asarray(symmetric_tritter())
        dist = three_photon_probs(u)

        self.assertAlmostEqual(dist.prob((1, 2, 3)),
                               brute_force_coincidence(u), places=12)

    def test_general_occupations(self):

        u = random_unitaries(19, 1)[0]
        dist = multiphoton_probs(u, FockState((2, 1, 0)))

        self.assertEqual(len(dist.probs), 10)
        self.assertAlmostEqual(float(np.sum(dist.probs)), 1., places=9)


if __name__ == '__main__':
    unittest.main()
