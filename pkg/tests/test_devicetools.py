"""
This module defines tests for the device configurations.
"""

import json
import os
import tempfile
import unittest

import numpy as np

from trimetro import devicetools
from trimetro.settings import settings
from trimetro.unitarytools import IDEAL_TRITTER


class ConfigTestCase(unittest.TestCase):

    def test_reference_values(self):

        config = devicetools.load_config('reference')

        self.assertEqual(config.name, 'reference-device')
        self.assertAlmostEqual(config.visibility, 0.95)
        self.assertAlmostEqual(config.device.tritter_a.phi_t, 1.893)
        self.assertAlmostEqual(config.device.bank.alpha_lin[0, 0], 24.35)
        self.assertAlmostEqual(config.device.bank.alpha_t_lin[0], 9.06)
        self.assertAlmostEqual(config.device.bank.static_phases[2], 1.137)

    def test_ideal_device(self):

        config = devicetools.load_config('ideal')

        self.assertEqual(config.device.tritter_a, IDEAL_TRITTER)
        self.assertEqual(config.device.tritter_b, IDEAL_TRITTER)
        self.assertEqual(config.visibility, 1.)

    def test_json_round_trip(self):

        config = devicetools.load_config('reference')
        text = devicetools.config_to_json(config)

        restored = devicetools.config_from_json(text)

        self.assertEqual(devicetools.config_to_json(restored), text)
        self.assertTrue(text.endswith('\n'))

    def test_table_names(self):

        config_dict = json.loads(devicetools.config_to_json(
            devicetools.load_config('reference')))

        self.assertIn('T1A', config_dict['tritter_a'])
        self.assertIn('alpha_11', config_dict['thermal'])
        self.assertIn('alpha_nl_24', config_dict['thermal'])
        self.assertIn('dphi_10', config_dict['static_phases'])

    def test_plain_float_values(self):

        config_dict = devicetools.device_to_dict(
            devicetools.reference_device(), 0.95, 'reference-device')

        for section in ('tritter_a', 'tritter_b', 'static_phases', 'thermal',
                        'resistances'):
            for value in config_dict[section].values():
                self.assertIs(type(value), float)

        self.assertIs(type(config_dict['visibility']), float)

    def test_save_and_load(self):

        config = devicetools.load_config('ideal')

        with tempfile.TemporaryDirectory() as tmp_dir:
            filename = os.path.join(tmp_dir, 'device.json')
            devicetools.save_config(config, filename)
            restored = devicetools.load_config(filename)

        self.assertTrue(np.allclose(restored.device.bank.alpha_lin,
                                    config.device.bank.alpha_lin))

    def test_missing_field(self):

        config_dict = devicetools.device_to_dict(
            devicetools.ideal_device())
        del config_dict['thermal']['alpha_TA']

        with self.assertRaises(ValueError):
            devicetools.device_from_dict(config_dict)

    def test_invalid_transmission(self):

        config_dict = devicetools.device_to_dict(
            devicetools.ideal_device())
        config_dict['tritter_b']['T2B'] = 1.5

        with self.assertRaises(ValueError):
            devicetools.device_from_dict(config_dict)

    def test_environment_variable(self):

        env_var = settings.options['CONFIG_ENV_VAR']
        previous = os.environ.pop(env_var, None)

        try:
            self.assertEqual(devicetools.default_config_path(), 'reference')
            os.environ[env_var] = 'ideal'
            self.assertEqual(devicetools.load_config().name, 'ideal')
        finally:
            os.environ.pop(env_var, None)
            if previous is not None:
                os.environ[env_var] = previous


if __name__ == '__main__':
    unittest.main()
