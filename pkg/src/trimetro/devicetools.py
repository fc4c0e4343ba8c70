"""
This module collects the parameters of a simulated chip, the builtin
reference and ideal devices, and their JSON configuration files.

The reference device carries the characterized chip values: coupler
transmissions, tritter and static phases, thermal coefficients and the
measured benchmarks that the rest of the package reproduces.
"""

import importlib.resources
import json
import logging
import os
from typing import NamedTuple

import numpy as np

from trimetro.settings import settings
from trimetro.thermaltools import RESISTOR_NAMES, make_resistor_bank
from trimetro.unitarytools import IDEAL_TRITTER, TritterParams

logger = logging.getLogger(__name__)

BUILTIN_CONFIGS = ('reference', 'ideal')
REFERENCE_CONFIG_FILE = 'reference_device.json'

# Matrices implemented on the characterized chip with balanced tritters.
CHARACTERIZED_UA = np.array([
    [-0.441+0.557j, -0.468+0.148j, -0.504],
    [-0.466+0.150j, 0.494-0.391j, 0.602j],
    [-0.505, 0.601j, 0.619]])

CHARACTERIZED_UB = np.array([
    [-0.428+0.549j, -0.462+0.170j, -0.523],
    [-0.484+0.149j, 0.475-0.408j, 0.592j],
    [-0.509, 0.605j, 0.613]])

# Matrices implemented in the identity configuration. The real part of the
# (2, 1) entry of IDENTITY_UA is stored as +0.499: with a negative sign the
# second row is not orthogonal to the others.
IDENTITY_UA = np.array([
    [-0.368-0.562j, 0.476+0.220j, -0.523+0.003j],
    [0.499+0.202j, 0.431+0.417j, 0.002+0.592j],
    [-0.509, 0.605j, 0.613]])

IDENTITY_UB = np.array([
    [-0.392+0.564j, 0.452-0.266j, -0.504],
    [-0.487+0.191j, -0.390+0.460j, 0.605j],
    [-0.505+0.0147j, -0.080-0.596j, 0.619]])

# Measured figures of merit of the characterized chip.
CHARACTERIZED_ANCHORS = {
    'fidelity_a': 0.9830,
    'fidelity_b': 0.9863,
    'average_fidelity': 0.963,
    'three_photon_qfim_trace': 0.527,
    'three_photon_min_crb': 0.584,
    'internal_fit_chi_square': (3795., 3258),
    'tritter_fit_chi_square': (6591., 2418),
    'single_photon_r2': 0.965,
    'two_photon_r2': 0.835,
    'identity_similarity': 0.979,
    'visibility': 0.95,
    'setting_voltages': {'R1': 2.05, 'R2': 2.01, 'RTB': 5.94, 'RTA': 2.90},
    'transient_tau': 0.3,
}

WORKING_POINTS = {
    'estimation': (-1.159, 2.810),
    'hom_a': (1.745, -0.349),
    'hom_b': (1.048, 2.444),
}


class DeviceParams(NamedTuple):

    """
    A simulated chip: the two tritters at their operating phases and the
    thermal response of the six resistors.
    """

    tritter_a: TritterParams
    tritter_b: TritterParams
    bank: object


class DeviceConfig(NamedTuple):

    device: DeviceParams
    visibility: float = 1.
    name: str = 'custom'


def ideal_device():

    """
    Returns a device with ideal balanced tritters (phase +pi/2) and a
    linear thermal response with zero static phases. The tritter
    resistors reach both +pi/2 and -pi/2 below P_MAX, and R3, R4 set the
    two phase differences independently.
    """

    bank = make_resistor_bank(
        alpha_lin=[[20., 0., -10., -5.],
                   [0., 20., -5., -10.]],
        alpha_t_lin=[10., 10.])

    return DeviceParams(IDEAL_TRITTER, IDEAL_TRITTER, bank)


def reference_device():

    """
    Returns the characterized chip loaded from the bundled configuration.
    """

    return load_config('reference').device


def device_to_dict(device, visibility=1., name='custom'):

    """
    Serializes a device into nested tables whose keys follow the chip
    parameter symbols (T1A, phi_TA, dphi_10, alpha_11, alpha_nl_11, ...).
    """

    bank = device.bank

    tritters = {}
    for label, params in (('A', device.tritter_a), ('B', device.tritter_b)):
        tritters[f'tritter_{label.lower()}'] = {
            f'T1{label}': float(params.t1),
            f'T2{label}': float(params.t2),
            f'T3{label}': float(params.t3),
            f'phi_T{label}': float(params.phi_t)}

    static = dict(zip(('dphi_10', 'dphi_20', 'phi0_TA', 'phi0_TB'),
                      map(float, bank.static_phases)))

    thermal = {}
    for i in range(4):
        for j in range(2):
            thermal[f'alpha_{j+1}{i+1}'] = float(bank.alpha_lin[j, i])
    for i in range(4):
        for j in range(2):
            thermal[f'alpha_nl_{j+1}{i+1}'] = float(bank.alpha_nl[j, i])
    for idx, label in enumerate('AB'):
        thermal[f'alpha_T{label}'] = float(bank.alpha_t_lin[idx])
        thermal[f'alpha_nl_T{label}'] = float(bank.alpha_t_nl[idx])

    resistances = dict(zip(RESISTOR_NAMES, map(float, bank.resistances)))

    return {'name': name,
            'visibility': float(visibility),
            **tritters,
            'static_phases': static,
            'thermal': thermal,
            'resistances': resistances}


def device_from_dict(config_dict):

    """
    Builds a DeviceConfig from the nested tables of device_to_dict().

    Raises:
        ValueError: If a field is missing or a value is out of range.
    """

    try:
        tritters = []
        for label in 'AB':
            table = config_dict[f'tritter_{label.lower()}']
            tritters.append(TritterParams(table[f'T1{label}'],
                                          table[f'T2{label}'],
                                          table[f'T3{label}'],
                                          table[f'phi_T{label}']))

        static = config_dict['static_phases']
        thermal = config_dict['thermal']

        alpha_lin = [[thermal[f'alpha_{j}{i}'] for i in range(1, 5)]
                     for j in (1, 2)]
        alpha_nl = [[thermal[f'alpha_nl_{j}{i}'] for i in range(1, 5)]
                    for j in (1, 2)]

        default_r = settings.options['DEFAULT_RESISTANCE']
        resistances = config_dict.get('resistances', {})

        bank = make_resistor_bank(
            alpha_lin=alpha_lin,
            alpha_nl=alpha_nl,
            alpha_t_lin=[thermal['alpha_TA'], thermal['alpha_TB']],
            alpha_t_nl=[thermal['alpha_nl_TA'], thermal['alpha_nl_TB']],
            static_phases=[static['dphi_10'], static['dphi_20'],
                           static['phi0_TA'], static['phi0_TB']],
            resistances=[resistances.get(name, default_r)
                         for name in RESISTOR_NAMES])

    except KeyError as missing:
        raise ValueError(f'Device configuration misses the field {missing}.')

    for params in tritters:
        for t in params[:3]:
            if not 0 <= t <= 1:
                raise ValueError(f'Transmission {t} outside [0, 1].')

    visibility = float(config_dict.get('visibility', 1.))
    if not 0 <= visibility <= 1:
        raise ValueError(f'Visibility {visibility} outside [0, 1].')

    return DeviceConfig(DeviceParams(*tritters, bank),
                        visibility,
                        config_dict.get('name', 'custom'))


def config_to_json(config):

    """
    Returns the canonical text of a DeviceConfig: two-space indentation,
    fixed key order and a trailing newline.
    """

    config_dict = device_to_dict(config.device, config.visibility,
                                 config.name)

    return json.dumps(config_dict, indent=2) + '\n'


def config_from_json(text):
    return device_from_dict(json.loads(text))


def save_config(config, filename):

    with open(filename, 'w', encoding='utf-8') as file:
        file.write(config_to_json(config))


def default_config_path():

    """
    Returns the configuration named by the environment variable in
    settings.options['CONFIG_ENV_VAR'], or 'reference' if it is unset.
    """

    return os.environ.get(settings.options['CONFIG_ENV_VAR'], 'reference')


def load_config(path_or_name=None):

    """
    Loads a DeviceConfig from a JSON file or a builtin name
    ('reference' or 'ideal').
    """

    if path_or_name is None:
        path_or_name = default_config_path()

    if path_or_name == 'ideal':
        return DeviceConfig(ideal_device(), 1., 'ideal')

    if path_or_name == 'reference':
        text = importlib.resources.files('trimetro.data').joinpath(
            REFERENCE_CONFIG_FILE).read_text(encoding='utf-8')
    else:
        with open(path_or_name, 'r', encoding='utf-8') as file:
            text = file.read()

    logger.debug('Loaded device configuration from %s.', path_or_name)

    return config_from_json(text)
