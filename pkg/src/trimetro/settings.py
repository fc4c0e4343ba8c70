"""
This module contains the settings for trimetro.
Additional settings or modifications of the existing ones can be achieved
by modifying the file trimetro_settings.json.
"""

import json
import os


class Settings:

    filename = 'trimetro_settings.json'

    options = {}

    # Tolerance on max|U U^dagger - I| for a matrix to count as unitary.
    options['UNITARITY_TOL'] = 1e-10

    # Thermal phase control.
    # Maximum dissipated power per resistor (W) accepted by the inverse
    # solvers, and the damped Newton stopping rules.
    options['P_MAX'] = 1.2
    options['NEWTON_TOL'] = 1e-12
    options['NEWTON_MAX_ITER'] = 50
    # Points per axis of the feasibility scan of the inverse solver.
    options['BRANCH_SCAN_POINTS'] = 21

    # Resistance assigned when a configuration omits it (ohm).
    options['DEFAULT_RESISTANCE'] = 80.

    # Thermalization transient (s).
    options['TRANSIENT_TAU'] = 0.3
    options['TRANSIENT_WAIT'] = 4.

    # Pairwise photon indistinguishability.
    options['VISIBILITY'] = 0.95

    # Fisher information.
    # Events below MIN_EVENT_PROB do not contribute to the sum.
    options['MIN_EVENT_PROB'] = 1e-12
    options['SINGULAR_CONDITION'] = 1e12
    options['EIGEN_TOL'] = 1e-10

    # Maximum likelihood estimation.
    options['MLE_GRID_POINTS'] = 64
    options['MLE_HALF_WIDTH'] = 0.6
    options['MLE_TOL'] = 1e-6

    # Characterization scans.
    options['SCAN_POINTS'] = 60
    options['SCAN_MAX_POWER'] = 1.
    options['SCAN_COUNTS'] = 2000

    # Least squares stopping rules. See characterization/fittools.py
    options['FIT_FTOL'] = 1e-10
    options['FIT_XTOL'] = 1e-12
    options['FIT_GTOL'] = 1e-12
    options['FIT_MAX_NFEV'] = 200

    # Fourier initialization. See characterization/fouriertools.py
    # Zero padding factor of the spectrum.
    options['FOURIER_PAD_FACTOR'] = 32
    # Peaks below this fraction of the strongest peak of a curve are dropped.
    options['FOURIER_MIN_AMPLITUDE'] = 0.25
    # Fraction of the curves of a resistor that must share a harmonic.
    options['FOURIER_SHARED_FRACTION'] = 0.5
    # Harmonics with fewer oscillations over the scan are not resolvable.
    options['FOURIER_MIN_CYCLES'] = 1.

    # Arm nearest to each internal resistor (0 stands for the reference arm).
    options['RESISTOR_ARMS'] = {'R1': 1, 'R2': 2, 'R3': 0, 'R4': 0}

    # Tritter setting procedure.
    options['SETTING_GRID_POINTS'] = 41
    options['SETTING_RESIDUAL_TOL'] = 1e-3

    # Identity configuration.
    options['IDENTITY_MAX_ITER'] = 300
    options['IDENTITY_TOL'] = 1e-12

    # Progress bars on stderr for long loops.
    options['SHOW_PROGRESS'] = True

    # Environment variable overriding the default device configuration.
    options['CONFIG_ENV_VAR'] = 'TRIMETRO_CONFIG'

    # Plotting
    options['CURVE_COLORS'] = ["#921417", "#2E8B57", "#305CDE"]
    options['MAP_COLORS'] = ["#FFFFFF", "#E7ACAE", "#921417"]

    # Number of tries to search for the trimetro_settings.json
    # up the file tree.
    NUM_TRIES = 3

    def __init__(self):

        self.read_from_file()
        self.options.update(self.options_from_file)

    def get_options(self):
        return self.options

    def __repr__(self):

        return '\n'.join(f"{option_name:^24}: \t {value}"
                         for option_name, value in self.options.items())

    def read_from_file(self):

        path = os.getcwd()
        self.options_from_file = {}

        for _ in range(self.NUM_TRIES):

            filepath = os.path.join(path, self.filename)

            try:
                with open(filepath, 'r', encoding='utf-8') as file:
                    self.options_from_file = json.load(file)
                break
            except FileNotFoundError:
                path = os.path.dirname(path)


settings = Settings()
