"""
This module fits the device model to the characterization scans by
weighted nonlinear least squares.

The internal-resistor fit estimates 26 parameters: the six coupler
transmissions, the two tritter phases, the two static internal phases and
the 16 thermal coefficients. The tritter-resistor fit estimates the static
phases and the thermal coefficients of the two tritter phases, the other
parameters being known.
"""

import json
import logging
import warnings
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import scipy.optimize

from trimetro.characterization import fouriertools
from trimetro.characterization.scantools import make_point_model
from trimetro.devicetools import DeviceParams, ideal_device
from trimetro.settings import settings
from trimetro.unitarytools import IDEAL_TRITTER, TritterParams, wrap_phase

logger = logging.getLogger(__name__)

INTERNAL_PARAM_NAMES = (
    ('T1A', 'T2A', 'T3A', 'T1B', 'T2B', 'T3B', 'phi_TA', 'phi_TB',
     'dphi_10', 'dphi_20')
    + tuple(f'alpha_{j}{i}' for i in range(1, 5) for j in (1, 2))
    + tuple(f'alpha_nl_{j}{i}' for i in range(1, 5) for j in (1, 2)))

TRITTER_PARAM_NAMES = ('phi0_TA', 'phi0_TB', 'alpha_TA', 'alpha_TB',
                       'alpha_nl_TA', 'alpha_nl_TB')

TRANSMISSION_SLICE = slice(0, 6)

# Parameters whose sign flips under complex conjugation of the device.
_CONJUGATE_SLICE = slice(6, 26)


class FitResult(NamedTuple):

    """
    Attributes:
        params (dict): The best fit values by parameter name.
        errors (dict): The 1-sigma errors from the covariance matrix of the
        weighted residuals.
        chi_square (float): The weighted sum of squared residuals.
        n_points (int): The number of data points.
        converged (bool): Whether the solver met a stopping tolerance.
        device (DeviceParams): The fitted device.
        message (str): The solver message.
    """

    params: dict
    errors: dict
    chi_square: float
    n_points: int
    converged: bool
    device: DeviceParams
    message: str = ''

    @property
    def n_params(self):
        return len(self.params)

    @property
    def reduced_chi_square(self):
        return self.chi_square/max(self.n_points - self.n_params, 1)

    def to_dict(self):
        return {'parameters': {name: float(value)
                               for name, value in self.params.items()},
                'errors_1sigma': {name: float(value)
                                  for name, value in self.errors.items()},
                'chi_square': float(self.chi_square),
                'n_points': int(self.n_points),
                'n_params': self.n_params,
                'reduced_chi_square': float(self.reduced_chi_square),
                'converged': bool(self.converged)}


def save_fit_result(result, filename):

    with open(filename, 'w', encoding='utf-8') as file:
        file.write(json.dumps(result.to_dict(), indent=2) + '\n')


def pack_internal(device):

    """
    Returns the 26 internal parameters of a device, ordered as
    INTERNAL_PARAM_NAMES.
    """

    bank = device.bank

    return np.concatenate([
        np.asarray(device.tritter_a[:3], dtype=float),
        np.asarray(device.tritter_b[:3], dtype=float),
        [device.tritter_a.phi_t, device.tritter_b.phi_t],
        np.asarray(bank.static_phases[:2], dtype=float),
        np.asarray(bank.alpha_lin, dtype=float).T.ravel(),
        np.asarray(bank.alpha_nl, dtype=float).T.ravel()])


def unpack_internal(x, template):

    """
    Builds a DeviceParams from the 26 internal parameters. The tritter
    resistor response and the resistances are taken from the template.
    Works with traced jax arrays.
    """

    tritter_a = TritterParams(x[0], x[1], x[2], x[6])
    tritter_b = TritterParams(x[3], x[4], x[5], x[7])

    static = jnp.concatenate([x[8:10],
                              jnp.asarray(template.bank.static_phases[2:])])

    bank = template.bank._replace(alpha_lin=x[10:18].reshape(4, 2).T,
                                  alpha_nl=x[18:26].reshape(4, 2).T,
                                  static_phases=static)

    return DeviceParams(tritter_a, tritter_b, bank)


def pack_tritter(device):

    bank = device.bank

    return np.concatenate([np.asarray(bank.static_phases[2:], dtype=float),
                           np.asarray(bank.alpha_t_lin, dtype=float),
                           np.asarray(bank.alpha_t_nl, dtype=float)])


def unpack_tritter(x, known):

    static = jnp.concatenate([jnp.asarray(known.bank.static_phases[:2]),
                              x[0:2]])

    bank = known.bank._replace(static_phases=static,
                               alpha_t_lin=x[2:4],
                               alpha_t_nl=x[4:6])

    return known._replace(bank=bank)


def canonicalize_gauge(x):

    """
    Maps internal parameters to the representative of their gauge class:
    the phases are wrapped to (-pi, pi] and, since conjugating the device
    flips the sign of the phases and thermal coefficients without changing
    any probability, the sign is chosen with phi_TA in [0, pi].
    """

    x = np.array(x, dtype=float)
    x[6:10] = np.asarray(wrap_phase(x[6:10]))

    if x[6] < 0:
        x[_CONJUGATE_SLICE] = -x[_CONJUGATE_SLICE]
        x[6:10] = np.asarray(wrap_phase(x[6:10]))

    return x


def _scan_arrays(scan):

    flat = scan.flat()

    return (flat['resistor'], flat['power'], flat['input'], flat['output'],
            flat['prob'], flat['std_err'])


def _make_residual_fun(scan, to_device):

    resistor_idx, powers, inputs, outputs, data, sigma = _scan_arrays(scan)

    if np.any(sigma <= 0):
        raise ValueError('Standard errors must be positive.')

    point_model = make_point_model(scan.protocol)

    resistor_idx = jnp.asarray(resistor_idx)
    powers = jnp.asarray(powers)
    inputs = jnp.asarray(inputs)
    outputs = jnp.asarray(outputs)
    data = jnp.asarray(data)
    sigma = jnp.asarray(sigma)
    point_range = jnp.arange(len(data))

    @jax.jit
    def residual_fun(x):
        probs = point_model(to_device(x), resistor_idx, powers)
        model = probs[point_range, inputs, outputs]
        return (model - data)/sigma

    return residual_fun


def _chi_square(residual_fun, x):
    return float(np.sum(np.asarray(residual_fun(jnp.asarray(x)))**2))


def _static_phase_search(residual_fun, x0, num_points=12):

    """
    Scans the two static internal phases on a coarse grid, the other
    parameters being held, and returns the best start.
    """

    best_x, best_chi2 = np.array(x0), _chi_square(residual_fun, x0)
    axis = np.linspace(-np.pi, np.pi, num_points, endpoint=False)

    for phase1 in axis:
        for phase2 in axis:
            x = np.array(x0)
            x[8:10] = phase1, phase2
            chi2 = _chi_square(residual_fun, x)
            if chi2 < best_chi2:
                best_x, best_chi2 = x, chi2

    return best_x


def initial_guess(scan, template, fourier=None):

    """
    Builds the starting point of the internal fit: balanced tritter values
    for the couplers and the tritter phases, the Fourier estimates for the
    linear thermal coefficients, zero quadratic coefficients and the best
    static phases of a coarse grid.

    Args:
        scan (ScanDataset): The internal-resistor scan.
        template (DeviceParams): Supplies the tritter resistor response.
        fourier (FourierInit): Computed from the scan if None.

    Returns:
        The 26 starting parameters.
    """

    if fourier is None:
        fourier = fouriertools.fourier_init(scan)

    x0 = np.concatenate([
        IDEAL_TRITTER[:3], IDEAL_TRITTER[:3],
        [IDEAL_TRITTER.phi_t, IDEAL_TRITTER.phi_t],
        [0., 0.],
        fourier.alpha_lin.T.ravel(),
        fourier.alpha_nl.T.ravel()])

    residual_fun = _make_residual_fun(
        scan, lambda x: unpack_internal(x, template))

    return _static_phase_search(residual_fun, x0)


def _least_squares(residual_fun, x0, lower, upper):

    jac_fun = jax.jit(jax.jacfwd(residual_fun))

    def fun(x):
        return np.asarray(residual_fun(jnp.asarray(x)))

    def jac(x):
        return np.asarray(jac_fun(jnp.asarray(x)))

    # The trust region reflective method needs a strictly feasible start.
    x0 = np.clip(x0, lower + 1e-9, upper - 1e-9)

    result = scipy.optimize.least_squares(
        fun, x0, jac=jac, bounds=(lower, upper), method='trf',
        ftol=settings.options['FIT_FTOL'],
        xtol=settings.options['FIT_XTOL'],
        gtol=settings.options['FIT_GTOL'],
        max_nfev=settings.options['FIT_MAX_NFEV'],
        x_scale='jac')

    return result, jac


def _covariance_errors(jacobian):

    try:
        covariance = np.linalg.inv(jacobian.T @ jacobian)
    except np.linalg.LinAlgError:
        covariance = np.linalg.pinv(jacobian.T @ jacobian)

    return np.sqrt(np.clip(np.diag(covariance), 0., None))


def _finish(names, x, result, jac, n_points, device, kind):

    errors = _covariance_errors(jac(x))
    chi_square = float(2*result.cost)
    converged = bool(result.success and result.status > 0)

    if not converged:
        warnings.warn(f'The {kind} fit did not converge: {result.message}',
                      RuntimeWarning, stacklevel=3)

    logger.info('%s fit finished: chi^2 = %.2f over %d points '
                '(%d evaluations).', kind.capitalize(), chi_square,
                n_points, result.nfev)

    return FitResult(params=dict(zip(names, x)),
                     errors=dict(zip(names, errors)),
                     chi_square=chi_square,
                     n_points=n_points,
                     converged=converged,
                     device=device,
                     message=str(result.message))


def fit_device(scan, init=None, template=None):

    """
    Fits the 26 internal parameters to an internal-resistor scan,
    minimizing sum[(P_model - P_data)/sigma]^2 with the trust region
    reflective method and the exact Jacobian. Transmissions are bounded to
    [0, 1]. The result is reported in the canonical gauge.

    Args:
        scan (ScanDataset): The internal-resistor scan.
        init (array or DeviceParams): The starting point. If None, it is
        computed by initial_guess().
        template (DeviceParams): Supplies the tritter resistor response and
        the resistances. Defaults to the init device or the ideal device.

    Returns:
        A FitResult. A fit stopped by the evaluation limit has
        converged=False and carries the best point found.
    """

    if scan.protocol != 'internal':
        raise ValueError('fit_device needs an internal-resistor scan.')

    if template is None:
        if isinstance(init, DeviceParams):
            template = init
        else:
            template = ideal_device()

    if init is None:
        x0 = initial_guess(scan, template)
    elif isinstance(init, DeviceParams):
        x0 = pack_internal(init)
    else:
        x0 = np.asarray(init, dtype=float)

    residual_fun = _make_residual_fun(
        scan, lambda x: unpack_internal(x, template))

    lower = np.full(len(INTERNAL_PARAM_NAMES), -np.inf)
    upper = np.full(len(INTERNAL_PARAM_NAMES), np.inf)
    lower[TRANSMISSION_SLICE], upper[TRANSMISSION_SLICE] = 0., 1.

    logger.info('Internal fit of %d parameters on %d points.',
                len(x0), scan.n_points)

    result, jac = _least_squares(residual_fun, x0, lower, upper)

    x = canonicalize_gauge(result.x)
    device = unpack_internal(jnp.asarray(x), template)
    device = _concrete_device(device)

    return _finish(INTERNAL_PARAM_NAMES, x, result, jac, scan.n_points,
                   device, 'internal')


def fit_tritter_resistors(scan, known, init=None):

    """
    Fits the static phases and the thermal coefficients of the two tritter
    phases to a tritter-resistor scan, the other parameters being held at
    the known values.

    Args:
        scan (ScanDataset): The tritter-resistor scan.
        known (DeviceParams): The device with the internal parameters.
        init (array): The 6 starting values ordered as TRITTER_PARAM_NAMES.
        By default: a coarse grid over the static phases with linear
        coefficients of 5 rad/W and no quadratic terms.

    Returns:
        A FitResult with 6 parameters.
    """

    if scan.protocol != 'tritter':
        raise ValueError('fit_tritter_resistors needs a tritter-resistor '
                         'scan.')

    residual_fun = _make_residual_fun(scan,
                                      lambda x: unpack_tritter(x, known))

    if init is None:
        init = _tritter_grid_start(residual_fun)

    num = len(TRITTER_PARAM_NAMES)

    logger.info('Tritter fit of %d parameters on %d points.',
                num, scan.n_points)

    result, jac = _least_squares(residual_fun, np.asarray(init, dtype=float),
                                 np.full(num, -np.inf), np.full(num, np.inf))

    x = np.array(result.x)
    x[0:2] = np.asarray(wrap_phase(x[0:2]))

    device = _concrete_device(unpack_tritter(jnp.asarray(x), known))

    return _finish(TRITTER_PARAM_NAMES, x, result, jac, scan.n_points,
                   device, 'tritter')


def _tritter_grid_start(residual_fun, num_points=12):

    axis = np.linspace(-np.pi, np.pi, num_points, endpoint=False)

    best_x, best_chi2 = None, np.inf
    for phase_a in axis:
        for phase_b in axis:
            x = np.array([phase_a, phase_b, 5., 5., 0., 0.])
            chi2 = _chi_square(residual_fun, x)
            if chi2 < best_chi2:
                best_x, best_chi2 = x, chi2

    return best_x


def _concrete_device(device):

    """
    Converts the jax leaves of a device to numpy arrays and floats.
    """

    def to_float(params):
        return TritterParams(*(float(value) for value in params))

    bank = device.bank._replace(**{
        field: np.asarray(getattr(device.bank, field), dtype=float)
        for field in device.bank._fields})

    return DeviceParams(to_float(device.tritter_a),
                        to_float(device.tritter_b),
                        bank)


def parameter_errors(result, truth):

    """
    Returns the absolute deviations of the fitted parameters from the
    values of a true device, in the canonical gauge.
    """

    if set(result.params) == set(INTERNAL_PARAM_NAMES):
        reference = canonicalize_gauge(pack_internal(truth))
        names = INTERNAL_PARAM_NAMES
    else:
        reference = pack_tritter(truth)
        reference[0:2] = np.asarray(wrap_phase(reference[0:2]))
        names = TRITTER_PARAM_NAMES

    return {name: abs(float(result.params[name]) - ref)
            for name, ref in zip(names, reference)}
