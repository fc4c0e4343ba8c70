"""
This module maps resistor voltages to dissipated powers and to the phases
of the interferometer through the thermo-optic response

    dphi_j = dphi_j0 + sum_i (alpha_ji P_i + alpha_nl_ji P_i^2),

with i over the four internal resistors, and similarly for the two tritter
phases. It also provides the inverse map and the thermalization transient.
"""

import itertools
import logging
from typing import NamedTuple

import jax.numpy as jnp
import numpy as np
import scipy.optimize

from trimetro.settings import settings
from trimetro.unitarytools import PhaseVector, wrap_phase

logger = logging.getLogger(__name__)

RESISTOR_NAMES = ('R1', 'R2', 'R3', 'R4', 'RTA', 'RTB')
INTERNAL_RESISTORS = RESISTOR_NAMES[:4]
TRITTER_RESISTORS = {'A': 'RTA', 'B': 'RTB'}


class UnreachablePhaseError(ValueError):

    """
    Raised when a target phase cannot be produced with powers in
    [0, P_MAX]. The nearest achievable phases and the powers producing
    them are attached.
    """

    def __init__(self, message, nearest=None, nearest_powers=None):
        super().__init__(message)
        self.nearest = nearest
        self.nearest_powers = nearest_powers


class ResistorBank(NamedTuple):

    """
    The thermal response of the device.

    Attributes:
        resistances (array): R1, R2, R3, R4, RTA, RTB (ohm).
        alpha_lin (array): 2x4 linear coefficients (rad/W). Rows index
        (dphi1, dphi2), columns the internal resistors.
        alpha_nl (array): 2x4 quadratic coefficients (rad/W^2).
        alpha_t_lin (array): Linear coefficients of the tritter phases
        (A, B) with respect to RTA and RTB (rad/W).
        alpha_t_nl (array): Quadratic coefficients of the tritter phases
        (rad/W^2).
        static_phases (array): dphi_10, dphi_20, phi0_TA, phi0_TB (rad).
    """

    resistances: np.ndarray
    alpha_lin: np.ndarray
    alpha_nl: np.ndarray
    alpha_t_lin: np.ndarray
    alpha_t_nl: np.ndarray
    static_phases: np.ndarray


def make_resistor_bank(*, alpha_lin, alpha_nl=None, alpha_t_lin=(0., 0.),
                       alpha_t_nl=(0., 0.), static_phases=(0., 0., 0., 0.),
                       resistances=None):

    """
    Creates a validated ResistorBank. Missing quadratic coefficients are
    zero and missing resistances take settings.options['DEFAULT_RESISTANCE'].

    Raises:
        ValueError: For non-positive resistances or wrong shapes.
    """

    if resistances is None:
        resistances = [settings.options['DEFAULT_RESISTANCE']]*6

    alpha_lin = np.asarray(alpha_lin, dtype=float)
    if alpha_nl is None:
        alpha_nl = np.zeros_like(alpha_lin)

    bank = ResistorBank(resistances=np.asarray(resistances, dtype=float),
                        alpha_lin=alpha_lin,
                        alpha_nl=np.asarray(alpha_nl, dtype=float),
                        alpha_t_lin=np.asarray(alpha_t_lin, dtype=float),
                        alpha_t_nl=np.asarray(alpha_t_nl, dtype=float),
                        static_phases=np.asarray(static_phases, dtype=float))

    expected_shapes = {'resistances': (6,), 'alpha_lin': (2, 4),
                       'alpha_nl': (2, 4), 'alpha_t_lin': (2,),
                       'alpha_t_nl': (2,), 'static_phases': (4,)}

    for field, shape in expected_shapes.items():
        if getattr(bank, field).shape != shape:
            raise ValueError(f'{field} must have shape {shape}, '
                             f'got {getattr(bank, field).shape}.')

    if np.any(bank.resistances <= 0):
        raise ValueError('All resistances must be strictly positive.')

    return bank


class VoltageSetting(NamedTuple):

    """
    The voltages applied on R1, R2, R3, R4, RTA, RTB (V).
    """

    voltages: np.ndarray


class ThermalPhases(NamedTuple):

    phases: PhaseVector
    phi_ta: float
    phi_tb: float


def dissipated_power(v, r):

    """
    Returns the power v^2/r dissipated on a resistor (W).

    Raises:
        ValueError: If r <= 0 or v < 0.
    """

    v = np.asarray(v, dtype=float)
    r = np.asarray(r, dtype=float)

    if np.any(r <= 0):
        raise ValueError(f'Resistance must be positive, got {r}.')
    if np.any(v < 0):
        raise ValueError(f'Voltage must be nonnegative, got {v}.')

    power = v**2/r

    return float(power) if power.ndim == 0 else power


def powers_from_voltages(bank, setting):

    voltages = np.asarray(setting.voltages if isinstance(
        setting, VoltageSetting) else setting, dtype=float)

    return dissipated_power(voltages, bank.resistances)


def voltages_from_powers(bank, powers):

    """
    Returns the VoltageSetting that dissipates the given six powers.
    """

    powers = np.asarray(powers, dtype=float)

    if np.any(powers < 0):
        raise ValueError('Powers must be nonnegative.')

    return VoltageSetting(np.sqrt(powers*bank.resistances))


def phases_from_powers(bank, powers):

    """
    Evaluates the thermal response for the six dissipated powers.

    Args:
        bank (ResistorBank): The thermal model.
        powers (array): Powers on R1, R2, R3, R4, RTA, RTB (W).

    Returns:
        A ThermalPhases tuple (PhaseVector, phi_ta, phi_tb).
    """

    powers = jnp.asarray(powers)
    internal = powers[:4]
    tritters = powers[4:]

    static = jnp.asarray(bank.static_phases)

    dphi = (static[:2]
            + jnp.asarray(bank.alpha_lin) @ internal
            + jnp.asarray(bank.alpha_nl) @ internal**2)

    phi_t = (static[2:]
             + jnp.asarray(bank.alpha_t_lin)*tritters
             + jnp.asarray(bank.alpha_t_nl)*tritters**2)

    return ThermalPhases(PhaseVector(dphi[0], dphi[1]), phi_t[0], phi_t[1])


def _internal_response(bank, active, base_powers):

    """
    Returns (offset, A, B) such that dphi(P) = offset + A P + B P^2 for the
    two active resistors, the other powers being held at base_powers.
    """

    idx = [INTERNAL_RESISTORS.index(name) for name in active]

    base = np.array(base_powers, dtype=float)
    base[idx] = 0.

    offset = np.asarray(phases_from_powers(
        bank, np.concatenate([base, np.zeros(2)])).phases.as_array())

    return offset, bank.alpha_lin[:, idx], bank.alpha_nl[:, idx]


def _damped_newton(residual, jacobian, x0, tol, max_iter):

    x = np.array(x0, dtype=float)
    f = residual(x)

    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol:
            return x, True

        try:
            step = np.linalg.solve(jacobian(x), f)
        except np.linalg.LinAlgError:
            return x, False

        damping = 1.
        while damping > 1e-6:
            x_new = x - damping*step
            f_new = residual(x_new)
            if np.linalg.norm(f_new) < np.linalg.norm(f):
                break
            damping /= 2

        x, f = x_new, f_new

    return x, bool(np.max(np.abs(f)) < tol)


def powers_for_target_phases(bank, target, active=('R1', 'R2'), p_max=None,
                             base_powers=None):

    """
    Finds the powers on two internal resistors that produce the target
    phase differences modulo 2pi.

    Every 2pi branch reachable within [0, p_max]^2 is solved by damped
    Newton iterations started from the linearized solution, and the
    solution with the minimal total power is returned.

    Args:
        bank (ResistorBank): The thermal model.
        target (PhaseVector): The target phase differences.
        active (tuple): Two distinct names among R1..R4.
        p_max (float): Maximum power per resistor (W).
        base_powers (array): Powers held on the four internal resistors
        (the active entries are ignored). Zero by default.

    Returns:
        An array with the two powers (W).

    Raises:
        UnreachablePhaseError: If no branch is reachable. The exception
        carries the nearest achievable phases.
    """

    if p_max is None:
        p_max = settings.options['P_MAX']

    active = tuple(active)
    if (len(active) != 2 or len(set(active)) != 2
            or not set(active) <= set(INTERNAL_RESISTORS)):
        raise ValueError(f'Expected two distinct internal resistors, '
                         f'got {active}.')

    if base_powers is None:
        base_powers = np.zeros(4)

    tol = settings.options['NEWTON_TOL']
    max_iter = settings.options['NEWTON_MAX_ITER']

    offset, lin, quad = _internal_response(bank, active, base_powers)
    target_arr = np.array([float(target.dphi1), float(target.dphi2)])

    def response(powers):
        return offset + lin @ powers + quad @ powers**2

    # Phase excursion available in the box, to enumerate the 2pi branches.
    num = settings.options['BRANCH_SCAN_POINTS']
    axis = np.linspace(0., p_max, num)
    box = np.array(list(itertools.product(axis, axis)))
    reachable = np.array([response(powers) for powers in box])

    k_ranges = [range(int(np.floor((reachable[:, j].min()
                                    - target_arr[j])/(2*np.pi))),
                      int(np.ceil((reachable[:, j].max()
                                   - target_arr[j])/(2*np.pi))) + 1)
                for j in range(2)]

    solutions = []

    for k in itertools.product(*k_ranges):

        shifted = target_arr + 2*np.pi*np.array(k)

        def residual(powers):
            return response(powers) - shifted

        def jacobian(powers):
            return lin + 2*quad*powers[None, :]

        try:
            x0 = np.linalg.solve(lin, shifted - offset)
        except np.linalg.LinAlgError:
            x0 = np.full(2, p_max/2)

        powers, converged = _damped_newton(residual, jacobian, x0,
                                           tol, max_iter)

        if converged and np.all(powers >= -tol) and \
                np.all(powers <= p_max + tol):
            solutions.append(np.clip(powers, 0., p_max))

    if not solutions:

        def wrapped_distance(powers):
            return np.sum(np.asarray(wrap_phase(response(powers)
                                                - target_arr))**2)

        start = box[np.argmin([wrapped_distance(p) for p in box])]
        nearest = scipy.optimize.minimize(wrapped_distance, start,
                                          method='L-BFGS-B',
                                          bounds=[(0., p_max)]*2).x
        nearest_phases = PhaseVector(*response(nearest))

        raise UnreachablePhaseError(
            f'Target {tuple(target_arr)} is not reachable with {active} '
            f'below {p_max} W; nearest achievable phases are '
            f'{tuple(np.round(nearest_phases[:2], 6))}.',
            nearest=nearest_phases,
            nearest_powers=nearest)

    totals = [np.sum(powers) for powers in solutions]
    best = solutions[int(np.argmin(totals))]

    logger.debug('Inverse thermal map: %d feasible branches, '
                 'selected powers %s.', len(solutions), best)

    return best


def power_for_tritter_phase(bank, which, target, p_max=None):

    """
    Returns the minimal power on the tritter resistor ('A' or 'B') that sets
    the tritter phase to the target modulo 2pi.

    Raises:
        UnreachablePhaseError: If no branch is reachable below p_max.
    """

    if which not in TRITTER_RESISTORS:
        raise ValueError(f'Unknown tritter "{which}"; use "A" or "B".')

    if p_max is None:
        p_max = settings.options['P_MAX']

    idx = 0 if which == 'A' else 1
    phi0 = bank.static_phases[2 + idx]
    lin = bank.alpha_t_lin[idx]
    quad = bank.alpha_t_nl[idx]

    def response(power):
        return phi0 + lin*power + quad*power**2

    extremes = [response(p) for p in np.linspace(0., p_max, 101)]
    k_values = range(int(np.floor((min(extremes) - target)/(2*np.pi))),
                     int(np.ceil((max(extremes) - target)/(2*np.pi))) + 1)

    candidates = []
    for k in k_values:
        roots = np.roots([quad, lin, phi0 - target - 2*np.pi*k])
        for root in roots:
            if abs(root.imag) < 1e-12 and -1e-12 <= root.real <= p_max:
                candidates.append(max(root.real, 0.))

    if not candidates:
        powers = np.linspace(0., p_max, 1001)
        distance = np.abs(np.asarray(wrap_phase(response(powers) - target)))
        nearest = powers[np.argmin(distance)]
        raise UnreachablePhaseError(
            f'Tritter {which} phase {target} is not reachable below '
            f'{p_max} W.',
            nearest=response(nearest),
            nearest_powers=nearest)

    return float(min(candidates))


def transient_response(p_before, p_after, tau, t):

    """
    Returns the effective power t seconds after switching from p_before to
    p_after, for a single-exponential thermalization with time constant tau.

    Raises:
        ValueError: If tau <= 0 or t < 0.
    """

    if tau <= 0:
        raise ValueError(f'The time constant must be positive, got {tau}.')

    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError('Times must be nonnegative.')

    response = p_after + (p_before - p_after)*np.exp(-t/tau)

    return float(response) if response.ndim == 0 else response


def settling_time(tau=None, tolerance=1e-6):

    """
    Returns the waiting time after which the residual of a transient is
    below the given relative tolerance.
    """

    if tau is None:
        tau = settings.options['TRANSIENT_TAU']

    return -tau*np.log(tolerance)


class TransientFit(NamedTuple):

    offset: float
    amplitude: float
    tau: float
    tau_error: float


def fit_transient(times, signal, tau_guess=None):

    """
    Fits the decay model a + b exp(-(t - t0)/tau) to a time series, where
    t0 is the first time stamp.

    Returns:
        A TransientFit with the fitted values and the 1-sigma error of tau.
    """

    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)

    if tau_guess is None:
        tau_guess = settings.options['TRANSIENT_TAU']

    t0 = times[0]

    def model(t, offset, amplitude, tau):
        return offset + amplitude*np.exp(-(t - t0)/tau)

    p0 = [signal[-1], signal[0] - signal[-1], tau_guess]

    popt, pcov = scipy.optimize.curve_fit(model, times, signal, p0=p0)

    return TransientFit(offset=popt[0],
                        amplitude=popt[1],
                        tau=popt[2],
                        tau_error=float(np.sqrt(pcov[2, 2])))
