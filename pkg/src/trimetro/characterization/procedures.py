"""
This module implements the operating procedures of the chip: setting the
two multiports as balanced tritters, configuring the interferometer as the
identity, and checking a fitted model against phase-scan surfaces.
"""

import logging
import warnings
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import optax
import scipy.optimize

from trimetro.characterization.scantools import surface_probabilities
from trimetro.misctools import progbar_range
from trimetro.settings import settings
from trimetro.thermaltools import (RESISTOR_NAMES, UnreachablePhaseError,
                                   phases_from_powers, power_for_tritter_phase,
                                   powers_for_target_phases,
                                   voltages_from_powers)
from trimetro.unitarytools import (IDEAL_TRITTER, PhaseVector,
                                   compose_interferometer, fidelity,
                                   interferometer, tritter, wrap_phase)

logger = logging.getLogger(__name__)

SETTING_STEPS = ('internal', 'tritter_b', 'tritter_a')


class TritterSetting(NamedTuple):

    """
    The outcome of the tritter setting procedure.

    Attributes:
        powers (dict): Power per resistor (W).
        voltages (dict): Voltage per resistor (V).
        phases (ThermalPhases): The phases reached.
        residuals (dict): The minimized probability of each step.
        branches (dict): The sign branch of each step: the sign of
        phi_2 - phi_ref (+-pi/3) and of the tritter phases (+-pi/2).
        fidelities (tuple): The fidelities |Tr(U V^dagger)|/3 of the set
        tritters A and B with the ideal tritter of the same branch.
    """

    powers: dict
    voltages: dict
    phases: tuple
    residuals: dict
    branches: dict
    fidelities: tuple


class IdentitySetting(NamedTuple):

    """
    The outcome of the identity configuration.

    Attributes:
        offsets (PhaseVector): The phase differences set with R3 and R4.
        phi_ta (float): The phase of tritter A.
        phi_tb (float): The phase of tritter B.
        powers (dict): Power per resistor (W). Controls that cannot be
        reached below P_MAX are missing.
        unitary (array): The implemented matrix.
        similarity (float): The mean diagonal single-photon probability.
        converged (bool): Whether the optimizer met its tolerance.
    """

    offsets: PhaseVector
    phi_ta: float
    phi_tb: float
    powers: dict
    unitary: np.ndarray
    similarity: float
    converged: bool

    @property
    def reachable(self):
        return len(self.powers) == len(RESISTOR_NAMES)


class SurfaceCheck(NamedTuple):

    r2: dict
    mean_r2: float


def thermal_unitary(device, powers):

    """
    Returns the matrix of the device when the six resistors dissipate the
    given powers, the tritter phases following their thermal response.
    """

    thermal = phases_from_powers(device.bank, jnp.asarray(powers))

    return interferometer(device.tritter_a._replace(phi_t=thermal.phi_ta),
                          device.tritter_b._replace(phi_t=thermal.phi_tb),
                          thermal.phases)


def transition_probability(device, powers, input_mode, output_mode):

    """
    Returns P(input -> output) for a single photon at the given powers.
    """

    u = thermal_unitary(device, powers)

    return jnp.abs(u[output_mode - 1, input_mode - 1])**2


def _check_residual(step, residual):

    tol = settings.options['SETTING_RESIDUAL_TOL']

    if residual > tol:
        warnings.warn(f'Tritter setting step "{step}" left a residual '
                      f'probability {residual:.3e} above {tol:.0e}.',
                      RuntimeWarning, stacklevel=3)


def _minimize_internal(device, p_max, num_points):

    """
    Minimizes P(3 -> 3) over R1 and R2 once per sign branch of
    phi_2 - phi_ref. Returns a list of (powers, residual) pairs, one per
    branch present on the coarse grid.
    """

    def internal_powers(p):
        return jnp.zeros(len(RESISTOR_NAMES)).at[:2].set(p)

    prob = jax.jit(lambda p: transition_probability(
        device, internal_powers(p), 3, 3))

    axis = np.linspace(0., p_max, num_points)
    grid1, grid2 = np.meshgrid(axis, axis, indexing='ij')
    points = jnp.column_stack([grid1.ravel(), grid2.ravel()])

    values = np.asarray(jax.vmap(prob)(points))
    dphi2 = np.asarray(jax.vmap(
        lambda p: phases_from_powers(device.bank,
                                     internal_powers(p)).phases.dphi2)(points))
    signs = np.where(np.asarray(wrap_phase(dphi2)) >= 0, 1, -1)

    value_and_grad = jax.jit(jax.value_and_grad(prob))

    def objective(p):
        value, grad = value_and_grad(jnp.asarray(p))
        return float(value), np.asarray(grad)

    candidates = []
    for sign in (1, -1):
        on_branch = np.flatnonzero(signs == sign)
        if on_branch.size == 0:
            continue
        start = np.asarray(points[on_branch[np.argmin(values[on_branch])]])
        result = scipy.optimize.minimize(objective, start, jac=True,
                                         method='L-BFGS-B',
                                         bounds=[(0., p_max)]*2,
                                         options={'ftol': 1e-15,
                                                  'gtol': 1e-12})
        candidates.append((np.asarray(result.x), float(result.fun)))

    return candidates


def _minimize_single(prob, p_max, num_points):

    """
    Coarse grid followed by a bounded scalar search around the best grid
    point.
    """

    axis = np.linspace(0., p_max, num_points)
    values = np.array([prob(p) for p in axis])
    idx = int(np.argmin(values))

    low = axis[max(idx - 1, 0)]
    high = axis[min(idx + 1, num_points - 1)]

    result = scipy.optimize.minimize_scalar(prob, bounds=(low, high),
                                            method='bounded',
                                            options={'xatol': 1e-12})

    if result.fun > values[idx]:
        return float(axis[idx]), float(values[idx])

    return float(result.x), float(result.fun)


def _set_tritters(device, internal, internal_residual, p_max, grid_points):

    """
    Runs the tritter steps after the internal phases are set.
    """

    powers = np.zeros(len(RESISTOR_NAMES))
    powers[:2] = internal
    residuals = {'internal': internal_residual}

    logger.info('Tritter setting, step 2: tritter B.')
    prob_b = jax.jit(lambda p: transition_probability(
        device, jnp.asarray(powers).at[5].set(p), 3, 1))
    powers[5], residuals['tritter_b'] = _minimize_single(
        lambda p: float(prob_b(p)), p_max, grid_points)

    logger.info('Tritter setting, step 3: tritter A.')
    prob_a = jax.jit(lambda p: transition_probability(
        device, jnp.asarray(powers).at[4].set(p), 1, 1))
    powers[4], residuals['tritter_a'] = _minimize_single(
        lambda p: float(prob_a(p)), p_max, grid_points)

    return powers, residuals


def _branch(phase):
    return 1 if float(wrap_phase(phase)) >= 0 else -1


def tritter_setting(device, p_max=None, grid_points=None):

    """
    Sets both multiports as balanced tritters in three steps.

    1. P(3 -> 3) is minimized over the powers on R1 and R2, which sets
       phi_1 - phi_2 = phi_2 - phi_ref = +-pi/3. This probability does not
       depend on the tritter phases.
    2. P(3 -> 1) is minimized over the power on RTB, which sets
       phi_TB = +-pi/2 independently of phi_TA.
    3. P(1 -> 1) is minimized over the power on RTA, which sets
       phi_TA = +-pi/2.

    Steps 2 and 3 run after each branch of step 1 and the run with the
    smallest worst residual is kept. The branch of each step is reported.
    A residual above settings.options['SETTING_RESIDUAL_TOL']
    issues a RuntimeWarning.

    Args:
        device (DeviceParams): The device with its thermal model.
        p_max (float): The maximum power per resistor (W).
        grid_points (int): Points of the coarse grids.

    Returns:
        A TritterSetting.
    """

    if p_max is None:
        p_max = settings.options['P_MAX']

    if grid_points is None:
        grid_points = settings.options['SETTING_GRID_POINTS']

    logger.info('Tritter setting, step 1: internal phases.')
    runs = [_set_tritters(device, internal, residual, p_max, grid_points)
            for internal, residual in _minimize_internal(device, p_max,
                                                         grid_points)]
    powers, residuals = min(runs,
                            key=lambda run: max(run[1].values()))

    for step in SETTING_STEPS:
        _check_residual(step, residuals[step])

    thermal = phases_from_powers(device.bank, powers)
    phases = PhaseVector(float(thermal.phases.dphi1),
                         float(thermal.phases.dphi2))
    phi_ta, phi_tb = float(thermal.phi_ta), float(thermal.phi_tb)

    branches = {'internal': _branch(phases.dphi2),
                'tritter_b': _branch(phi_tb),
                'tritter_a': _branch(phi_ta)}

    # Targets are the ideal tritters of the same branch.
    fidelities = tuple(
        fidelity(tritter(params._replace(phi_t=phi)),
                 tritter(IDEAL_TRITTER._replace(phi_t=_branch(phi)*np.pi/2)))
        for params, phi in ((device.tritter_a, phi_ta),
                            (device.tritter_b, phi_tb)))

    voltages = voltages_from_powers(device.bank, powers).voltages

    logger.info('Tritter setting done: residuals %s, branches %s.',
                residuals, branches)

    return TritterSetting(powers=dict(zip(RESISTOR_NAMES, powers)),
                          voltages=dict(zip(RESISTOR_NAMES, voltages)),
                          phases=(phases, phi_ta, phi_tb),
                          residuals=residuals,
                          branches=branches,
                          fidelities=fidelities)


def similarity(u):

    """
    Returns S = (1/3) sum_i |U_ii|^2.
    """

    u = jnp.asarray(u)

    return jnp.mean(jnp.abs(jnp.diag(u))**2)


def _identity_unitary(device, controls):

    u_a = tritter(device.tritter_a._replace(phi_t=controls[2]))
    u_b = tritter(device.tritter_b._replace(phi_t=controls[3]))

    return compose_interferometer(u_a, u_b,
                                  PhaseVector(controls[0], controls[1]))


def _default_starts(device):

    starts = [[theta1, theta2, phi_a, -phi_a]
              for theta1 in (0., np.pi)
              for theta2 in (0., np.pi)
              for phi_a in (np.pi/2, -np.pi/2)]
    starts.append([0., 0., device.tritter_a.phi_t, device.tritter_b.phi_t])

    return np.array(starts)


def _run_lbfgs(loss, x0, max_iter, tol):

    solver = optax.lbfgs()
    value_and_grad = optax.value_and_grad_from_state(loss)

    @jax.jit
    def step(params, opt_state):

        value, grad = value_and_grad(params, state=opt_state)

        updates, opt_state = solver.update(grad, opt_state, params,
                                           value=value, grad=grad,
                                           value_fn=loss)

        params = optax.apply_updates(params, updates)

        return params, opt_state, value, grad

    params = jnp.asarray(x0)
    opt_state = solver.init(params)

    converged = False
    for _ in range(max_iter):
        params, opt_state, value, grad = step(params, opt_state)
        if value < tol or float(jnp.linalg.norm(grad)) < tol:
            converged = True
            break

    return np.asarray(params), float(loss(params)), converged


def identity_configuration(device, starts=None, max_iter=None, tol=None):

    """
    Configures the interferometer so that U^B U^A approaches the identity
    up to output phases, maximizing the similarity S at zero phase
    differences. The controls are the two phase differences set with R3 and
    R4 and the two tritter phases.

    The optimizer runs L-BFGS from several starts and keeps the best. If
    none of the runs reaches a stationary point within max_iter, a
    RuntimeWarning reports the best similarity found.

    Args:
        device (DeviceParams): The device.
        starts (array): K x 4 starting controls
        (offset_1, offset_2, phi_TA, phi_TB).
        max_iter (int): Iterations per start.
        tol (float): Tolerance on 1 - S and on the gradient norm.

    Returns:
        An IdentitySetting.
    """

    if max_iter is None:
        max_iter = settings.options['IDENTITY_MAX_ITER']

    if tol is None:
        tol = settings.options['IDENTITY_TOL']

    if starts is None:
        starts = _default_starts(device)

    def loss(controls):
        return 1 - similarity(_identity_unitary(device, controls))

    best_controls, best_loss, any_converged = None, np.inf, False

    for start_idx in progbar_range(len(starts), title='Identity starts'):
        controls, value, converged = _run_lbfgs(loss, starts[start_idx],
                                                max_iter, tol)
        any_converged = any_converged or converged
        if value < best_loss:
            best_controls, best_loss = controls, value

    best_controls = np.asarray(wrap_phase(best_controls))
    best_s = 1 - best_loss

    if not any_converged:
        warnings.warn(f'The identity optimizer stagnated; best similarity '
                      f'S = {best_s:.6f}.', RuntimeWarning, stacklevel=2)

    offsets = PhaseVector(float(best_controls[0]), float(best_controls[1]))
    phi_ta, phi_tb = float(best_controls[2]), float(best_controls[3])

    powers = _identity_powers(device, offsets, phi_ta, phi_tb)

    logger.info('Identity configuration: S = %.9f.', best_s)

    return IdentitySetting(offsets=offsets,
                           phi_ta=phi_ta,
                           phi_tb=phi_tb,
                           powers=powers,
                           unitary=np.asarray(_identity_unitary(
                               device, jnp.asarray(best_controls))),
                           similarity=float(best_s),
                           converged=any_converged)


def _identity_powers(device, offsets, phi_ta, phi_tb):

    bank = device.bank
    powers = {'R1': 0., 'R2': 0.}

    try:
        internal = powers_for_target_phases(bank, offsets,
                                            active=('R3', 'R4'))
        powers['R3'], powers['R4'] = (float(p) for p in internal)
    except UnreachablePhaseError as error:
        logger.warning('Identity offsets not reachable: %s', error)

    for which, phase in (('A', phi_ta), ('B', phi_tb)):
        try:
            powers[f'RT{which}'] = power_for_tritter_phase(bank, which, phase)
        except UnreachablePhaseError as error:
            logger.warning('Identity tritter phase not reachable: %s', error)

    return {name: powers[name] for name in RESISTOR_NAMES if name in powers}


def r_squared(data, model):

    """
    Returns the coefficient of determination of model against data, or nan
    for constant data.
    """

    data = np.asarray(data, dtype=float)
    model = np.asarray(model, dtype=float)

    ss_tot = np.sum((data - np.mean(data))**2)
    if ss_tot == 0:
        return np.nan

    return float(1 - np.sum((data - model)**2)/ss_tot)


def verify_surfaces(fitted, dataset, model=None):

    """
    Compares the probability surfaces predicted by a fitted device with a
    SurfaceDataset, event by event.

    Args:
        fitted (DeviceParams): The fitted device.
        dataset (SurfaceDataset): The measured or simulated surfaces.
        model (DistinguishabilityModel): The distinguishability model of
        the prediction.

    Returns:
        A SurfaceCheck with R^2 per event label and their mean over the
        events with non-constant data.
    """

    predicted = surface_probabilities(fitted, dataset.input_state, model,
                                      dataset.points)

    r2 = {event.label: r_squared(dataset.probs[:, idx], predicted[:, idx])
          for idx, event in enumerate(dataset.events)}

    return SurfaceCheck(r2=r2, mean_r2=float(np.nanmean(list(r2.values()))))
