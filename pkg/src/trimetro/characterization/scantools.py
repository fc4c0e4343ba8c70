"""
This module generates and stores the data of the characterization
experiments: single-photon probabilities as a function of the power
dissipated on one resistor, and probability surfaces over the phase
differences.
"""

import logging
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import scipy.optimize

from trimetro.fishertools import make_prob_fun
from trimetro.misctools import load_table, progbar_range, save_table
from trimetro.photontools import FockState, output_events
from trimetro.settings import settings
from trimetro.thermaltools import RESISTOR_NAMES, phases_from_powers
from trimetro.unitarytools import PhaseGrid, interferometer

logger = logging.getLogger(__name__)

PROTOCOL_RESISTORS = {'internal': ('R1', 'R2', 'R3', 'R4'),
                      'tritter': ('RTA', 'RTB')}

SCAN_COLUMNS = ('input', 'output', 'resistor', 'power_W', 'probability',
                'std_err')


class ScanCurve(NamedTuple):

    """
    The probability P(input -> output) as a function of the power on one
    resistor.
    """

    input_mode: int
    output_mode: int
    resistor: str
    powers: np.ndarray
    probs: np.ndarray
    std_errs: np.ndarray


class ScanDataset(NamedTuple):

    curves: tuple
    protocol: str
    device_name: str = 'custom'
    counts: int = None

    @property
    def n_points(self):
        return int(sum(len(curve.powers) for curve in self.curves))

    def flat(self):

        """
        Returns the arrays (resistor index, power, input index, output
        index, probability, std_err) over all points of all curves. Indices
        are 0-based; the resistor index refers to RESISTOR_NAMES.
        """

        columns = {key: [] for key in ('resistor', 'power', 'input',
                                       'output', 'prob', 'std_err')}

        for curve in self.curves:
            num = len(curve.powers)
            columns['resistor'].append(
                np.full(num, RESISTOR_NAMES.index(curve.resistor)))
            columns['power'].append(curve.powers)
            columns['input'].append(np.full(num, curve.input_mode - 1))
            columns['output'].append(np.full(num, curve.output_mode - 1))
            columns['prob'].append(curve.probs)
            columns['std_err'].append(curve.std_errs)

        return {key: np.concatenate(value) for key, value in columns.items()}

    def curves_of(self, resistor):
        return [curve for curve in self.curves if curve.resistor == resistor]


class SurfaceDataset(NamedTuple):

    """
    Output probabilities over a grid of phase differences for one input.

    Attributes:
        input_state (FockState): The input.
        events (tuple): The output events.
        points (array): N x 2 phases.
        probs (array): N x n_events estimated probabilities.
        counts (int): Events per point, None for noiseless data.
        shape (tuple): The grid shape.
    """

    input_state: FockState
    events: tuple
    points: np.ndarray
    probs: np.ndarray
    counts: int
    shape: tuple


def scan_power_grid(num_points=None, max_power=None):

    if num_points is None:
        num_points = settings.options['SCAN_POINTS']

    if max_power is None:
        max_power = settings.options['SCAN_MAX_POWER']

    return np.linspace(0., max_power, num_points)


def make_point_model(protocol):

    """
    Returns the function (device, resistor indices, powers) -> N x 3 x 3
    single-photon transition probabilities |U_ji|^2, indexed as
    [point, input, output]. Only the indexed resistor dissipates power.

    For the internal protocol the tritter phases stay at the operating
    values of the device. For the tritter protocol they follow the thermal
    response of the tritter resistors, and the internal phases stay at their
    static values.

    The function is written in jax.numpy, hence differentiable with respect
    to the device parameters.
    """

    if protocol not in PROTOCOL_RESISTORS:
        raise ValueError(f'Unknown protocol "{protocol}"; use '
                         f'{" or ".join(PROTOCOL_RESISTORS)}.')

    thermal_tritters = protocol == 'tritter'

    def single_point(device, resistor_idx, power):

        powers = jnp.zeros(len(RESISTOR_NAMES)).at[resistor_idx].set(power)
        thermal = phases_from_powers(device.bank, powers)

        tritter_a, tritter_b = device.tritter_a, device.tritter_b
        if thermal_tritters:
            tritter_a = tritter_a._replace(phi_t=thermal.phi_ta)
            tritter_b = tritter_b._replace(phi_t=thermal.phi_tb)

        u = interferometer(tritter_a, tritter_b, thermal.phases)

        return jnp.abs(u.T)**2

    def point_model(device, resistor_idx, powers):
        return jax.vmap(single_point, in_axes=(None, 0, 0))(
            device, jnp.asarray(resistor_idx), jnp.asarray(powers))

    return point_model


def _binomial_errors(probs, counts):
    return np.maximum(np.sqrt(probs*(1 - probs)/counts), 1/counts)


def generate_scan(device, protocol='internal', counts=None, seed=None,
                  noiseless=False, powers=None, device_name='custom'):

    """
    Simulates the characterization scan of a protocol: for every resistor of
    the protocol and every input mode, the power is swept with all other
    resistors off and the three output probabilities are recorded.

    Args:
        device (DeviceParams): The true device.
        protocol (str): 'internal' (36 curves) or 'tritter' (18 curves).
        counts (int): Detected photons per input and power.
        seed (int): The seed of the counting noise.
        noiseless (bool): If True, the model probabilities are returned.
        powers (array): The power grid (W).
        device_name (str): Stored in the dataset metadata.

    Returns:
        A ScanDataset. The standard errors are binomial with a floor of
        1/counts.

    Raises:
        ValueError: If counts < 1 or the protocol is unknown.
    """

    if counts is None:
        counts = settings.options['SCAN_COUNTS']

    if counts < 1:
        raise ValueError(f'The counts per point must be at least 1, '
                         f'got {counts}.')

    if powers is None:
        powers = scan_power_grid()

    powers = np.asarray(powers, dtype=float)
    if np.any(powers < 0) or np.any(np.diff(powers) <= 0):
        raise ValueError('Scan powers must be nonnegative and increasing.')

    point_model = make_point_model(protocol)
    rng = np.random.default_rng(seed)

    curves = []
    for name in PROTOCOL_RESISTORS[protocol]:

        resistor_idx = np.full(len(powers), RESISTOR_NAMES.index(name))
        model_probs = np.asarray(point_model(device, resistor_idx, powers))

        for input_idx in range(3):

            probs = np.clip(model_probs[:, input_idx, :], 0., 1.)
            if not noiseless:
                draws = [rng.multinomial(int(counts), row/np.sum(row))
                         for row in probs]
                probs = np.array(draws)/counts

            std_errs = _binomial_errors(probs, counts)

            for output_idx in range(3):
                curves.append(ScanCurve(input_mode=input_idx + 1,
                                        output_mode=output_idx + 1,
                                        resistor=name,
                                        powers=powers,
                                        probs=probs[:, output_idx],
                                        std_errs=std_errs[:, output_idx]))

    logger.info('Generated %d %s scan curves (%s).', len(curves), protocol,
                'noiseless' if noiseless else f'{counts} counts per point')

    return ScanDataset(tuple(curves), protocol, device_name,
                       None if noiseless else int(counts))


def save_scan_csv(dataset, filename):

    """
    Writes a ScanDataset with the columns
    input, output, resistor, power_W, probability, std_err.
    """

    rows = {column: [] for column in SCAN_COLUMNS}

    for curve in dataset.curves:
        num = len(curve.powers)
        rows['input'].extend([curve.input_mode]*num)
        rows['output'].extend([curve.output_mode]*num)
        rows['resistor'].extend([curve.resistor]*num)
        rows['power_W'].extend(curve.powers)
        rows['probability'].extend(curve.probs)
        rows['std_err'].extend(curve.std_errs)

    return save_table(rows, filename)


def load_scan_csv(filename, device_name='custom'):

    """
    Loads a ScanDataset written by save_scan_csv(). The protocol is
    inferred from the resistor names.
    """

    df = load_table(filename)

    missing = set(SCAN_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f'The scan file misses the columns {sorted(missing)}.')

    resistors = set(df['resistor'])
    protocol = next((name for name, members in PROTOCOL_RESISTORS.items()
                     if resistors <= set(members)), None)
    if protocol is None:
        raise ValueError(f'Unknown resistors {sorted(resistors)} in the scan.')

    curves = []
    for (input_mode, output_mode, resistor), group in df.groupby(
            ['input', 'output', 'resistor'], sort=False):
        group = group.sort_values('power_W')
        curves.append(ScanCurve(int(input_mode), int(output_mode), resistor,
                                group['power_W'].to_numpy(),
                                group['probability'].to_numpy(),
                                group['std_err'].to_numpy()))

    return ScanDataset(tuple(curves), protocol, device_name)


def _grid_points(grid):

    if isinstance(grid, PhaseGrid):
        return grid.points(), grid.shape

    points = np.atleast_2d(np.asarray(grid, dtype=float))

    return points, (len(points),)


def surface_probabilities(device, input_state, model, grid):

    """
    Returns the N x n_events model probabilities over the grid points.
    """

    points, _ = _grid_points(grid)
    prob_fun = make_prob_fun(device, input_state, model)

    return np.asarray(jax.vmap(prob_fun)(jnp.asarray(points)))


def generate_surfaces(device, input_state, model=None, grid=None,
                      counts=None, seed=None):

    """
    Simulates probability surfaces over a grid of phase differences. Every
    grid point collects counts events drawn from the output distribution.
    With counts None the model probabilities are returned.

    Args:
        device (DeviceParams): The device.
        input_state (FockState or tuple): The input.
        model (DistinguishabilityModel): The distinguishability model.
        grid (PhaseGrid): The grid, 20 x 20 over [0, 2pi)^2 by default.
        counts (int): Events per point.
        seed (int): The seed of the counting noise.
    """

    if not isinstance(input_state, FockState):
        input_state = FockState.from_modes(input_state)

    if grid is None:
        grid = PhaseGrid(*[np.linspace(0., 2*np.pi, 20, endpoint=False)]*2)

    points, shape = _grid_points(grid)
    probs = np.clip(surface_probabilities(device, input_state, model, grid),
                    0., 1.)

    if counts is not None:

        if counts < 1:
            raise ValueError(f'The counts per point must be at least 1, '
                             f'got {counts}.')

        rng = np.random.default_rng(seed)
        draws = np.zeros_like(probs)
        for idx in progbar_range(len(points), title='Surface sampling'):
            row = probs[idx]
            draws[idx] = rng.multinomial(int(counts), row/np.sum(row))
        probs = draws/counts

    return SurfaceDataset(input_state=input_state,
                          events=output_events(input_state.total),
                          points=points,
                          probs=probs,
                          counts=None if counts is None else int(counts),
                          shape=shape)


def expected_r2(probs, counts):

    """
    Returns the expected mean coefficient of determination between the
    model surfaces probs (N x n_events) and data sampled from them with
    counts events per point.
    """

    noise = np.sum(probs*(1 - probs), axis=0)/counts
    signal = np.sum((probs - np.mean(probs, axis=0))**2, axis=0)

    valid = signal + noise > 0

    return float(np.mean(1 - noise[valid]/(signal[valid] + noise[valid])))


def counts_for_target_r2(device, input_state, model, grid, target_r2,
                         max_counts=1e9):

    """
    Finds the events per grid point for which the expected mean R^2 of the
    sampled surfaces equals target_r2.

    Raises:
        ValueError: If the target is outside the range reachable with
        1..max_counts events.
    """

    probs = surface_probabilities(device, input_state, model, grid)

    def mismatch(log_counts):
        return expected_r2(probs, np.exp(log_counts)) - target_r2

    low, high = 0., np.log(max_counts)

    if mismatch(low) > 0 or mismatch(high) < 0:
        raise ValueError(f'Target R^2 = {target_r2} is not reachable with '
                         f'1 to {max_counts:.0e} events per point.')

    log_counts = scipy.optimize.brentq(mismatch, low, high, xtol=1e-10)

    return int(np.round(np.exp(log_counts)))
