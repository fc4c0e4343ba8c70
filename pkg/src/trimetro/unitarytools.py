"""
This module builds the unitary matrices of the reconfigurable three-mode
interferometer and provides the fidelity and unitarity metrics.

Matrices are 3x3 complex jax arrays. In every product the right-most factor
acts first on the input light.
"""

import logging
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np

from trimetro.settings import settings

logger = logging.getLogger(__name__)

N_MODES = 3
COUPLER_PAIRS = {12: (0, 1), 23: (1, 2)}


class TritterParams(NamedTuple):

    """
    A tritter made of three directional couplers and an internal phase
    shifter on mode 1, placed between the second and the third coupler.

    Attributes:
        t1 (float): Transmission of the first coupler (modes 1-2).
        t2 (float): Transmission of the second coupler (modes 2-3).
        t3 (float): Transmission of the third coupler (modes 1-2).
        phi_t (float): The internal phase (rad).
    """

    t1: float
    t2: float
    t3: float
    phi_t: float


IDEAL_TRITTER = TritterParams(0.5, 2/3, 0.5, np.pi/2)


class PhaseVector(NamedTuple):

    """
    The phases of the three internal arms, expressed as the two differences
    with respect to the reference arm and the reference phase itself.
    """

    dphi1: float
    dphi2: float
    phi_ref: float = 0.

    def arm_phases(self):
        return (self.dphi1 + self.phi_ref,
                self.dphi2 + self.phi_ref,
                self.phi_ref)

    def wrapped(self):
        return PhaseVector(*(wrap_phase(phase) for phase in self))

    def as_array(self):
        return jnp.array([self.dphi1, self.dphi2])


class PhaseGrid(NamedTuple):

    """
    A rectangular grid over (dphi1, dphi2). Points are ordered with dphi1
    as the slow index.
    """

    axis1: np.ndarray
    axis2: np.ndarray

    @property
    def shape(self):
        return (len(self.axis1), len(self.axis2))

    def points(self):

        grid1, grid2 = np.meshgrid(self.axis1, self.axis2, indexing='ij')

        return np.column_stack([grid1.ravel(), grid2.ravel()])


def wrap_phase(phase):

    """
    Reduces a phase (or an array of phases) to (-pi, pi].
    """

    return np.pi - jnp.mod(np.pi - phase, 2*np.pi)


def make_phase_grid(shape, bounds=None):

    """
    Creates a uniform PhaseGrid. Each axis samples [low, high) without the
    endpoint, so that the default bounds cover the torus [0, 2pi)^2 once.

    Args:
        shape (int or tuple): The number of points per axis.
        bounds (tuple): ((low1, high1), (low2, high2)).

    Raises:
        ValueError: If an axis has fewer than one point.
    """

    if np.isscalar(shape):
        shape = (shape, shape)

    if bounds is None:
        bounds = ((0., 2*np.pi), (0., 2*np.pi))

    if min(shape) < 1:
        raise ValueError(f'A phase grid needs at least one point per axis,'
                         f' got {shape}.')

    axes = [np.linspace(low, high, num, endpoint=False)
            for num, (low, high) in zip(shape, bounds)]

    return PhaseGrid(*axes)


def parse_grid_spec(spec, bounds=None):

    """
    Creates a PhaseGrid from a string of the form 'NxM'.
    """

    try:
        shape = tuple(int(num) for num in spec.lower().split('x'))
    except ValueError:
        raise ValueError(f'Grid spec "{spec}" is not of the form NxM.')

    if len(shape) != 2:
        raise ValueError(f'Grid spec "{spec}" is not of the form NxM.')

    return make_phase_grid(shape, bounds)


def _check_transmission(t):

    # Traced values cannot be checked and pass through.
    try:
        values = np.asarray(t, dtype=float)
    except TypeError:
        return

    if np.any((values < 0) | (values > 1)):
        raise ValueError(f'Transmission coefficient {t} outside [0, 1].')


def coupler_matrix(t, pair=12):

    """
    Returns the unitary of a lossless directional coupler acting on a pair
    of modes, with sqrt(1-t) on the diagonal and i*sqrt(t) off the diagonal
    of the pair. The remaining mode is untouched.

    Args:
        t (float): The transmission coefficient in [0, 1].
        pair (int): The mode pair, 12 or 23.

    Raises:
        ValueError: For t outside [0, 1] or an unknown pair.
    """

    if pair not in COUPLER_PAIRS:
        raise ValueError(f'Unknown mode pair {pair}; use 12 or 23.')

    _check_transmission(t)

    i, j = COUPLER_PAIRS[pair]

    diag = jnp.sqrt(1 - t)
    off_diag = 1j*jnp.sqrt(t)

    u = jnp.eye(N_MODES, dtype=complex)
    u = u.at[i, i].set(diag).at[j, j].set(diag)
    u = u.at[i, j].set(off_diag).at[j, i].set(off_diag)

    return u


def phase_shifter_matrix(mode, phase):

    """
    Returns the diagonal unitary applying exp(i*phase) on mode (1, 2 or 3).
    """

    if mode not in range(1, N_MODES + 1):
        raise ValueError(f'Mode index {mode} outside 1..{N_MODES}.')

    diag = jnp.ones(N_MODES, dtype=complex).at[mode-1].set(
        jnp.exp(1j*phase))

    return jnp.diag(diag)


def phase_layer(phases):

    """
    Returns PS_3 PS_2 PS_1 for the arm phases of a PhaseVector.
    """

    return jnp.diag(jnp.exp(1j*jnp.array(phases.arm_phases())))


def tritter(params):

    """
    Returns U_T3 PS(phi_t) U_T2 U_T1 for the given TritterParams.
    """

    for t in params[:3]:
        _check_transmission(t)

    return (coupler_matrix(params.t3, 12)
            @ phase_shifter_matrix(1, params.phi_t)
            @ coupler_matrix(params.t2, 23)
            @ coupler_matrix(params.t1, 12))


def compose_interferometer(u_a, u_b, phases):

    """
    Returns U_B PS_3 PS_2 PS_1 U_A for given tritter matrices.
    """

    return u_b @ phase_layer(phases) @ u_a


def interferometer(tritter_a, tritter_b, phases):

    """
    Returns the overall unitary of the interferometer: the preparation
    tritter A, the phase layer of the internal arms and the measurement
    tritter B.

    Args:
        tritter_a (TritterParams): The input tritter.
        tritter_b (TritterParams): The output tritter.
        phases (PhaseVector): The internal phases.
    """

    return compose_interferometer(tritter(tritter_a),
                                  tritter(tritter_b),
                                  phases)


def symmetric_tritter():

    """
    Returns the symmetric tritter with diagonal 3^(-1/2) and off-diagonal
    3^(-1/2) exp(i 2pi/3).
    """

    u = np.full((N_MODES, N_MODES), np.exp(2j*np.pi/3))
    np.fill_diagonal(u, 1.)

    return jnp.asarray(u/np.sqrt(N_MODES))


def unitarity_defect(u):

    """
    Returns max|(U U^dagger - I)_ij|.
    """

    u = np.asarray(u)

    return float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))


def is_unitary(u, tol=None):

    if tol is None:
        tol = settings.options['UNITARITY_TOL']

    return unitarity_defect(u) <= tol


def _check_same_square(u, v):

    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f'Expected a square matrix, got shape {u.shape}.')

    if u.shape != v.shape:
        raise ValueError(f'Dimension mismatch: {u.shape} and {v.shape}.')


def align_global_phase(u, v):

    """
    Multiplies u with the global phase that makes its largest-modulus entry
    share the phase of the same entry of v. Used for entrywise comparisons
    with phase-gauged matrices.
    """

    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)

    idx = np.unravel_index(np.argmax(np.abs(u)), u.shape)

    return u*np.exp(1j*(np.angle(v[idx]) - np.angle(u[idx])))


def align_diagonal_gauge(u, v, num_iters=100):

    """
    Returns D1 u D2 where the diagonal phase matrices D1, D2 maximize
    |Tr(D1 u D2 v^dagger)|. The input and output phases of a multiport are
    not observable with single-photon intensities, hence they are removed
    before comparing to a target.

    The maximization alternates between the two diagonals, starting from
    the identity and from the phases of the leading singular vector.
    """

    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)

    overlap = u*v.conj()

    _, _, vh = np.linalg.svd(overlap)
    starts = [np.ones(u.shape[1], dtype=complex),
              np.exp(-1j*np.angle(vh[0]))]

    best_value = -1.
    best = None

    for right in starts:
        for _ in range(num_iters):
            left = np.exp(-1j*np.angle(overlap @ right))
            right = np.exp(-1j*np.angle(left @ overlap))

        value = np.abs(left @ overlap @ right)
        if value > best_value:
            best_value = value
            best = (left, right)

    left, right = best

    return left[:, None]*u*right[None, :]


def fidelity(u, v, gauge=None):

    """
    Calculates |Tr(u v^dagger)|/m for two m x m matrices.

    Args:
        u (array): The implemented matrix.
        v (array): The target matrix.
        gauge (str): None compares the matrices as given. 'diagonal'
        first removes the input and output phases of u that best match v.

    Raises:
        ValueError: For non-square or mismatched matrices and unknown gauges.
    """

    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)

    _check_same_square(u, v)

    if gauge == 'diagonal':
        u = align_diagonal_gauge(u, v)
    elif gauge is not None:
        raise ValueError(f'Unknown gauge "{gauge}".')

    return float(np.abs(np.trace(u @ v.conj().T))/u.shape[0])


def average_fidelity(device, grid, gauge=None, reference=None):

    """
    Averages over a phase grid the fidelity between the interferometer
    built from the device tritters and the one built from the reference
    tritters (ideal by default) at the same phases.

    Args:
        device: An object with tritter_a and tritter_b attributes
        (see devicetools.DeviceParams).
        grid (PhaseGrid or array): The phase grid or an N x 2 array.
        gauge (str): Passed to fidelity().
        reference: The reference device. Ideal tritters if None.

    Returns:
        The mean fidelity over the grid points.
    """

    points = grid.points() if isinstance(grid, PhaseGrid) else \
        np.atleast_2d(np.asarray(grid, dtype=float))

    if points.size == 0:
        raise ValueError('The phase grid is empty.')

    if reference is None:
        ref_a, ref_b = IDEAL_TRITTER, IDEAL_TRITTER
    else:
        ref_a, ref_b = reference.tritter_a, reference.tritter_b

    u_a, u_b = tritter(device.tritter_a), tritter(device.tritter_b)
    v_a, v_b = tritter(ref_a), tritter(ref_b)

    @jax.jit
    @jax.vmap
    def build(point):
        phases = PhaseVector(point[0], point[1])
        return (compose_interferometer(u_a, u_b, phases),
                compose_interferometer(v_a, v_b, phases))

    u_devices, u_refs = build(jnp.asarray(points))

    fidelities = [fidelity(u_dev, u_ref, gauge)
                  for u_dev, u_ref in zip(np.asarray(u_devices),
                                          np.asarray(u_refs))]

    logger.debug('Average fidelity over %d points.', len(fidelities))

    return float(np.mean(fidelities))
