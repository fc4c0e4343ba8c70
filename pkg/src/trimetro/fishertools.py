"""
This module computes the classical and quantum Fisher information matrices
of the two phase differences, the classical benchmarks built from
distinguishable single photons, and the Cramer-Rao bound maps.
"""

import logging
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import qutip
import scipy.optimize

from trimetro.misctools import progbar_range
from trimetro.photontools import (DistinguishabilityModel, FockState,
                                  event_probabilities, output_events,
                                  permanent)
from trimetro.settings import settings
from trimetro.unitarytools import (N_MODES, PhaseGrid, PhaseVector,
                                   compose_interferometer, tritter)

logger = logging.getLogger(__name__)

BENCHMARK_KINDS = ('simultaneous', 'separate')


class SingularFisherError(RuntimeError):
    pass


class UnsupportedModelError(ValueError):
    pass


class FisherMatrix(NamedTuple):

    """
    A symmetric positive semidefinite information matrix.

    Attributes:
        entries (array): The n x n matrix (rad^-2).
        kind (str): 'classical' or 'quantum'.
    """

    entries: np.ndarray
    kind: str = 'classical'

    @property
    def condition_number(self):
        return float(np.linalg.cond(self.entries))

    @property
    def is_singular(self):

        cond = self.condition_number

        return (not np.isfinite(cond)) or \
            cond > settings.options['SINGULAR_CONDITION']

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.entries)

    def inverse(self):

        if self.is_singular:
            raise SingularFisherError(
                f'The {self.kind} Fisher matrix is singular (condition '
                f'number {self.condition_number:.3e}).')

        return np.linalg.inv(self.entries)

    def inverse_trace(self):
        return float(np.trace(self.inverse()))

    def crb(self):

        """
        Returns Tr(F^-1), or nan for a singular matrix.
        """

        if self.is_singular:
            return np.nan

        return self.inverse_trace()

    def __add__(self, other):
        return FisherMatrix(self.entries + other.entries, self.kind)

    def scaled(self, factor):
        return FisherMatrix(factor*self.entries, self.kind)


def _resolve_model(model):

    if model is None:
        return DistinguishabilityModel()

    if not isinstance(model, DistinguishabilityModel):
        return DistinguishabilityModel(float(model))

    return model


def _as_fock(input_state):

    if isinstance(input_state, FockState):
        return input_state

    return FockState.from_modes(input_state)


def make_prob_fun(device, input_state, model=None):

    """
    Creates the jitted map (dphi1, dphi2) -> event probabilities for a
    device, an input state and a distinguishability model. The events are
    ordered as photontools.output_events().
    """

    input_state = _as_fock(input_state)
    visibility = _resolve_model(model).effective_visibility()

    u_a = tritter(device.tritter_a)
    u_b = tritter(device.tritter_b)

    @jax.jit
    def prob_fun(dphi):
        u = compose_interferometer(u_a, u_b, PhaseVector(dphi[0], dphi[1]))
        return event_probabilities(u, input_state, visibility)

    return prob_fun


def _phase_array(phases):

    if isinstance(phases, PhaseVector):
        return jnp.array([phases.dphi1, phases.dphi2], dtype=float)

    return jnp.asarray(phases, dtype=float)


def prob_gradient(device, phases, input_state, model=None):

    """
    Returns the derivatives of the event probabilities with respect to
    (dphi1, dphi2), as an n_events x 2 array. Forward-mode differentiation
    through the phase layer and the permanents gives the exact derivative.
    """

    prob_fun = make_prob_fun(device, input_state, model)

    return np.asarray(jax.jacfwd(prob_fun)(_phase_array(phases)))


def _fisher_from_probs(probs, grads):

    min_prob = settings.options['MIN_EVENT_PROB']

    mask = probs > min_prob
    weights = jnp.where(mask, 1/jnp.where(mask, probs, 1.), 0.)

    return jnp.einsum('e,ej,ek->jk', weights, grads, grads)


def make_fisher_fun(device, input_state, model=None):

    """
    Creates the jitted and vectorized map from an N x 2 array of phases to
    the N x 2 x 2 classical Fisher matrices.
    """

    prob_fun = make_prob_fun(device, input_state, model)
    jac_fun = jax.jacfwd(prob_fun)

    @jax.jit
    @jax.vmap
    def fisher_fun(dphi):
        return _fisher_from_probs(prob_fun(dphi), jac_fun(dphi))

    return fisher_fun


def fisher_matrix(device, phases, input_state, model=None):

    """
    Calculates the classical Fisher information matrix
    I_jk = sum_e (d_j P_e)(d_k P_e)/P_e of the coincidence outcomes.
    Events with probability below settings.options['MIN_EVENT_PROB'] are
    excluded.
    """

    fisher_fun = make_fisher_fun(device, input_state, model)
    entries = fisher_fun(_phase_array(phases)[None, :])[0]

    return FisherMatrix(np.asarray(entries), 'classical')


def prepared_state(u_a, input_state):

    """
    Returns the qutip ket of the photons after the preparation unitary, in
    the truncated Fock space of three modes with n + 1 levels each.
    """

    input_state = _as_fock(input_state)
    n_photons = input_state.total
    dim = n_photons + 1

    cols = np.array(input_state.modes) - 1
    u_a = np.asarray(u_a)

    ket = qutip.tensor(*[qutip.zero_ket(dim)]*N_MODES)
    for event in output_events(n_photons):
        rows = np.array(event.modes) - 1
        amplitude = complex(permanent(u_a[rows[:, None], cols[None, :]]))
        amplitude /= np.sqrt(event.normalization()
                             * input_state.normalization())

        basis_ket = qutip.tensor(*[qutip.basis(dim, num)
                                   for num in event.occupations])
        ket = ket + amplitude*basis_ket

    return ket


def _arm_number_operators(dim, arms=(1, 2)):

    operators = []
    for arm in arms:
        factors = [qutip.qeye(dim)]*N_MODES
        factors[arm - 1] = qutip.num(dim)
        operators.append(qutip.tensor(*factors))

    return operators


def qfim_pure(device, phases, input_state, model=None, arms=(1, 2)):

    """
    Calculates the quantum Fisher information matrix of the pure state
    after the preparation tritter and the phase layer. The phase
    differences are generated by the photon numbers of the given arms,
    so that H_jk = 4 Re[<n_j n_k> - <n_j><n_k>], independent of the phases.

    Args:
        arms (tuple): The two modes carrying dphi1 and dphi2. The third
        mode is the reference arm; interferometer() uses (1, 2).

    Raises:
        UnsupportedModelError: If the model has visibility below one.
        ValueError: For arms that are not two distinct modes.
    """

    if _resolve_model(model).effective_visibility() < 1:
        raise UnsupportedModelError(
            'The pure-state quantum Fisher information requires fully '
            'indistinguishable photons (visibility 1).')

    arms = tuple(int(arm) for arm in arms)
    if len(arms) != 2 or len(set(arms)) != 2 or \
            not set(arms) <= set(range(1, N_MODES + 1)):
        raise ValueError(f'Expected two distinct modes in 1..{N_MODES}, '
                         f'got {arms}.')

    input_state = _as_fock(input_state)
    state = prepared_state(tritter(device.tritter_a), input_state)

    numbers = _arm_number_operators(input_state.total + 1, arms)
    means = [qutip.expect(op, state) for op in numbers]

    entries = np.zeros((2, 2))
    for j in range(2):
        for k in range(2):
            second = qutip.expect(numbers[j]*numbers[k], state)
            entries[j, k] = 4*np.real(second - means[j]*means[k])

    return FisherMatrix(entries, 'quantum')


def single_photon_qfim(weights):

    """
    Returns the 2 x 2 quantum Fisher information of one photon spread over
    (arm 1, arm 2, reference) with the given probabilities:
    4 (diag(p) - p p^T) restricted to the two arms.
    """

    weights = np.asarray(weights, dtype=float)
    weights = weights/np.sum(weights)
    arms = weights[:2]

    return 4*(np.diag(arms) - np.outer(arms, arms))


def _trace_or_inf(entries):

    trace = FisherMatrix(entries).crb()

    return np.inf if np.isnan(trace) else trace


def _optimal_probe_weights():

    def trace_of_inverse(logits):
        weights = np.exp(logits - np.max(logits))
        return min(_trace_or_inf(single_photon_qfim(weights)), 1e12)

    result = scipy.optimize.minimize(trace_of_inverse, np.zeros(3),
                                     method='Nelder-Mead',
                                     options={'xatol': 1e-12,
                                              'fatol': 1e-14,
                                              'maxiter': 20000})

    weights = np.exp(result.x - np.max(result.x))

    return weights/np.sum(weights)


def classical_benchmark(kind, n_photons, device=None,
                        preparation='optimal'):

    """
    Returns the quantum Fisher information of n distinguishable single
    photons, each prepared in the best single-photon probe.

    Args:
        kind (str): 'simultaneous': all photons probe both phases.
        'separate': half of the photons probe each phase alone.
        n_photons (int): The number of photons.
        device (DeviceParams): Needed for preparation='device'.
        preparation (str): 'optimal' optimizes the probe weights over all
        single-photon states. 'device' uses the best input column of the
        preparation tritter of the device.

    Raises:
        ValueError: For an unknown kind or preparation, or an odd number of
        photons in the separate case.
    """

    if kind in ('sim', 'sep'):
        kind = {'sim': 'simultaneous', 'sep': 'separate'}[kind]

    if kind not in BENCHMARK_KINDS:
        raise ValueError(f'Unknown benchmark kind "{kind}".')

    if preparation not in ('optimal', 'device'):
        raise ValueError(f'Unknown preparation "{preparation}".')

    if preparation == 'device':
        if device is None:
            raise ValueError('The device preparation needs a device.')
        columns = np.abs(np.asarray(tritter(device.tritter_a)))**2
        candidates = [columns[:, k] for k in range(columns.shape[1])]

    if kind == 'simultaneous':

        if preparation == 'optimal':
            per_photon = single_photon_qfim(_optimal_probe_weights())
        else:
            per_photon = min((single_photon_qfim(weights)
                              for weights in candidates),
                             key=_trace_or_inf)

        return FisherMatrix(n_photons*per_photon, 'quantum')

    if n_photons % 2:
        raise ValueError('Separate estimation needs an even number of '
                         f'photons, got {n_photons}.')

    # Single-phase quantum Fisher information per photon: 4 p (1 - p) for
    # the weight p on the probed arm, maximal (1) for p = 1/2.
    if preparation == 'optimal':
        per_phase = np.ones(2)
    else:
        per_phase = np.array([max(4*weights[j]*(1 - weights[j])
                                  for weights in candidates)
                              for j in range(2)])

    return FisherMatrix(np.diag(n_photons/2*per_phase), 'quantum')


def positive_eigencount(a, b, tol=None):

    """
    Counts the eigenvalues of (a - b) above tol.
    """

    if tol is None:
        tol = settings.options['EIGEN_TOL']

    a_entries = np.asarray(getattr(a, 'entries', a))
    b_entries = np.asarray(getattr(b, 'entries', b))

    if a_entries.shape != b_entries.shape:
        raise ValueError(f'Dimension mismatch: {a_entries.shape} and '
                         f'{b_entries.shape}.')

    diff = a_entries - b_entries

    return int(np.sum(np.linalg.eigvalsh((diff + diff.T)/2) > tol))


class CRBMap(NamedTuple):

    """
    The Cramer-Rao bound Tr(I^-1) over a phase grid.

    Attributes:
        points (array): N x 2 phases.
        trace (array): Tr(I^-1) per point, nan where singular.
        singular (array): Singularity flags.
        beats_benchmark (array): Points where the trace is below the
        benchmark trace. All False without a benchmark.
        benchmark_trace (float): Tr(H^-1) of the benchmark or None.
        shape (tuple): The grid shape.
    """

    points: np.ndarray
    trace: np.ndarray
    singular: np.ndarray
    beats_benchmark: np.ndarray
    benchmark_trace: float
    shape: tuple

    def as_table(self):
        return {'dphi1': self.points[:, 0],
                'dphi2': self.points[:, 1],
                'trace_inv_fisher': self.trace,
                'singular': self.singular.astype(int),
                'beats_benchmark': self.beats_benchmark.astype(int)}

    def min_trace(self):
        return float(np.nanmin(self.trace))


def crb_map(device, input_state, model, grid, benchmark=None,
            chunk_size=2500):

    """
    Evaluates Tr(I^-1) over a phase grid.

    Args:
        device (DeviceParams): The device.
        input_state (FockState): The input.
        model (DistinguishabilityModel): The distinguishability model.
        grid (PhaseGrid): The grid.
        benchmark (FisherMatrix): Optional benchmark. The mask flags the
        points where Tr(I^-1) < Tr(benchmark^-1).
        chunk_size (int): Number of points evaluated per vectorized call.

    Returns:
        A CRBMap.
    """

    points = grid.points() if isinstance(grid, PhaseGrid) else \
        np.atleast_2d(np.asarray(grid, dtype=float))
    shape = grid.shape if isinstance(grid, PhaseGrid) else (len(points),)

    fisher_fun = make_fisher_fun(device, input_state, model)

    num_chunks = int(np.ceil(len(points)/chunk_size))
    matrices = []
    for chunk_idx in progbar_range(num_chunks, title='Cramer-Rao map'):
        chunk = points[chunk_idx*chunk_size:(chunk_idx + 1)*chunk_size]
        matrices.append(np.asarray(fisher_fun(jnp.asarray(chunk))))

    matrices = np.concatenate(matrices)

    cond = np.linalg.cond(matrices)
    singular = ~np.isfinite(cond) | \
        (cond > settings.options['SINGULAR_CONDITION'])

    trace = np.full(len(points), np.nan)
    regular = ~singular
    if np.any(regular):
        trace[regular] = np.trace(np.linalg.inv(matrices[regular]),
                                  axis1=1, axis2=2)

    benchmark_trace = None
    beats = np.zeros(len(points), dtype=bool)
    if benchmark is not None:
        benchmark_trace = benchmark.inverse_trace()
        beats[regular] = trace[regular] < benchmark_trace

    logger.info('Cramer-Rao map over %d points: %d singular.',
                len(points), int(np.sum(singular)))

    return CRBMap(points, trace, singular, beats, benchmark_trace, shape)
