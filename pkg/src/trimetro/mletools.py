"""
This module simulates coincidence events and estimates the two phase
differences by maximum likelihood in a local estimation framework.
"""

import logging
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import pandas as pd
import scipy.optimize

from trimetro.fishertools import (FisherMatrix, classical_benchmark,
                                  fisher_matrix, make_fisher_fun,
                                  make_prob_fun, positive_eigencount)
from trimetro.misctools import progbar_range, save_table
from trimetro.photontools import FockState, output_events
from trimetro.settings import settings
from trimetro.unitarytools import PhaseVector, wrap_phase

logger = logging.getLogger(__name__)


class DegenerateLikelihoodError(RuntimeError):
    pass


class EventCounts(NamedTuple):

    """
    The number of detected events per output event.

    Attributes:
        events (tuple): The FockState of each output event.
        counts (array): The counts. Non-integer counts are accepted for
        expected-count inputs.
    """

    events: tuple
    counts: np.ndarray

    @property
    def total(self):
        return float(np.sum(self.counts))

    def as_dict(self):
        return {event.label: count
                for event, count in zip(self.events, self.counts)}


class EstimationResult(NamedTuple):

    """
    Attributes:
        estimate (PhaseVector): The maximum likelihood phases.
        variances (array): The asymptotic per-parameter variances
        (I^-1)_jj/m at the estimate (rad^2), nan if I is singular.
        total_variance (float): The sum of the variances.
        m (float): The number of events used.
        log_likelihood (float): The maximal log-likelihood.
    """

    estimate: PhaseVector
    variances: np.ndarray
    total_variance: float
    m: float
    log_likelihood: float


class SearchDomain(NamedTuple):

    """
    The rectangle ((low1, high1), (low2, high2)) in which the likelihood is
    maximized.
    """

    bounds: tuple

    def contains(self, phases):
        return all(low <= phase <= high
                   for phase, (low, high) in zip(phases, self.bounds))


def search_domain(center, half_width=None):

    """
    Returns the square domain of the given half-width (rad) around the
    center phases.
    """

    if half_width is None:
        half_width = settings.options['MLE_HALF_WIDTH']

    if half_width <= 0:
        raise ValueError('The half-width of the domain must be positive.')

    center = [float(center[0]), float(center[1])]

    return SearchDomain(tuple((phase - half_width, phase + half_width)
                              for phase in center))


def _as_fock(input_state):

    if isinstance(input_state, FockState):
        return input_state

    return FockState.from_modes(input_state)


def sample_events(device, phases, input_state, model=None, m=1, seed=None,
                  rng=None):

    """
    Draws m coincidence events from the output distribution.

    Args:
        device (DeviceParams): The device.
        phases (PhaseVector): The true phases.
        input_state (FockState): The input.
        model (DistinguishabilityModel): The distinguishability model.
        m (int): The number of events.
        seed (int): Seed of the generator. Ignored if rng is given.
        rng (numpy.random.Generator): The random generator.

    Raises:
        ValueError: If m < 1.
    """

    if m < 1:
        raise ValueError(f'The number of events must be at least 1, got {m}.')

    if rng is None:
        rng = np.random.default_rng(seed)

    input_state = _as_fock(input_state)

    prob_fun = make_prob_fun(device, input_state, model)
    probs = prob_fun(jnp.array([phases[0], phases[1]], dtype=float))

    return _draw_counts(probs, m, rng, output_events(input_state.total))


def _draw_counts(probs, m, rng, events):

    probs = np.clip(np.asarray(probs), 0., None)

    return EventCounts(events, rng.multinomial(int(m), probs/np.sum(probs)))


class LikelihoodEstimator:

    """
    Maximizes the multinomial likelihood prod_e P_e(phases)^n_e over a
    SearchDomain: a coarse grid scan followed by a bounded Nelder-Mead
    polish. The grid probabilities are computed once and reused for every
    set of counts.

    Ties on the grid are resolved in favor of the smallest phase vector in
    lexicographic order.
    """

    def __init__(self, device, input_state, model=None, domain=None,
                 grid_points=None):

        if grid_points is None:
            grid_points = settings.options['MLE_GRID_POINTS']

        if domain is None:
            domain = SearchDomain(((-np.pi, np.pi), (-np.pi, np.pi)))

        self.device = device
        self.input_state = _as_fock(input_state)
        self.model = model
        self.domain = domain
        self.events = output_events(self.input_state.total)

        self.prob_fun = make_prob_fun(device, self.input_state, model)
        self._fisher_fun = make_fisher_fun(device, self.input_state, model)

        axes = [np.linspace(low, high, grid_points)
                for low, high in domain.bounds]
        grid1, grid2 = np.meshgrid(*axes, indexing='ij')
        self.grid_points = np.column_stack([grid1.ravel(), grid2.ravel()])

        grid_probs = np.asarray(jax.vmap(self.prob_fun)(
            jnp.asarray(self.grid_points)))
        self.log_grid_probs = self._safe_log(grid_probs)

        self._neg_log_likelihood = jax.jit(self._make_neg_log_likelihood())

    @staticmethod
    def _safe_log(probs):
        return np.log(np.clip(probs, settings.options['MIN_EVENT_PROB'],
                              None))

    def _make_neg_log_likelihood(self):

        min_prob = settings.options['MIN_EVENT_PROB']
        prob_fun = self.prob_fun

        def neg_log_likelihood(dphi, freqs):
            probs = jnp.clip(prob_fun(dphi), min_prob, None)
            return -jnp.dot(freqs, jnp.log(probs))

        return neg_log_likelihood

    def _aligned_counts(self, counts):

        if tuple(counts.events) == self.events:
            return np.asarray(counts.counts, dtype=float)

        by_label = counts.as_dict()
        try:
            return np.array([by_label[event.label] for event in self.events],
                            dtype=float)
        except KeyError as missing:
            raise ValueError(f'The counts miss the event {missing} of the '
                             'model outcome set.')

    def estimate(self, counts):

        """
        Returns the EstimationResult for the given EventCounts.

        Raises:
            DegenerateLikelihoodError: If the likelihood is flat over the
            search domain.
        """

        values = self._aligned_counts(counts)
        total = np.sum(values)

        if total <= 0:
            raise ValueError('The counts are empty.')

        freqs = values/total
        grid_loglik = self.log_grid_probs @ freqs

        spread = np.max(grid_loglik) - np.min(grid_loglik)
        if spread <= 1e-12*max(1., np.abs(np.max(grid_loglik))):
            raise DegenerateLikelihoodError(
                'The likelihood is flat over the search domain; the counts '
                'do not identify the phases.')

        # argmax returns the first maximum, i.e. the lexicographic minimum.
        start = self.grid_points[int(np.argmax(grid_loglik))]

        freqs_jnp = jnp.asarray(freqs)

        def objective(dphi):
            return float(self._neg_log_likelihood(jnp.asarray(dphi),
                                                  freqs_jnp))

        tol = settings.options['MLE_TOL']
        result = scipy.optimize.minimize(objective, start,
                                         method='Nelder-Mead',
                                         bounds=self.domain.bounds,
                                         options={'xatol': tol*1e-2,
                                                  'fatol': 1e-15,
                                                  'maxiter': 2000})

        best = result.x if result.fun <= objective(start) else start
        estimate = PhaseVector(float(best[0]), float(best[1]))

        information = FisherMatrix(np.asarray(
            self._fisher_fun(jnp.asarray(best, dtype=float)[None, :])[0]))
        if information.is_singular:
            variances = np.full(2, np.nan)
        else:
            variances = np.diag(information.inverse())/total

        logger.debug('Likelihood maximum at %s after %d evaluations.',
                     best, result.nfev)

        return EstimationResult(estimate=estimate,
                                variances=variances,
                                total_variance=float(np.sum(variances)),
                                m=total,
                                log_likelihood=float(-total*objective(best)))


def mle_estimate(counts, device, input_state, model=None, domain=None):

    """
    Estimates the phases from EventCounts. See LikelihoodEstimator.
    """

    return LikelihoodEstimator(device, input_state, model,
                               domain).estimate(counts)


def _task_rng(seed, m_idx, rep):

    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(m_idx, rep))

    return np.random.default_rng(sequence)


def variance_experiment(device, phases, input_state, model=None,
                        m_values=(1230,), repetitions=100, seed=0,
                        half_width=None):

    """
    Repeats sampling and estimation for each number of events m, and
    reports the mean squared errors with the comparison bounds.

    Each repetition draws from its own generator derived from
    (seed, m index, repetition), so the table does not depend on the
    evaluation order.

    Args:
        device (DeviceParams): The device.
        phases (PhaseVector): The true phases.
        input_state (FockState): The input.
        model (DistinguishabilityModel): The distinguishability model.
        m_values (list): The numbers of events.
        repetitions (int): Repetitions per m (at least 2).
        seed (int): The master seed.
        half_width (float): Half-width of the local search domain.

    Returns:
        A DataFrame with the columns m, var_dphi1, var_dphi2,
        total_variance, crb_dphi1, crb_dphi2, crb_total, sim_bound,
        sep_bound and failures.
    """

    if repetitions < 2:
        raise ValueError(f'At least 2 repetitions are needed, '
                         f'got {repetitions}.')

    m_values = [int(m) for m in m_values]
    if any(m < 1 for m in m_values):
        raise ValueError('Every number of events must be at least 1.')

    input_state = _as_fock(input_state)
    phases = PhaseVector(float(phases[0]), float(phases[1]))
    truth = np.array(phases[:2])

    estimator = LikelihoodEstimator(device, input_state, model,
                                    search_domain(truth, half_width))

    information = fisher_matrix(device, phases, input_state, model)
    crb_diag = np.diag(information.inverse()) if \
        not information.is_singular else np.full(2, np.nan)

    n_photons = input_state.total
    sim_trace = classical_benchmark('simultaneous', n_photons,
                                    device).inverse_trace()
    if n_photons % 2 == 0:
        sep_trace = classical_benchmark('separate', n_photons,
                                        device).inverse_trace()
    else:
        sep_trace = np.nan

    truth_probs = estimator.prob_fun(jnp.asarray(truth))

    rows = []
    for m_idx in progbar_range(len(m_values), title='Variance experiment'):

        m = m_values[m_idx]
        squared_errors = []

        for rep in range(repetitions):
            counts = _draw_counts(truth_probs, m,
                                  _task_rng(seed, m_idx, rep),
                                  estimator.events)
            try:
                result = estimator.estimate(counts)
            except DegenerateLikelihoodError:
                continue

            error = np.asarray(wrap_phase(np.array(result.estimate[:2])
                                          - truth))
            squared_errors.append(error**2)

        failures = repetitions - len(squared_errors)
        if failures:
            logger.warning('%d of %d repetitions with m = %d gave a flat '
                           'likelihood.', failures, repetitions, m)

        mean_sq = np.mean(squared_errors, axis=0) if squared_errors \
            else np.full(2, np.nan)

        rows.append({'m': m,
                     'var_dphi1': mean_sq[0],
                     'var_dphi2': mean_sq[1],
                     'total_variance': float(np.sum(mean_sq)),
                     'crb_dphi1': crb_diag[0]/m,
                     'crb_dphi2': crb_diag[1]/m,
                     'crb_total': float(np.sum(crb_diag))/m,
                     'sim_bound': sim_trace/m,
                     'sep_bound': sep_trace/m,
                     'failures': failures})

    return pd.DataFrame(rows)


def save_variance_table(table, filename):
    return save_table(table, filename)


def information_summary(device, phases, input_state, model=None):

    """
    Returns Tr(I^-1) and the per-photon benchmark traces at the given phases,
    together with the eigencounts of I - H_sim and I - H_sep.
    """

    input_state = _as_fock(input_state)
    information = fisher_matrix(device, phases, input_state, model)
    n_photons = input_state.total

    summary = {'crb_total': information.crb(),
               'sim_trace': classical_benchmark(
                   'simultaneous', n_photons).inverse_trace()}

    summary['sim_eigencount'] = positive_eigencount(
        information, classical_benchmark('simultaneous', n_photons))

    if n_photons % 2 == 0:
        sep = classical_benchmark('separate', n_photons)
        summary['sep_trace'] = sep.inverse_trace()
        summary['sep_eigencount'] = positive_eigencount(information, sep)

    return summary
