"""
This module computes the output statistics of one, two and three photons
injected in a three-mode unitary, including partial distinguishability
and Hong-Ou-Mandel delay scans.

Amplitudes follow the permanent rule: for input occupation r and output
occupation s, the indistinguishable probability is
|perm(U[s, r])|^2/(prod s_j! prod r_j!), with U[s, r] the submatrix built by
repeating rows and columns according to the occupations. Fully
distinguishable photons replace the permanent of amplitudes with the
permanent of the squared moduli. A scalar visibility mixes the two.
"""

import functools
import itertools
import math
from typing import NamedTuple

import jax.numpy as jnp
import numpy as np

from trimetro.unitarytools import N_MODES


class FockState(NamedTuple):

    """
    Photon occupations of the three modes.
    """

    occupations: tuple

    @classmethod
    def from_modes(cls, modes, n_modes=N_MODES):

        """
        Creates a FockState from 1-based mode labels, e.g. (2, 3) or (1, 1).
        """

        occupations = [0]*n_modes
        for mode in modes:
            if mode not in range(1, n_modes + 1):
                raise ValueError(f'Mode {mode} outside 1..{n_modes}.')
            occupations[mode-1] += 1

        return cls(tuple(occupations))

    @property
    def total(self):
        return sum(self.occupations)

    @property
    def modes(self):

        """
        The 1-based mode of every photon, in increasing order.
        """

        return tuple(mode + 1 for mode, num in enumerate(self.occupations)
                     for _ in range(num))

    @property
    def label(self):
        return ''.join(str(mode) for mode in self.modes)

    def normalization(self):
        return math.prod(math.factorial(num) for num in self.occupations)


class DistinguishabilityModel(NamedTuple):

    """
    Scalar model of partial distinguishability.

    Attributes:
        visibility (float): The pairwise indistinguishability at zero delay.
        delay (float): The relative delay between the photons.
        width (float): The Hong-Ou-Mandel width, in the units of delay.
    """

    visibility: float = 1.
    delay: float = 0.
    width: float = 1.

    def effective_visibility(self):

        if not 0 <= self.visibility <= 1:
            raise ValueError(f'Visibility {self.visibility} outside [0, 1].')

        if self.delay == 0:
            return float(self.visibility)

        if self.width <= 0:
            raise ValueError('The Hong-Ou-Mandel width must be positive.')

        return float(self.visibility*np.exp(-(self.delay/self.width)**2))


class OutputDistribution(NamedTuple):

    events: tuple
    probs: np.ndarray

    @property
    def n_photons(self):
        return self.events[0].total

    def as_dict(self):
        return {event.label: float(prob)
                for event, prob in zip(self.events, self.probs)}

    def prob(self, modes):
        return self.as_dict()[FockState.from_modes(modes).label]


@functools.lru_cache(maxsize=None)
def _permutation_table(n):
    return np.array(list(itertools.permutations(range(n))), dtype=int)


def permanent(m):

    """
    Calculates the permanent of a square matrix by direct expansion over
    the n! permutations.

    Raises:
        ValueError: If the matrix is not square.
    """

    m = jnp.asarray(m)

    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f'The permanent needs a square matrix, '
                         f'got shape {m.shape}.')

    n = m.shape[0]
    if n == 0:
        return jnp.array(1., dtype=m.dtype)

    perms = _permutation_table(n)

    return jnp.sum(jnp.prod(m[np.arange(n)[None, :], perms], axis=1))


@functools.lru_cache(maxsize=None)
def output_events(n_photons, n_modes=N_MODES):

    """
    Enumerates the multisets of output modes for n photons, in
    lexicographic order of the mode labels (e.g. 11, 12, 13, 22, 23, 33).
    """

    return tuple(FockState.from_modes(modes, n_modes)
                 for modes in itertools.combinations_with_replacement(
                     range(1, n_modes + 1), n_photons))


def _check_input(input_state):

    if not isinstance(input_state, FockState):
        input_state = FockState.from_modes(input_state)

    if input_state.total < 1:
        raise ValueError('The input state has no photons.')

    return input_state


def event_probabilities(u, input_state, visibility=1.):

    """
    Returns the probabilities of all output events, ordered as
    output_events(n). Differentiable with jax with respect to u and the
    visibility.

    Args:
        u (array): The unitary.
        input_state (FockState): The input occupations.
        visibility (float): The effective visibility.
    """

    input_state = _check_input(input_state)

    cols = np.array(input_state.modes) - 1
    in_norm = input_state.normalization()

    probs = []
    for event in output_events(input_state.total, len(input_state[0])):
        rows = np.array(event.modes) - 1
        sub = u[rows[:, None], cols[None, :]]
        out_norm = event.normalization()

        p_indist = jnp.abs(permanent(sub))**2/(out_norm*in_norm)
        p_dist = jnp.real(permanent(jnp.abs(sub)**2))/(out_norm*in_norm)

        probs.append(visibility*p_indist + (1 - visibility)*p_dist)

    return jnp.stack(probs)


def multiphoton_probs(u, input_state, model=None):

    """
    Computes the OutputDistribution of any input occupation.
    """

    input_state = _check_input(input_state)

    if model is None:
        model = DistinguishabilityModel()

    probs = event_probabilities(jnp.asarray(u), input_state,
                                model.effective_visibility())

    return OutputDistribution(output_events(input_state.total),
                              np.asarray(probs))


def single_photon_probs(u, input_mode):

    """
    Returns P(i -> j) = |U_ji|^2 for the given input mode i.
    """

    return multiphoton_probs(u, FockState.from_modes((input_mode,)))


def _check_two_photon_input(input_state):

    input_state = _check_input(input_state)

    if sorted(input_state.occupations) != [0, 1, 1]:
        raise ValueError(f'Two-photon inputs need two photons in distinct '
                         f'modes, got {input_state.occupations}.')

    return input_state


def two_photon_probs(u, input_state, model=None):

    """
    Computes the two-photon OutputDistribution over the six unordered
    output pairs for photons injected in two distinct modes.

    Raises:
        ValueError: If the input is not of the {1, 1, 0} pattern.
    """

    return multiphoton_probs(u, _check_two_photon_input(input_state), model)


def three_photon_probs(u, input_state=(1, 2, 3), model=None):

    """
    Computes the three-photon OutputDistribution over the ten output
    multisets for one photon per mode.
    """

    input_state = _check_input(input_state)

    if input_state.occupations != (1, 1, 1):
        raise ValueError(f'Three-photon inputs need one photon per mode, '
                         f'got {input_state.occupations}.')

    return multiphoton_probs(u, input_state, model)


def hom_scan(u, input_state, delays, model=None):

    """
    Computes the two-photon distributions for a list of relative delays,
    expressed in units of the Hong-Ou-Mandel width.

    Returns:
        A list of OutputDistribution, one per delay.
    """

    input_state = _check_two_photon_input(input_state)

    if model is None:
        model = DistinguishabilityModel()

    return [multiphoton_probs(u, input_state,
                              model._replace(delay=delay, width=1.))
            for delay in delays]
