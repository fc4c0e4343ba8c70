"""
This module extracts the oscillation frequencies of the scan curves and
turns them into starting values for the thermal coefficients.

A single-photon probability depends on the power P of one resistor through
cos(alpha_1 P + c), cos(alpha_2 P + c') and cos((alpha_1 - alpha_2) P + c''),
so that the spectrum of each curve is made of |alpha_1|, |alpha_2| and
|alpha_1 - alpha_2| (the quadratic terms only broaden the peaks).
"""

import logging
from typing import NamedTuple

import numpy as np
import scipy.fft
import scipy.signal

from trimetro.settings import settings
from trimetro.thermaltools import INTERNAL_RESISTORS

logger = logging.getLogger(__name__)


class FourierInit(NamedTuple):

    """
    Starting values of the thermal coefficients.

    Attributes:
        alpha_lin (array): 2 x 4 linear coefficients (rad/W).
        alpha_nl (array): 2 x 4 quadratic coefficients, zero.
        low_confidence (array): 2 x 4 flags of the coefficients without a
        resolvable harmonic.
        harmonics (dict): The shared harmonics of each resistor (rad/W), in
        decreasing order.
    """

    alpha_lin: np.ndarray
    alpha_nl: np.ndarray
    low_confidence: np.ndarray
    harmonics: dict


def curve_harmonics(powers, probs, pad_factor=None, min_amplitude=None,
                    min_cycles=None):

    """
    Finds the angular frequencies (rad/W) of the peaks of the zero-padded
    spectrum of a curve. The mean is removed first, so a uniform offset
    does not change the result.

    Args:
        powers (array): Uniformly spaced powers (W).
        probs (array): The probabilities.
        pad_factor (int): Zero padding factor of the transform.
        min_amplitude (float): Peaks below this fraction of the strongest
        peak are dropped.
        min_cycles (float): Frequencies completing fewer oscillations over
        the scan are dropped.

    Returns:
        An array of frequencies sorted by decreasing peak amplitude.
    """

    if pad_factor is None:
        pad_factor = settings.options['FOURIER_PAD_FACTOR']

    if min_amplitude is None:
        min_amplitude = settings.options['FOURIER_MIN_AMPLITUDE']

    if min_cycles is None:
        min_cycles = settings.options['FOURIER_MIN_CYCLES']

    powers = np.asarray(powers, dtype=float)
    probs = np.asarray(probs, dtype=float)

    span = powers[-1] - powers[0]
    step = span/(len(powers) - 1)

    signal = probs - np.mean(probs)

    if np.max(np.abs(signal)) < 1e-9:
        return np.array([])

    num_fft = pad_factor*len(powers)
    spectrum = np.abs(scipy.fft.rfft(signal, num_fft))
    omegas = 2*np.pi*scipy.fft.rfftfreq(num_fft, d=step)

    peaks, props = scipy.signal.find_peaks(
        spectrum, height=min_amplitude*np.max(spectrum))

    resolvable = omegas[peaks]*span/(2*np.pi) >= min_cycles
    peaks = peaks[resolvable]
    heights = props['peak_heights'][resolvable]

    return omegas[peaks[np.argsort(heights)[::-1]]]


def _shared_harmonics(harmonic_lists, resolution, shared_fraction):

    """
    Clusters the harmonics of several curves and keeps the cluster centers
    present in at least shared_fraction of the curves with a spectrum.
    """

    curves_with_peaks = [values for values in harmonic_lists if len(values)]
    if not curves_with_peaks:
        return np.array([])

    pooled = np.sort(np.concatenate(curves_with_peaks))

    clusters = [[pooled[0]]]
    for value in pooled[1:]:
        if value - clusters[-1][-1] <= resolution:
            clusters[-1].append(value)
        else:
            clusters.append([value])

    shared = []
    for cluster in clusters:
        low, high = min(cluster) - resolution/2, max(cluster) + resolution/2
        support = sum(np.any((values >= low) & (values <= high))
                      for values in curves_with_peaks)
        if support >= shared_fraction*len(curves_with_peaks):
            shared.append(np.median(cluster))

    return np.sort(shared)[::-1]


def _assign_harmonics(resistor, harmonics):

    """
    Returns the (alpha_1, alpha_2) starting values of a resistor and their
    confidence flags. An arm resistor mostly shifts its own arm, whose
    coefficient takes the largest harmonic, while the other arm takes the
    smallest one. A reference-arm resistor shifts both differences by a
    negative amount, the larger one being assigned to arm 1.
    """

    arm = settings.options['RESISTOR_ARMS'][resistor]

    alphas = np.zeros(2)
    confident = np.zeros(2, dtype=bool)

    if len(harmonics) == 0:
        return alphas, confident

    if arm in (1, 2):
        own, other = arm - 1, 2 - arm
        alphas[own] = harmonics[0]
        confident[own] = True
        if len(harmonics) > 1:
            alphas[other] = harmonics[-1]
            confident[other] = True
    else:
        alphas[0] = -harmonics[0]
        confident[0] = True
        if len(harmonics) > 1:
            alphas[1] = -harmonics[1]
            confident[1] = True

    return alphas, confident


def fourier_init(scan):

    """
    Computes the starting values of the linear thermal coefficients from an
    internal-resistor ScanDataset. For each resistor, the harmonics shared
    by its curves are kept and assigned to the coefficients with the
    proximity rule of settings.options['RESISTOR_ARMS']. Coefficients
    without a resolvable harmonic are set to zero and flagged.

    Returns:
        A FourierInit.
    """

    if scan.protocol != 'internal':
        raise ValueError('The Fourier initialization needs an '
                         'internal-resistor scan.')

    shared_fraction = settings.options['FOURIER_SHARED_FRACTION']

    alpha_lin = np.zeros((2, len(INTERNAL_RESISTORS)))
    low_confidence = np.ones_like(alpha_lin, dtype=bool)
    harmonics = {}

    for idx, resistor in enumerate(INTERNAL_RESISTORS):

        curves = scan.curves_of(resistor)
        if not curves:
            continue

        powers = curves[0].powers
        resolution = 2*np.pi/(powers[-1] - powers[0])

        harmonic_lists = [curve_harmonics(curve.powers, curve.probs)
                          for curve in curves]
        harmonics[resistor] = _shared_harmonics(harmonic_lists, resolution/2,
                                                shared_fraction)

        alphas, confident = _assign_harmonics(resistor, harmonics[resistor])
        alpha_lin[:, idx] = alphas
        low_confidence[:, idx] = ~confident

        logger.debug('Resistor %s: shared harmonics %s.', resistor,
                     np.round(harmonics[resistor], 3))

    return FourierInit(alpha_lin=alpha_lin,
                       alpha_nl=np.zeros_like(alpha_lin),
                       low_confidence=low_confidence,
                       harmonics=harmonics)
