"""
This module contains plotting functionalities for the Cramer-Rao maps, the
variance experiments, the probability surfaces and the characterization
scans.
"""

import matplotlib
import matplotlib.pyplot as plt
import numpy as np

from trimetro.settings import settings


def _map_cmap():
    return matplotlib.colors.LinearSegmentedColormap.from_list(
        'TrimetroMap', settings.options['MAP_COLORS'])


def _new_axes(ax):

    if ax is None:
        _, ax = plt.subplots(1)

    return ax


def _as_image(points, values, shape):

    """
    Reshapes values listed in 'ij' order over a grid into an image whose
    rows follow dphi2, with the axes extent.
    """

    image = np.asarray(values, dtype=float).reshape(shape).T
    extent = (points[:, 0].min(), points[:, 0].max(),
              points[:, 1].min(), points[:, 1].max())

    return image, extent


def plot_crb_map(crb, ax=None, show_mask=True):

    """
    Plots Tr(I^-1) over the phase grid. Singular points are left blank and
    the points beating the benchmark are contoured.

    Args:
        crb (CRBMap): The map from fishertools.crb_map().
        ax (matplotlib.axes.Axes): An axes object for the plot.
        show_mask (bool): Whether to contour the benchmark mask.

    Returns:
        The AxesImage.
    """

    ax = _new_axes(ax)

    image, extent = _as_image(crb.points, crb.trace, crb.shape)

    cmap = _map_cmap().with_extremes(bad='white')
    artist = ax.imshow(image, extent=extent, cmap=cmap, aspect='auto')

    if show_mask and crb.benchmark_trace is not None \
            and np.any(crb.beats_benchmark):
        mask, _ = _as_image(crb.points, crb.beats_benchmark, crb.shape)
        ax.contour(mask, levels=[0.5], extent=extent,
                   colors=settings.options['CURVE_COLORS'][2],
                   linewidths=matplotlib.rcParams['lines.linewidth'])

    ax.figure.colorbar(artist, ax=ax, label=r'Tr$(I^{-1})$')
    ax.set_xlabel(r'$\Delta\phi_1$ (rad)')
    ax.set_ylabel(r'$\Delta\phi_2$ (rad)')

    return artist


def plot_variance_curves(table, ax=None):

    """
    Plots the total variance of the estimator against the number of events
    with the Cramer-Rao bound and the classical benchmarks.

    Args:
        table (DataFrame): The output of mletools.variance_experiment().
        ax (matplotlib.axes.Axes): An axes object for the plot.

    Returns:
        A matplotlib Axes instance.
    """

    ax = _new_axes(ax)
    colors = settings.options['CURVE_COLORS']

    m = np.asarray(table['m'], dtype=float)

    ax.loglog(m, table['total_variance'], 'o', color=colors[0],
              label='Estimator')
    ax.loglog(m, table['crb_total'], '-', color=colors[0],
              label='Cramer-Rao')
    ax.loglog(m, table['sim_bound'], '--', color=colors[1],
              label='Simultaneous')

    if np.any(np.isfinite(table['sep_bound'])):
        ax.loglog(m, table['sep_bound'], ':', color=colors[2],
                  label='Separate')

    ax.set_xlabel(r'Number of events $m$')
    ax.set_ylabel(r'Total variance (rad$^2$)')
    ax.legend()

    return ax


def plot_probability_surface(dataset, event, ax=None):

    """
    Plots the probability of one output event over the phase grid of a
    SurfaceDataset.

    Args:
        dataset (SurfaceDataset): The surfaces.
        event (str): The event label, e.g. '12'.
        ax (matplotlib.axes.Axes): An axes object for the plot.

    Returns:
        The AxesImage.
    """

    ax = _new_axes(ax)

    labels = [fock.label for fock in dataset.events]
    if event not in labels:
        raise ValueError(f'Unknown event "{event}"; expected one of '
                         f'{labels}.')

    values = dataset.probs[:, labels.index(event)]

    image, extent = _as_image(dataset.points, values, dataset.shape)

    artist = ax.imshow(image, extent=extent, cmap=_map_cmap(), vmin=0,
                       aspect='auto')

    ax.figure.colorbar(artist, ax=ax, label=f'P({event})')
    ax.set_xlabel(r'$\Delta\phi_1$ (rad)')
    ax.set_ylabel(r'$\Delta\phi_2$ (rad)')

    return artist


def plot_scan_curve(curve, fitted=None, ax=None):

    """
    Plots a ScanCurve with its error bars and, optionally, the
    probabilities of a fitted model at the same powers.

    Args:
        curve (ScanCurve): The measured curve.
        fitted (array): The model probabilities.
        ax (matplotlib.axes.Axes): An axes object for the plot.

    Returns:
        A matplotlib Axes instance.
    """

    ax = _new_axes(ax)
    colors = settings.options['CURVE_COLORS']

    ax.errorbar(curve.powers, curve.probs, yerr=curve.std_errs, fmt='o',
                color=colors[0], label='Scan')

    if fitted is not None:
        ax.plot(curve.powers, fitted, '-', color=colors[2], label='Fit')

    ax.set_xlabel(f'Power on {curve.resistor} (W)')
    ax.set_ylabel(f'P({curve.input_mode} $\\to$ {curve.output_mode})')
    ax.set_ylim(-0.02, 1.02)
    ax.legend()

    return ax
