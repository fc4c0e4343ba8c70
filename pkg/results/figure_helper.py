import argparse
import datetime
import logging
import os

import matplotlib
import numpy as np

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402

from trimetro import misctools, plot_configs, plottools  # noqa: E402
from trimetro.fishertools import CRBMap  # noqa: E402


def crb_map_from_table(table):

    """
    Rebuilds a CRBMap from the table written by 'trimetro crb'. The
    benchmark value is not stored in the table, only its mask.
    """

    dphi1 = np.asarray(table['dphi1'])
    dphi2 = np.asarray(table['dphi2'])
    shape = (len(np.unique(dphi1)), len(np.unique(dphi2)))

    beats = np.asarray(table['beats_benchmark'], dtype=bool)

    return CRBMap(points=np.column_stack([dphi1, dphi2]),
                  trace=np.asarray(table['trace_inv_fisher'], dtype=float),
                  singular=np.asarray(table['singular'], dtype=bool),
                  beats_benchmark=beats,
                  benchmark_trace=np.nan if np.any(beats) else None,
                  shape=shape)


def make_figure(filename, kind):

    logger = logging.getLogger('Figures')

    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s %(message)s')

    plot_configs.apply_style()

    table = misctools.load_table(filename)

    fig, ax = plt.subplots(1)

    if kind == 'crb':
        plottools.plot_crb_map(crb_map_from_table(table), ax=ax)
    else:
        plottools.plot_variance_curves(table, ax=ax)

    timestamp = datetime.datetime.now().strftime('%Y%m%d_%H%M%S')
    stem = os.path.splitext(os.path.basename(filename))[0]
    figure_name = f'figures/{timestamp}_{stem}_{kind}.pdf'

    os.makedirs('figures', exist_ok=True)
    fig.savefig(figure_name)

    logger.info(f'Saved {figure_name}')


if __name__ == '__main__':

    parser = argparse.ArgumentParser(prog='Figure maker for the CLI tables.')
    parser.add_argument('filename', help='CSV table written by trimetro.')
    parser.add_argument('kind', choices=('crb', 'variance'),
                        help='The table type.')

    args = parser.parse_args()

    make_figure(args.filename, args.kind)
