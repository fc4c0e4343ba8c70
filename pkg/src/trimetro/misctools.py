"""
This module defines generic helper functions for trimetro.
"""

import sys

import numpy as np
import pandas as pd

from trimetro.settings import settings


def progbar_range(num_iters, title='', depth=0):

    """
    Creates a simple progress bar depending on the depth of the nested
    iterations. Nothing is printed when settings.options['SHOW_PROGRESS']
    is False.

    Args:
        num_iters (int): The number of iterations.
        title (str): The title for the progress bar.
        depth (int): Specifies the position in the tree of nested
        iterations.

    Returns:
        A generator that prints the percentage of the current step with
        respect to the number of iterations.
    """

    if not settings.options['SHOW_PROGRESS']:
        yield from range(num_iters)
        return

    if depth > 0:
        title = '\t'*depth + ' \\' + '-'*4 + ' ' + title

    print('\n', end='', file=sys.stderr)

    for step in range(num_iters):
        percentage = 100*step/(num_iters)

        print(f'\r{title}:\t{percentage:^6.2f}'+'%', end='', file=sys.stderr)
        yield step

    print(f'\r{title}:\t{100.00:^6.2f}'+'%', end='', file=sys.stderr)
    if depth > 0:
        print('\r'+' '*2*len(title), end='', file=sys.stderr)
    else:
        print('\n', end='', file=sys.stderr)


def save_table(table, filename):

    """
    Saves a dictionary of equal-length columns (or a DataFrame) as a csv
    file with a header row and a period decimal separator.
    If filename is None, the table is written to stdout.
    """

    df = pd.DataFrame(table)

    df.to_csv(sys.stdout if filename is None else filename,
              index=False,
              float_format='%.12f',
              na_rep='nan')

    return df


def load_table(filename):

    """
    Loads a csv table written by save_table() as a DataFrame.
    """

    return pd.read_csv(filename)


def parse_float_list(text, expected=None):

    """
    Parses a comma separated list of floats, e.g. '-1.159,2.810'.

    Raises:
        ValueError: If an entry is not a number or the number of entries
        differs from expected.
    """

    values = [float(entry) for entry in text.split(',') if entry.strip()]

    if expected is not None and len(values) != expected:
        raise ValueError(f'Expected {expected} comma separated values, '
                         f'got {len(values)} in "{text}".')

    return np.array(values)
