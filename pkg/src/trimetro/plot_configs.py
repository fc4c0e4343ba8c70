"""
Figure style for single-column journal figures of phase maps and
variance curves. Importing the module applies the style.
"""

import matplotlib

STYLE = {
    # Legend
    'legend.frameon': False,
    'legend.fontsize': 8,
    'legend.handlelength': 1.5,
    'legend.labelspacing': 0.3,

    # Figure
    'figure.figsize': (3.4, 2.8),
    'figure.constrained_layout.use': True,

    'lines.linewidth': 1.,
    'lines.markersize': 4,

    'axes.labelsize': 9,
    'axes.linewidth': 0.6,
    'axes.formatter.use_mathtext': True,

    'image.interpolation': 'nearest',
    'image.origin': 'lower',

    # Fonts
    'text.usetex': False,
    'mathtext.fontset': 'cm',
    'font.family': 'serif',
    'font.serif': ['cmr10', 'DejaVu Serif'],

    # Saving
    'savefig.bbox': 'tight',
    'savefig.pad_inches': 0.04,
    'savefig.dpi': 600,
}

for axis, sides in (('xtick', ('top', 'bottom')),
                    ('ytick', ('left', 'right'))):
    STYLE[f'{axis}.direction'] = 'in'
    STYLE[f'{axis}.labelsize'] = 8
    STYLE[f'{axis}.minor.visible'] = True
    STYLE[f'{axis}.major.size'] = 3.
    STYLE[f'{axis}.minor.size'] = 1.5
    for side in sides:
        STYLE[f'{axis}.{side}'] = True


def apply_style():
    matplotlib.rcParams.update(STYLE)


apply_style()
