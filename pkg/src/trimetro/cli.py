"""
Command line interface of trimetro.

Every subcommand writes plot-ready data: CSV tables for probabilities,
Cramer-Rao maps and variance experiments, JSON documents for fits and
settings reports. Exit codes: 0 on success, 2 on usage errors and 3 on
numerical failures.
"""

import argparse
import json
import logging
import sys

import numpy as np

from trimetro import devicetools, fishertools, mletools, misctools
from trimetro.characterization import (fittools, fouriertools, procedures,
                                       scantools)
from trimetro.photontools import (DistinguishabilityModel, FockState,
                                  output_events)
from trimetro.settings import settings
from trimetro.thermaltools import UnreachablePhaseError
from trimetro.unitarytools import PhaseVector, parse_grid_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _load_config(args, parser):

    try:
        return devicetools.load_config(args.config)
    except (OSError, ValueError) as error:
        parser.error(f'cannot load the configuration "{args.config}": '
                     f'{error}')


def _input_state(args, parser):

    try:
        modes = tuple(int(mode) for mode in args.input.split(','))
        state = FockState.from_modes(modes)
    except ValueError as error:
        parser.error(f'invalid --input "{args.input}": {error}')

    photons = getattr(args, 'photons', None)
    if photons is not None and photons != state.total:
        parser.error(f'--input {args.input} has {state.total} photons but '
                     f'--photons is {photons}.')

    return state


def _model(args, config, parser):

    visibility = config.visibility if args.visibility is None \
        else args.visibility

    if not 0 <= visibility <= 1:
        parser.error(f'--visibility {visibility} outside [0, 1].')

    return DistinguishabilityModel(visibility)


def _phases(text, parser, flag='--phases'):

    try:
        values = misctools.parse_float_list(text, expected=2)
    except ValueError as error:
        parser.error(f'invalid {flag} "{text}": {error}')

    return PhaseVector(*values)


def _grid(args, parser):

    bounds = None
    if args.range is not None:
        try:
            low1, high1, low2, high2 = misctools.parse_float_list(
                args.range, expected=4)
        except ValueError as error:
            parser.error(f'invalid --range "{args.range}": {error}')
        if not (low1 < high1 and low2 < high2):
            parser.error(f'--range "{args.range}" needs low < high on both '
                         'axes.')
        bounds = ((low1, high1), (low2, high2))

    try:
        return parse_grid_spec(args.grid, bounds)
    except ValueError as error:
        parser.error(str(error))


def _floats(mapping):
    return {key: float(value) for key, value in mapping.items()}


def _write_json(document, filename):

    text = json.dumps(document, indent=2) + '\n'

    if filename is None:
        sys.stdout.write(text)
    else:
        with open(filename, 'w', encoding='utf-8') as file:
            file.write(text)


def cmd_simulate(args, parser):

    """
    Writes the output probabilities for one phase point or a grid.
    Columns: dphi1, dphi2, event, probability.
    """

    config = _load_config(args, parser)
    state = _input_state(args, parser)
    model = _model(args, config, parser)

    if args.phases is not None:
        if args.range is not None:
            parser.error('--range applies to --grid only.')
        points = np.array([_phases(args.phases, parser)[:2]])
    else:
        points = _grid(args, parser).points()

    events = output_events(state.total)
    probs = scantools.surface_probabilities(config.device, state, model,
                                            points)

    n_events = len(events)
    rows = {'dphi1': np.repeat(points[:, 0], n_events),
            'dphi2': np.repeat(points[:, 1], n_events),
            'event': [event.label for event in events]*len(points),
            'probability': probs.ravel()}

    misctools.save_table(rows, args.out)

    return EXIT_OK


def _benchmark(kind, n_photons, parser):

    if kind == 'none':
        return None

    try:
        return fishertools.classical_benchmark(kind, n_photons)
    except ValueError as error:
        parser.error(str(error))


def cmd_crb(args, parser):

    """
    Writes the map of Tr(I^-1) with the singular flags and the benchmark
    mask. Columns: dphi1, dphi2, trace_inv_fisher, singular,
    beats_benchmark.
    """

    config = _load_config(args, parser)
    state = _input_state(args, parser)
    model = _model(args, config, parser)
    grid = _grid(args, parser)

    benchmark = _benchmark(args.benchmark, state.total, parser)

    crb = fishertools.crb_map(config.device, state, model, grid, benchmark)

    misctools.save_table(crb.as_table(), args.out)

    logger.info('Minimum Tr(I^-1) over the map: %.6f.', crb.min_trace())
    if benchmark is not None:
        logger.info('Benchmark Tr(H^-1): %.6f; %d points beat it.',
                    crb.benchmark_trace, int(np.sum(crb.beats_benchmark)))

    return EXIT_OK


def cmd_mle(args, parser):

    """
    Writes the variance experiment table: mean squared errors per number of
    events and the comparison bounds.
    """

    config = _load_config(args, parser)
    state = _input_state(args, parser)
    model = _model(args, config, parser)
    phases = _phases(args.phases, parser)

    if args.sweep is not None:
        try:
            m_values = [int(m) for m in args.sweep.split(',')]
        except ValueError:
            parser.error(f'invalid --sweep "{args.sweep}".')
    else:
        m_values = [args.events]

    if any(m < 1 for m in m_values):
        parser.error('the numbers of events must be at least 1.')

    if args.reps < 2:
        parser.error('--reps must be at least 2.')

    table = mletools.variance_experiment(config.device, phases, state, model,
                                         m_values=m_values,
                                         repetitions=args.reps,
                                         seed=args.seed,
                                         half_width=args.half_width)

    mletools.save_variance_table(table, args.out)

    return EXIT_OK


def cmd_characterize(args, parser):

    """
    Simulates a characterization scan of the configured device, fits it and
    writes the fitted parameters as JSON.
    """

    config = _load_config(args, parser)
    truth = config.device

    noiseless = args.noise == 'none'
    if noiseless:
        counts = None
    else:
        try:
            counts = int(args.noise)
        except ValueError:
            parser.error(f'invalid --noise "{args.noise}"; use a number of '
                         'counts or "none".')
        if counts < 1:
            parser.error('--noise must be at least 1.')

    scan = scantools.generate_scan(truth, args.protocol, counts=counts,
                                   seed=args.seed, noiseless=noiseless,
                                   device_name=config.name)

    if args.scan_out is not None:
        scantools.save_scan_csv(scan, args.scan_out)

    if args.protocol == 'internal':
        if args.init == 'truth':
            init = fittools.pack_internal(truth)
        else:
            init = fittools.initial_guess(scan, truth,
                                          fouriertools.fourier_init(scan))
        result = fittools.fit_device(scan, init=init, template=truth)
    else:
        init = fittools.pack_tritter(truth) if args.init == 'truth' else None
        result = fittools.fit_tritter_resistors(scan, truth, init=init)

    document = result.to_dict()
    deviations = fittools.parameter_errors(result, truth)
    document['max_abs_deviation'] = float(max(deviations.values()))

    _write_json(document, args.out)

    logger.info('chi^2/nu = %.4f, max |parameter - truth| = %.3e.',
                result.reduced_chi_square, document['max_abs_deviation'])

    if not result.converged:
        logger.error('The fit did not converge: %s', result.message)
        return EXIT_NUMERICAL

    return EXIT_OK


def cmd_tritter_set(args, parser):

    """
    Runs the three-step tritter setting procedure and prints the report.
    """

    config = _load_config(args, parser)
    setting = procedures.tritter_setting(config.device)

    phases, phi_ta, phi_tb = setting.phases

    document = {
        'powers_W': _floats(setting.powers),
        'voltages_V': _floats(setting.voltages),
        'phases': {'dphi1': phases.dphi1, 'dphi2': phases.dphi2,
                   'phi_TA': phi_ta, 'phi_TB': phi_tb},
        'residuals': _floats(setting.residuals),
        'branches': {'internal': f'{setting.branches["internal"]:+d}pi/3',
                     'tritter_b': f'{setting.branches["tritter_b"]:+d}pi/2',
                     'tritter_a': f'{setting.branches["tritter_a"]:+d}pi/2'},
        'fidelity_a': float(setting.fidelities[0]),
        'fidelity_b': float(setting.fidelities[1])}

    if config.name == 'reference-device':
        anchors = devicetools.CHARACTERIZED_ANCHORS
        document['reference'] = {
            'fidelity_a': anchors['fidelity_a'],
            'fidelity_b': anchors['fidelity_b'],
            'voltages_V': anchors['setting_voltages']}

    _write_json(document, args.out)

    return EXIT_OK


def cmd_identity(args, parser):

    """
    Configures the device as the identity and prints the report. Exits
    with the numerical failure code if a control cannot be reached.
    """

    config = _load_config(args, parser)
    setting = procedures.identity_configuration(config.device)

    document = {
        'similarity': setting.similarity,
        'converged': setting.converged,
        'offsets': {'dphi1': setting.offsets.dphi1,
                    'dphi2': setting.offsets.dphi2},
        'phi_TA': setting.phi_ta,
        'phi_TB': setting.phi_tb,
        'powers_W': _floats(setting.powers),
        'reachable': setting.reachable}

    if config.name == 'reference-device':
        document['reference'] = {'similarity': devicetools.
                                 CHARACTERIZED_ANCHORS['identity_similarity']}

    _write_json(document, args.out)

    if not setting.reachable:
        logger.error('Some identity controls are not reachable below '
                     '%.2f W.', settings.options['P_MAX'])
        return EXIT_NUMERICAL

    return EXIT_OK


def _add_common(subparser):

    subparser.add_argument('--config', default=None,
                           help='Device configuration file or builtin name '
                           '(reference, ideal). Defaults to $'
                           f'{settings.options["CONFIG_ENV_VAR"]} or '
                           'reference.')
    subparser.add_argument('--out', default=None,
                           help='Output file. Standard output if omitted.')


def _add_optics(subparser, default_input):

    subparser.add_argument('--input', default=default_input,
                           help='Comma separated input modes, e.g. 2,3.')
    subparser.add_argument('--photons', type=int, choices=(1, 2, 3),
                           default=None,
                           help='Number of photons, checked against --input.')
    subparser.add_argument('--visibility', type=float, default=None,
                           help='Photon indistinguishability. Defaults to '
                           'the configuration value.')


def _add_range(subparser):

    subparser.add_argument('--range', default=None,
                           help='Grid bounds low1,high1,low2,high2 (rad). '
                           'Defaults to [0, 2pi) on both axes.')


def build_parser():

    parser = argparse.ArgumentParser(
        prog='trimetro',
        description='Three-mode interferometer simulation and two-phase '
        'estimation.')

    parser.add_argument('-v', '--verbose', action='store_true',
                        help='Debug logging.')
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='No progress bars.')

    subparsers = parser.add_subparsers(dest='command', required=True)

    simulate = subparsers.add_parser('simulate',
                                     help='Output probabilities.')
    _add_common(simulate)
    _add_optics(simulate, '2,3')
    where = simulate.add_mutually_exclusive_group(required=True)
    where.add_argument('--phases', help='dphi1,dphi2 (rad).')
    where.add_argument('--grid', help='NxM grid, see --range.')
    _add_range(simulate)
    simulate.set_defaults(func=cmd_simulate)

    crb = subparsers.add_parser('crb', help='Cramer-Rao bound map.')
    _add_common(crb)
    _add_optics(crb, '2,3')
    crb.add_argument('--grid', default='50x50',
                     help='NxM grid, see --range.')
    _add_range(crb)
    crb.add_argument('--benchmark', choices=('sim', 'sep', 'none'),
                     default='sim',
                     help='Classical benchmark of the mask.')
    crb.set_defaults(func=cmd_crb)

    mle = subparsers.add_parser('mle', help='Maximum likelihood experiment.')
    _add_common(mle)
    _add_optics(mle, '2,3')
    mle.add_argument('--phases', required=True,
                     help='True dphi1,dphi2 (rad).')
    events = mle.add_mutually_exclusive_group()
    events.add_argument('--events', type=int, default=1230,
                        help='Number of events m.')
    events.add_argument('--sweep', default=None,
                        help='Comma separated numbers of events.')
    mle.add_argument('--reps', type=int, default=100,
                     help='Repetitions per number of events.')
    mle.add_argument('--seed', type=int, default=0)
    mle.add_argument('--half-width', type=float, default=None,
                     help='Half-width of the local search domain (rad).')
    mle.set_defaults(func=cmd_mle)

    characterize = subparsers.add_parser(
        'characterize', help='Simulated scan and fit.')
    _add_common(characterize)
    characterize.add_argument('--protocol', choices=('internal', 'tritter'),
                              default='internal')
    characterize.add_argument('--noise',
                              default=str(settings.options['SCAN_COUNTS']),
                              help='Counts per point or "none".')
    characterize.add_argument('--seed', type=int, default=0)
    characterize.add_argument('--init', choices=('fourier', 'truth'),
                              default='fourier',
                              help='Starting point of the fit.')
    characterize.add_argument('--scan-out', default=None,
                              help='Scan CSV file.')
    characterize.set_defaults(func=cmd_characterize)

    tritter_set = subparsers.add_parser('tritter-set',
                                        help='Balanced tritter setting.')
    _add_common(tritter_set)
    tritter_set.set_defaults(func=cmd_tritter_set)

    identity = subparsers.add_parser('identity',
                                     help='Identity configuration.')
    _add_common(identity)
    identity.set_defaults(func=cmd_identity)

    return parser


def main(argv=None):

    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(name)s %(message)s')

    if args.quiet:
        settings.options['SHOW_PROGRESS'] = False

    try:
        return args.func(args, parser)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)
    except (RuntimeError, UnreachablePhaseError) as error:
        logger.error('Numerical failure: %s', error)
        return EXIT_NUMERICAL


if __name__ == '__main__':
    sys.exit(main())
