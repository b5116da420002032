"""Command line interface - Run scenarios, locate extremal times, compute
Wigner grids from state files, compare runs and list registered runs.

    fwmcat run --config paper-s1 --out runs/s1
    fwmcat scan --config paper-s2
    fwmcat wigner --state runs/s1/state-raw.json --mode 3 --grid=-8,8,201,-8,8,201
    fwmcat compare --a runs/s2 --b runs/s3
    fwmcat runs --mongo-db fwmcat

Exit codes are 0 on success, 2 for invalid configurations or arguments and 3
for numerical failures.
"""

import argparse
import json
import logging
import os
import sys

from fwmcat import FWMCatStore
from fwmcat.datastore import format_timestamp
from fwmcat.errors import ConfigurationError, NumericalError
from fwmcat.mongo import MongoDBFactory
from fwmcat.observables import negativity_volume, wigner, wigner_min
from fwmcat.scenario import (
    compare_states, config_hash, list_presets, load_config, run_scenario,
    scan_extremum
)
from fwmcat.states import partial_trace, read_state


logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
#
# Constants
#
# ------------------------------------------------------------------------------

EXIT_SUCCESS = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

# Default directory for run registry files
DEFAULT_STORE_DIR = 'fwmcat-store'

# Run property that records a failed attachment copy
PROPERTY_ATTACHMENT_ERROR = 'attachmentError'


# ------------------------------------------------------------------------------
#
# Argument parser
#
# ------------------------------------------------------------------------------

class CliArgumentError(ConfigurationError):
    """Invalid command line argument."""
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting so that invalid
    arguments map to the configuration error exit code.
    """
    def error(self, message):
        raise CliArgumentError(message)


def build_parser():
    """Create the parser for all sub-commands.

    Returns
    -------
    argparse.ArgumentParser
    """
    parser = ArgumentParser(
        prog='fwmcat',
        description='Truncated Fock space simulations of cat-like state generation by four-wave mixing'
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='debug output')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings and errors only')
    commands = parser.add_subparsers(dest='command')
    # run
    run = commands.add_parser('run', help='run a scenario and write its output files')
    add_config_arguments(run)
    run.add_argument('--out', help='output directory (overrides outputs.directory)')
    run.add_argument('--seed', type=int, help='master seed of the trajectory ensemble')
    run.add_argument('--trajectories', type=int, help='number of trajectories')
    run.add_argument('--compare-with', dest='compare_with', help='output directory of a reference run')
    run.add_argument('--name', help='run name in the registry')
    add_registry_arguments(run)
    # scan
    scan = commands.add_parser('scan', help='locate the extremal time of a scenario')
    add_config_arguments(scan)
    # wigner
    wig = commands.add_parser('wigner', help='Wigner grid of a mode of a state file')
    wig.add_argument('--state', required=True, help='state file')
    wig.add_argument('--mode', type=int, required=True, help='mode (1-based)')
    wig.add_argument('--grid', default='-8,8,201,-8,8,201', help='xmin,xmax,nx,pmin,pmax,np')
    wig.add_argument('--out', help='output file (default: standard output)')
    # compare
    compare = commands.add_parser('compare', help='fidelities between the reduced states of two runs')
    compare.add_argument('--a', required=True, help='run directory or state file')
    compare.add_argument('--b', required=True, help='run directory or state file')
    compare.add_argument('--modes', help='comma separated list of modes (1-based)')
    # runs
    listing = commands.add_parser('runs', help='list registered runs')
    add_registry_arguments(listing, required=True)
    listing.add_argument('--state', help='only runs in the given state')
    listing.add_argument('--limit', type=int, default=-1, help='maximum number of runs')
    return parser


def add_config_arguments(parser):
    parser.add_argument('--config', required=True, help='configuration file or preset (%s)' % ', '.join(list_presets()))
    parser.add_argument(
        '--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
        help='override a configuration value, e.g., solver.n_traj=100'
    )


def add_registry_arguments(parser, required=False):
    parser.add_argument('--mongo-db', dest='mongo_db', required=required, help='MongoDB database of the run registry')
    parser.add_argument('--store-dir', dest='store_dir', default=DEFAULT_STORE_DIR, help='directory for registry files')


def configure_logging(args):
    """Configure the root logger from the verbosity flags."""
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s'
    )


# ------------------------------------------------------------------------------
#
# Commands
#
# ------------------------------------------------------------------------------

def command_compare(args, mongo_factory):
    modes = parse_int_list(args.modes) if args.modes else None
    record = compare_states(args.a, args.b, modes=modes)
    print(json.dumps(record, sort_keys=True, indent=2))


def command_run(args, mongo_factory):
    overrides = list(args.overrides)
    if not args.seed is None:
        overrides.append('solver.master_seed=%d' % args.seed)
    if not args.trajectories is None:
        overrides.append('solver.n_traj=%d' % args.trajectories)
    config = load_config(args.config, overrides=overrides)
    store = None
    run = None
    if args.mongo_db:
        store = FWMCatStore(mongo_factory(args.mongo_db), args.store_dir)
        name = args.name or os.path.basename(args.config)
        run = store.runs_create(name, config.to_dict(), config_hash(config), properties={'solver': config.solver['method']})
        store.runs_update_state_active(run.identifier)
        logger.info('registered run %s', run.identifier)
    try:
        report = run_scenario(config, directory=args.out, reference=args.compare_with)
    except Exception as ex:
        # Registered runs never stay in RUNNING state
        if not store is None:
            store.runs_update_state_error(run.identifier, ['%s: %s' % (type(ex).__name__, str(ex))])
        raise
    if not store is None:
        store.runs_update_state_success(run.identifier, report.to_dict())
        try:
            for filename in report.files:
                store.runs_attachments_create(run.identifier, os.path.basename(filename), filename)
        except (IOError, OSError) as ex:
            # Successful runs cannot fail any more. The error is kept with the
            # run and the output files remain in the output directory.
            logger.error('attaching %s to run %s failed: %s', filename, run.identifier, str(ex))
            store.runs_upsert_property(run.identifier, {PROPERTY_ATTACHMENT_ERROR: str(ex)})
            raise
    if report.files:
        print('tau* = %s, %d files written' % (format_tau(report.tau_star), len(report.files)))
    else:
        print(report.to_text(), end='')


def command_runs(args, mongo_factory):
    store = FWMCatStore(mongo_factory(args.mongo_db), args.store_dir)
    listing = store.runs_list(state=args.state, limit=args.limit)
    for run in listing.items:
        print('\t'.join([
            run.identifier,
            format_timestamp(run.timestamp),
            str(run.state),
            run.properties.get('hamiltonian', ''),
            run.config_hash[:12],
            run.name
        ]))
    logger.info('%d of %d runs', len(listing.items), listing.total_count)


def command_scan(args, mongo_factory):
    config = load_config(args.config, overrides=args.overrides)
    print(json.dumps(scan_extremum(config), sort_keys=True, indent=2))


def command_wigner(args, mongo_factory):
    grid_spec = parse_grid(args.grid)
    with open(args.state, 'r') as f:
        state = read_state(f)
    mode = args.mode - 1
    if getattr(state, 'is_reduced', False) and state.modes == (mode,):
        rho = state
    else:
        rho = partial_trace(state, [mode])
    x_min, x_max, x_count, p_min, p_max, p_count = grid_spec
    grid = wigner(
        rho,
        x_min=x_min, x_max=x_max, x_count=x_count,
        p_min=p_min, p_max=p_max, p_count=p_count,
        label='mode' + str(args.mode)
    )
    header = ['mode: %d' % args.mode, 'state: ' + os.path.basename(args.state)]
    if not state.metadata.get('tau') is None:
        header.append('tau: %.9g' % state.metadata['tau'])
    if args.out:
        with open(args.out, 'w') as f:
            grid.write(f, header=header)
    else:
        sys.stdout.write(grid.to_text(header=header))
    logger.info(
        'Wigner grid: min %.6g, negativity volume %.6g, normalization %.6g',
        wigner_min(grid), negativity_volume(grid), grid.normalization()
    )


COMMANDS = {
    'compare': command_compare,
    'run': command_run,
    'runs': command_runs,
    'scan': command_scan,
    'wigner': command_wigner
}


# ------------------------------------------------------------------------------
#
# Main
#
# ------------------------------------------------------------------------------

def main(argv=None, mongo_factory=None):
    """Entry point of the fwmcat command.

    Parameters
    ----------
    argv : list(string), optional
        Command line arguments (default: sys.argv[1:])
    mongo_factory : callable, optional
        Function that returns a MongoDBFactory for a database name

    Returns
    -------
    int
        Exit code
    """
    if mongo_factory is None:
        mongo_factory = MongoDBFactory
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliArgumentError('missing command')
    except CliArgumentError as ex:
        parser.print_usage(sys.stderr)
        sys.stderr.write('fwmcat: error: %s\n' % str(ex))
        return EXIT_CONFIG_ERROR
    configure_logging(args)
    try:
        COMMANDS[args.command](args, mongo_factory)
    except NumericalError as ex:
        sys.stderr.write('fwmcat: numerical error: %s\n' % str(ex))
        if ex.diagnostics:
            sys.stderr.write('fwmcat: diagnostics: %s\n' % json.dumps(ex.diagnostics, sort_keys=True, default=str))
        return EXIT_NUMERICAL_ERROR
    except (ValueError, IOError) as ex:
        sys.stderr.write('fwmcat: error: %s\n' % str(ex))
        return EXIT_CONFIG_ERROR
    return EXIT_SUCCESS


def format_tau(tau):
    return 'undefined' if tau is None else '%.6f' % tau


def parse_grid(text):
    """Parse a Wigner grid specification xmin,xmax,nx,pmin,pmax,np. Point
    counts have to be integers.

    Returns
    -------
    list
    """
    values = text.split(',')
    if len(values) != 6:
        raise CliArgumentError('expected xmin,xmax,nx,pmin,pmax,np: ' + text)
    try:
        grid_spec = [float(v) for v in values]
    except ValueError:
        raise CliArgumentError('invalid grid: ' + text)
    for index in [2, 5]:
        try:
            grid_spec[index] = int(values[index])
        except ValueError:
            raise CliArgumentError('grid point counts must be integers: ' + text)
    return grid_spec


def parse_int_list(text):
    try:
        return [int(v) for v in text.split(',')]
    except ValueError:
        raise CliArgumentError('expected comma separated integers: ' + text)


if __name__ == '__main__':
    sys.exit(main())
