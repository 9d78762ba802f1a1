"""Command-line front end of the entanglement percolation laboratory.

Usage:

    pyqep thresholds
    pyqep scp-curve --alpha1 0:0.5:0.01
    pyqep percolate --kind square --estimate-pc --L 128
    pyqep protocol --name qep-tri-hex --basis xz --alpha1 0.34

Results go to stdout (or --out) as CSV or JSON; logs go to stderr.
Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

import argparse
from contextlib import contextmanager
import json
from json.decoder import JSONDecodeError
import logging
import sys

from pyqep import __version__, quantum_core
from pyqep.lattice import LatticeKind, classical_pc
from pyqep.measurement import (
    Basis, Objective, exhaustive_search, optimal_p_small, optimize_basis)
from pyqep.percolation import Observable, estimate_pc, sweep
from pyqep.protocol import Mode, ProtocolName, ProtocolSpec, compare, run
from pyqep.quantum_core import make_link_state, scp_curve, scp_xz, scp_zz
from pyqep.solver import (
    CURVES, cubic_root_alpha0, table2, table_rows, verify_optimal_structure)
from pyqep.utils import parse_grid, write_rows


DEFAULT_SEED = 0xC0FFEE
DEFAULT_TRIALS = 1000
DEFAULT_L = 64

APP_VERSION = "Version"

# Config file versions that are compatible with this version of pyqep
CONFIG_COMPAT_VERSIONS = ("0.1.0",)

# Options that are never read from or written to a config file
NOT_CONFIG = {'help', 'config', 'save_config', 'command'}

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

LOG_FORMAT = "[%(asctime)s] %(levelname)-8s (%(pathname)s:%(lineno)d) : %(message)s"


def setup_logging(debug=False, log_file=None):
    """Log to stderr, and in full to `log_file` if given."""
    formatter = logging.Formatter(LOG_FORMAT, datefmt="%H:%M:%S")
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.DEBUG if debug else logging.INFO)
    handlers = [console]
    if log_file is not None:
        file_handler = logging.FileHandler(log_file, mode='w')
        file_handler.setLevel(logging.DEBUG)
        handlers.append(file_handler)
    for h in handlers:
        h.setFormatter(formatter)
    logging.basicConfig(
        level=logging.DEBUG if debug or log_file else logging.INFO,
        handlers=handlers,
        force=True
    )
    logging.captureWarnings(True)
    logging.debug(f"Starting pyqep v{__version__}")


def seed_type(text):
    """Seeds may be given in any base Python understands, e.g. 0xC0FFEE."""
    return int(text, 0)


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '-d', '--debug', action='store_true',
        help="print debug information to stderr"
    )
    common.add_argument(
        '--log-file', default=None,
        help="write the full debug log to this file"
    )
    common.add_argument(
        '-c', '--config', default=None,
        help="JSON configuration file with default option values"
    )
    common.add_argument(
        '--save-config', default=None,
        help="write the effective options to a JSON configuration file"
    )
    common.add_argument(
        '--format', default='csv', choices=('csv', 'json'),
        help="output format"
    )
    common.add_argument(
        '--out', default=None,
        help="output file (default stdout)"
    )
    common.add_argument(
        '--seed', default=DEFAULT_SEED, type=seed_type,
        help="master random seed"
    )
    common.add_argument(
        '--workers', default=1, type=int,
        help="number of worker threads (does not change results)"
    )
    common.add_argument(
        '--tolerance', default=None, type=float,
        help="precondition tolerance on probabilities"
    )
    return common


def _mc_options(parser, observable=Observable.WRAPPING.value):
    parser.add_argument('--L', default=DEFAULT_L, type=int,
                        help="linear lattice size in unit cells")
    parser.add_argument('--trials', default=DEFAULT_TRIALS, type=int,
                        help="Monte Carlo trials per point")
    parser.add_argument('--observable', default=observable,
                        choices=[o.value for o in Observable],
                        help="connectivity observable")


def make_parser():
    """Build the argument parser, returning (parser, subparsers by name)."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='pyqep',
        description="Entanglement percolation laboratory")
    parser.add_argument('--version', action='version',
                        version=f"pyqep {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)
    commands = {}

    p = sub.add_parser('scp-curve', parents=[common],
                       help="average SCP curves of partial swapping")
    p.add_argument('--alpha1', default="0:0.5:0.01",
                   help="alpha1 grid, e.g. 0:0.5:0.01 or 0.1,0.3")
    commands['scp-curve'] = p

    p = sub.add_parser('thresholds', parents=[common],
                       help="lower and upper thresholds of each protocol")
    p.add_argument('--verify', action='store_true',
                   help="also verify the optimal basis structure")
    commands['thresholds'] = p

    p = sub.add_parser('percolate', parents=[common],
                       help="classical bond percolation estimates")
    p.add_argument('--kind', default=LatticeKind.SQUARE.value,
                   choices=[k.value for k in LatticeKind])
    group = p.add_mutually_exclusive_group()
    group.add_argument('--p', default=None, help="bond density grid")
    group.add_argument('--alpha1', default=None,
                       help="alpha1 grid, bond density 2 alpha1")
    group.add_argument('--estimate-pc', action='store_true',
                       help="estimate the critical bond density")
    _mc_options(p)
    commands['percolate'] = p

    p = sub.add_parser('protocol', parents=[common],
                       help="run an entanglement percolation protocol")
    p.add_argument('--name', default=ProtocolName.QEP_TRI_HEX.value,
                   choices=[n.value for n in ProtocolName])
    p.add_argument('--basis', default=None,
                   choices=[b.value for b in Basis],
                   help="Bell measurement of QEP runs (default zz)")
    p.add_argument('--mode', default=Mode.EFFECTIVE_RATE.value,
                   choices=[m.value for m in Mode])
    p.add_argument('--kind', default=LatticeKind.TRIANGULAR.value,
                   choices=[k.value for k in LatticeKind],
                   help="lattice of a CEP run")
    p.add_argument('--alpha1', default="0.3", help="alpha1 grid")
    _mc_options(p)
    commands['protocol'] = p

    p = sub.add_parser('compare', parents=[common],
                       help="compare CEP and QEP protocols")
    p.add_argument('--alpha1', default="0.15:0.35:0.05", help="alpha1 grid")
    p.add_argument('--bases', default="zz,xz,optimal",
                   help="bases of the triangular QEP runs")
    p.add_argument('--mode', default=Mode.EFFECTIVE_RATE.value,
                   choices=[m.value for m in Mode])
    _mc_options(p, Observable.TWO_POINT.value)
    commands['compare'] = p

    p = sub.add_parser('optimize-basis', parents=[common],
                       help="optimise the Bell measurement per alpha1")
    p.add_argument('--alpha1', default="0.05:0.45:0.05", help="alpha1 grid")
    p.add_argument('--objective', default=Objective.PARTIAL_SWAP.value,
                   choices=[o.value for o in Objective])
    p.add_argument('--exhaustive', action='store_true',
                   help="also search all four-outcome measurements")
    commands['optimize-basis'] = p
    return parser, commands


def config_keys(subparser):
    return {a.dest for a in subparser._actions} - NOT_CONFIG


def load_config(config_file, subparser):
    """Read option defaults from a JSON configuration file."""
    try:
        with open(config_file, 'r') as f:
            config = json.load(f)
    except (IOError, JSONDecodeError) as e:
        raise ValueError(f"Unable to read config file {config_file}: {e}") \
            from e
    v = config.get(APP_VERSION)
    if v not in CONFIG_COMPAT_VERSIONS:
        raise ValueError(f"Configuration file version {v} incompatible with "
                         f"pyqep v{__version__} for {config_file}")
    known = config_keys(subparser)
    defaults = {}
    for key, value in config.items():
        if key == APP_VERSION:
            continue
        if key.replace('-', '_') not in known:
            logging.warning(f"Unknown key {key} in config file")
            continue
        defaults[key.replace('-', '_')] = value
    logging.info(f"Loaded configuration from {config_file}")
    return defaults


def save_config(opts, subparser, config_file):
    config = {k: v for k, v in vars(opts).items()
              if k in config_keys(subparser)}
    config[APP_VERSION] = __version__
    with open(config_file, 'w') as f:
        f.write(json.dumps(config, indent=4) + "\n")
    logging.info(f"Saved current configuration to {config_file}")


def parse_args(args):
    parser, commands = make_parser()
    opts = parser.parse_args(args)
    if opts.config is not None:
        subparser = commands[opts.command]
        subparser.set_defaults(**load_config(opts.config, subparser))
        opts = parser.parse_args(args)
    return opts, commands[opts.command]


SCP_COLUMNS = {'s_zz': 'zz', 's_xz': 'xz', 's_opt': 'optimal'}


def cmd_scp_curve(opts):
    grid = parse_grid(opts.alpha1)
    curves = {column: scp_curve(CURVES[name], grid)
              for column, name in SCP_COLUMNS.items()}
    pc_hex = classical_pc(LatticeKind.HEXAGONAL)
    rows = []
    for i, point in enumerate(curves['s_zz']):
        row = {'alpha1': point.alpha1}
        for column, points in curves.items():
            row[column] = points[i].scp
        row['pc_hex'] = pc_hex
        rows.append(row)
    return rows


def cmd_thresholds(opts):
    table = table2()
    root = cubic_root_alpha0()
    logging.info(f"alpha0* = {root.value:.10f} (residual {root.residual:.1e})")
    rows = table_rows(table)
    if opts.verify:
        flagged = verify_optimal_structure(parse_grid("0.01:0.49:0.01"))
        for row in rows:
            row['structure_flags'] = len(flagged) if row['protocol'] == \
                CURVES['optimal'].label else 0
    return rows


def cmd_percolate(opts):
    if opts.estimate_pc:
        est = estimate_pc(opts.kind, opts.L, opts.trials, opts.seed,
                          workers=opts.workers)
        return [{
            'kind': opts.kind,
            'pc': est.value,
            'stderr': est.stderr,
            'pc_exact': classical_pc(opts.kind),
            'bracket_low': est.bracket[0],
            'bracket_high': est.bracket[1],
            'L': opts.L,
            'trials': opts.trials,
            'seed': opts.seed,
        }]
    if opts.alpha1 is not None:
        grid = [2 * a1 for a1 in parse_grid(opts.alpha1)]
    elif opts.p is not None:
        grid = parse_grid(opts.p)
    else:
        raise ValueError("percolate needs one of --p, --alpha1 or "
                         "--estimate-pc")
    return sweep(opts.kind, grid, opts.L, opts.trials, opts.seed,
                 opts.observable, workers=opts.workers)


def cmd_protocol(opts):
    rows = []
    for a1 in parse_grid(opts.alpha1):
        spec = ProtocolSpec(opts.name, a1, opts.basis, opts.mode,
                            kind=opts.kind)
        result = run(spec, opts.L, opts.trials, opts.seed, opts.observable,
                     workers=opts.workers)
        rows.append(result.as_row())
    return rows


def cmd_compare(opts):
    grid = parse_grid(opts.alpha1)
    a1 = grid[0]
    specs = [ProtocolSpec(ProtocolName.CEP, a1, kind=LatticeKind.TRIANGULAR)]
    for basis in opts.bases.split(','):
        specs.append(ProtocolSpec(ProtocolName.QEP_TRI_HEX, a1,
                                  basis.strip(), opts.mode))
    specs.append(ProtocolSpec(ProtocolName.CEP, a1, kind=LatticeKind.KAGOME))
    specs.append(ProtocolSpec(ProtocolName.QEP_KAGOME_SQUARE, a1,
                              Basis.ZZ, opts.mode))
    return compare(specs, grid, opts.L, opts.trials, opts.seed,
                   opts.observable, workers=opts.workers)


def cmd_optimize_basis(opts):
    objective = Objective(opts.objective)
    rows = []
    for a1 in parse_grid(opts.alpha1):
        link = make_link_state(a1)
        meas, value = optimize_basis(link, objective)
        row = {
            'alpha1': link.alpha1,
            'p_small': meas.p_small,
            'value': value,
            'closed_form_p_small': optimal_p_small(link),
            's_zz': scp_zz(link),
            's_xz': scp_xz(link),
        }
        if opts.exhaustive:
            best, best_value = exhaustive_search(link, objective)
            row['exhaustive_value'] = best_value
            row['exhaustive_probs'] = " ".join(f"{p:.6f}" for p in best.probs)
        rows.append(row)
    return rows


COMMANDS = {
    'scp-curve': cmd_scp_curve,
    'thresholds': cmd_thresholds,
    'percolate': cmd_percolate,
    'protocol': cmd_protocol,
    'compare': cmd_compare,
    'optimize-basis': cmd_optimize_basis,
}


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, 'w') as f:
            yield f


def main(args):
    """Run the command line interface and return the exit code."""
    parser, commands = make_parser()
    pre = parser.parse_args(args)
    setup_logging(pre.debug, pre.log_file)
    try:
        opts, subparser = parse_args(args)
        if opts.tolerance is not None:
            quantum_core.TOLERANCE = opts.tolerance
            logging.debug(f"Tolerance set to {opts.tolerance}")
        if opts.save_config is not None:
            save_config(opts, subparser, opts.save_config)
        rows = COMMANDS[opts.command](opts)
        params = {k: v for k, v in vars(opts).items()
                  if k in config_keys(subparser) and k != 'seed'}
        params['command'] = opts.command
        with _output(opts.out) as f:
            write_rows(rows, f, params, opts.seed, opts.format)
    except ValueError as e:
        logging.error(str(e))
        return EXIT_USAGE
    except ArithmeticError as e:
        logging.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except Exception:
        logging.exception("Unexpected error")
        raise
    return EXIT_OK


def run_cli():
    sys.exit(main(sys.argv[1:]))
