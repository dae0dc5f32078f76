import argparse
import logging
import os
from types import MethodType

COMMANDS = ('validate', 'density', 'check', 'simulate', 'ergodic', 'krylov', 'run', 'catalog')

# stages run by each subcommand; comparisons whose stage did not run are skipped
COMMAND_STAGES = {
    'validate': (),
    'density': ('density', 'comparisons'),
    'check': ('density', 'criteria', 'comparisons'),
    'simulate': ('density', 'simulation', 'transition', 'comparisons'),
    'ergodic': ('ergodic', 'comparisons'),
    'krylov': ('density', 'krylov', 'comparisons'),
    'run': None,
    'catalog': None,
}


def _add_common(p):
    "----------------------------- Scenario options -----------------------------"
    p.add_argument('--config', '--cfg', dest='config', type=str, default=None,
                   help='scenario file (YAML or JSON) or name of a built-in scenario')
    p.add_argument('--seed', default=None, type=int,
                   help='replace every stage seed')

    "----------------------------- General options -----------------------------"
    p.add_argument('--threads', default=1, type=int,
                   help='thread budget for assembly and path chunks (-1 = all cores)')

    "----------------------------- Output options -----------------------------"
    p.add_argument('--out', default=None, type=str,
                   help='report directory (nothing is written when omitted)')
    p.add_argument('--format', default='json,csv', type=str,
                   help='comma separated report formats: json, csv')
    p.add_argument('--quiet', default=False, dest='quiet', action='store_true',
                   help='no progress bars and warnings only on the console')


def build_parser():
    parser = argparse.ArgumentParser(prog='sdelab',
                                     description='Numerical laboratory for SDEs with singular coefficients')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True
    helps = {
        'validate': 'validate a scenario file',
        'density': 'analytic densities, finite-volume solve and volume growth',
        'check': 'density stage plus every configured criterion',
        'simulate': 'Euler-Maruyama ensemble, moments, exit times and transition histogram',
        'ergodic': 'long-run time averages',
        'krylov': 'Krylov functional estimate',
        'run': 'every configured stage',
        'catalog': 'list the built-in scenarios (or run them with --run)',
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        if name == 'catalog':
            p.add_argument('--run', default=False, dest='run', action='store_true',
                           help='run every built-in scenario and exit with the worst code')
    return parser


def parse_args(argv=None):
    opt = build_parser().parse_args(argv)
    opt.formats = tuple(f.strip() for f in opt.format.split(',') if f.strip())
    opt.stages = COMMAND_STAGES[opt.command]
    return opt


def stageInfo(self, stage, status, seconds):
    self.info('{stage:<12s} | {status:<6s} | {seconds:.2f}s'.format(
        stage=stage,
        status=status,
        seconds=seconds
    ))


def setup_logger(out_dir=None, quiet=False):
    """Root logger at INFO with a console handler and ``<out>/sdelab.log`` when ``out_dir`` is set.

    Calling it again does not stack handlers.
    """
    logger = logging.getLogger('')
    logger.setLevel(logging.INFO)
    fmt = logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s')

    stream = [h for h in logger.handlers if getattr(h, '_sdelab', None) == 'stream']
    if not stream:
        streamhandler = logging.StreamHandler()
        streamhandler._sdelab = 'stream'
        streamhandler.setFormatter(fmt)
        logger.addHandler(streamhandler)
        stream = [streamhandler]
    stream[0].setLevel(logging.WARNING if quiet else logging.INFO)

    if out_dir is not None:
        if not os.path.exists(out_dir):
            os.makedirs(out_dir)
        path = os.path.abspath(os.path.join(out_dir, 'sdelab.log'))
        known = [h for h in logger.handlers if getattr(h, '_sdelab', None) == path]
        if not known:
            filehandler = logging.FileHandler(path)
            filehandler._sdelab = path
            filehandler.setFormatter(fmt)
            logger.addHandler(filehandler)

    logger.stageInfo = MethodType(stageInfo, logger)
    return logger
