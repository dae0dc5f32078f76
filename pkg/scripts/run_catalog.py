"""Run the built-in scenarios and summarize their exit codes."""
import argparse
import sys

from sdelab.opt import setup_logger
from sdelab.scenarios import BUILTINS, EXIT_CONFIG, run_catalog, worst_code
from sdelab.utils.env import init_threads
from sdelab.utils.logger import table_writing

parser = argparse.ArgumentParser(description='sdelab catalog run')
parser.add_argument('--out',
                    help='report root; one directory per scenario',
                    default='exp/catalog',
                    type=str)
parser.add_argument('--only',
                    help='comma separated scenario names (default: all built-ins)',
                    default='',
                    type=str)
parser.add_argument('--seed', default=None, type=int,
                    help='replace every stage seed')
parser.add_argument('--threads', default=1, type=int,
                    help='thread budget (-1 = all cores)')
parser.add_argument('--quiet',
                    default=False,
                    dest='quiet',
                    help='warnings only on the console',
                    action='store_true')

opt = parser.parse_args()


def main():
    setup_logger(opt.out, quiet=opt.quiet)
    init_threads(opt)
    names = [n.strip() for n in opt.only.split(',') if n.strip()] or list(BUILTINS)
    unknown = [n for n in names if n not in BUILTINS]
    if unknown:
        print('unknown scenario: {}'.format(', '.join(unknown)))
        return EXIT_CONFIG

    results = run_catalog(opt.out, seed=opt.seed, progress=not opt.quiet, names=names)
    rows = [[name, code, len(report.failures) if report else '-',
             len(report.errors) if report else '-'] for name, code, report in results]
    print(table_writing(['scenario', 'exit code', 'failures', 'errors'], rows, title='catalog'))
    return worst_code([code for _, code, _ in results])


if __name__ == '__main__':
    sys.exit(main())
