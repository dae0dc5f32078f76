"""``sdelab`` command line entry point."""
import logging
import sys

from .opt import parse_args, setup_logger
from .scenarios import (EXIT_CONFIG, EXIT_OK, EXIT_STAGE_ERROR, STAGES, emit_report,
                        list_builtins, load_scenario, requested_stages, resolve_config, run_catalog,
                        run_scenario, worst_code)
from .scenarios.report import FORMATS, report_dir
from .utils.env import init_threads
from .utils.errors import ConfigError, ReportError
from .utils.logger import table_writing

logger = logging.getLogger(__name__)


def _validate(opt):
    sc = load_scenario(resolve_config(opt.config), seed=opt.seed)
    configured = requested_stages(sc)
    rows = [[stage, 'yes' if stage in configured else 'no'] for stage in STAGES]
    print(table_writing(['stage', 'configured'], rows,
                        title='{} (d={})'.format(sc.name, sc.dim)))
    return EXIT_OK


def _catalog(opt):
    if not opt.run:
        print(table_writing(['scenario', 'description'], list_builtins(), title='built-ins'))
        return EXIT_OK
    results = run_catalog(opt.out, seed=opt.seed, progress=not opt.quiet, formats=opt.formats)
    rows = []
    for name, code, report in results:
        rows.append([name, code, len(report.failures) if report else '-',
                     len(report.errors) if report else '-'])
    print(table_writing(['scenario', 'exit code', 'failures', 'errors'], rows, title='catalog'))
    return worst_code([code for _, code, _ in results])


def _scenario(opt, root):
    report = run_scenario(resolve_config(opt.config), stages=opt.stages, seed=opt.seed,
                          progress=not opt.quiet)
    for stage in STAGES:
        if stage in report.timings:
            root.stageInfo(stage, report.stages[stage].get('status', '-'),
                             report.timings[stage])
    print(report.summary_table())
    for note in report.notes:
        print('note: {}'.format(note))
    code = report.exit_code
    if opt.out is not None:
        try:
            emit_report(report, report_dir(opt.out, report.name), opt.formats)
        except ReportError as exc:
            logger.error('%s', exc)
            code = max(code, EXIT_STAGE_ERROR)
    return code


def main(argv=None):
    opt = parse_args(argv)
    root = setup_logger(opt.out, quiet=opt.quiet)
    try:
        unknown = [f for f in opt.formats if f not in FORMATS]
        if unknown:
            raise ConfigError('--format', 'unknown report format {!r}'.format(unknown[0]))
        if opt.command != 'catalog' and opt.config is None:
            raise ConfigError('--config', 'required for {}'.format(opt.command))
        try:
            init_threads(opt)
        except ValueError as exc:
            raise ConfigError('--threads', str(exc))
        if opt.command == 'validate':
            return _validate(opt)
        if opt.command == 'catalog':
            return _catalog(opt)
        return _scenario(opt, root)
    except ConfigError as exc:
        logger.error('config error: %s', exc)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
