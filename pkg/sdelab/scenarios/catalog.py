"""Built-in scenarios shipped under ``sdelab/configs``."""
import logging
import os

from ..utils.config import update_config
from ..utils.errors import ConfigError, ReportError
from .pipeline import run_scenario
from .report import EXIT_CONFIG, EXIT_STAGE_ERROR, emit_report, report_dir

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')

BUILTINS = (
    'planar_bm', 'ou_2d', 'example_3_8', 'remark_2_1_12_i', 'remark_2_1_12_ii',
    'example_3_2_1_4_ii', 'corollary_3_1_3_demo', 'superlinear_blowup',
)


def builtin_path(name):
    return os.path.join(CONFIG_DIR, '{}.yaml'.format(name))


def resolve_config(name_or_path):
    """A config file path, or the path of the built-in scenario of that name."""
    if os.path.isfile(name_or_path):
        return name_or_path
    if name_or_path in BUILTINS:
        return builtin_path(name_or_path)
    raise ConfigError(name_or_path, 'neither a config file nor a built-in scenario ({})'.format(
        ', '.join(BUILTINS)))


def list_builtins():
    """(name, description) of every built-in scenario."""
    out = []
    for name in BUILTINS:
        cfg = update_config(builtin_path(name))
        out.append((name, str(cfg.get('DESCRIPTION', '')).strip().split('\n')[0]))
    return out


def run_catalog(out_dir=None, seed=None, progress=False, names=None, formats=('json', 'csv')):
    """Run built-in scenarios in order; returns [(name, exit code, report or None)]."""
    results = []
    for name in names or BUILTINS:
        try:
            report = run_scenario(builtin_path(name), seed=seed, progress=progress)
        except ConfigError as exc:
            logger.error('%s: config error: %s', name, exc)
            results.append((name, EXIT_CONFIG, None))
            continue
        code = report.exit_code
        if out_dir is not None:
            try:
                emit_report(report, report_dir(out_dir, name, nested=True), formats)
            except ReportError as exc:
                logger.error('%s: %s', name, exc)
                code = max(code, EXIT_STAGE_ERROR)
        results.append((name, code, report))
    return results
