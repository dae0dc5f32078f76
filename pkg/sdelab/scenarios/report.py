import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..utils.config import SCHEMA_VERSION
from ..utils.errors import ReportError
from ..utils.logger import csv_writing, json_writing, table_writing

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 2
EXIT_STAGE_ERROR = 3
EXIT_CONFIG = 4

FORMATS = ('json', 'csv')


@dataclass
class Report:
    """Everything one scenario run produced.

    ``stages`` keeps one block per stage ({} when the stage was not requested);
    ``tables`` holds the CSV tables as (header, rows). Wall-clock timings and
    the thread budget are kept apart so that the JSON report only depends on
    the scenario, the version and the seeds.
    """
    name: str
    version: str
    scenario: dict
    seeds: dict
    stages: Dict[str, dict] = field(default_factory=dict)
    errors: List[dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    tables: Dict[str, tuple] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    threads: int = 1

    @property
    def exit_code(self):
        if self.errors:
            return EXIT_STAGE_ERROR
        if self.failures:
            return EXIT_FAILED
        return EXIT_OK

    def add_error(self, stage, exc, label=None):
        block = {'stage': stage, 'error': type(exc).__name__, 'message': str(exc)}
        if label is not None:
            block['item'] = label
        self.errors.append(block)
        logger.error('%s%s: %s: %s', stage, '' if label is None else '[{}]'.format(label),
                     type(exc).__name__, exc)
        return block

    def verdicts(self):
        return list(self.stages.get('criteria', {}).get('criteria', []))

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'name': self.name,
            'version': self.version,
            'scenario': self.scenario,
            'seeds': self.seeds,
            'stages': self.stages,
            'errors': self.errors,
            'failures': self.failures,
            'notes': self.notes,
            'exit_code': self.exit_code,
        }

    def summary_table(self):
        """Console table of the criterion verdicts and comparisons."""
        rows = []
        for v in self.verdicts():
            rows.append([v['name'], v.get('verdict', 'error'),
                         v.get('min_margin', float('nan')),
                         'yes' if v.get('expectation_met', False) else 'no'])
        for c in self.stages.get('comparisons', {}).get('comparisons', []):
            rows.append([c['name'], c['status'], c.get('value', float('nan')),
                         'yes' if c['status'] != 'failed' else 'no'])
        return table_writing(['check', 'outcome', 'value', 'as expected'], rows,
                             title=self.name)


def emit_report(report, out_dir, formats=FORMATS):
    """Write report.json, verdicts.json, timings.json and one CSV per table.

    Identical inputs give byte-identical files except timings.json.
    """
    formats = tuple(formats)
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ReportError('unknown report format {!r}'.format(unknown[0]))
    if os.path.exists(out_dir) and not os.path.isdir(out_dir):
        raise ReportError('output path {} is not a directory'.format(out_dir))
    if os.path.isdir(out_dir) and not os.access(out_dir, os.W_OK):
        raise ReportError('output directory {} is not writable'.format(out_dir))
    written = []
    if 'json' in formats:
        path = os.path.join(out_dir, 'report.json')
        json_writing(path, report.to_dict())
        written.append(path)
        if report.stages.get('criteria'):
            path = os.path.join(out_dir, 'verdicts.json')
            json_writing(path, report.verdicts())
            written.append(path)
        path = os.path.join(out_dir, 'timings.json')
        json_writing(path, {'stages': report.timings, 'threads': report.threads})
        written.append(path)
    if 'csv' in formats:
        for name in sorted(report.tables):
            header, rows = report.tables[name]
            path = os.path.join(out_dir, '{}.csv'.format(name))
            csv_writing(path, header, rows)
            written.append(path)
    logger.info('wrote %d files to %s', len(written), out_dir)
    return written


def report_dir(out_dir, name, nested=False):
    """Output directory of one scenario; catalog runs nest one directory per scenario."""
    if out_dir is None:
        return None
    return os.path.join(out_dir, name) if nested else out_dir


def worst_code(codes: List[int], default: Optional[int] = EXIT_OK):
    return max(codes) if codes else default
