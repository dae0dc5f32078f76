import json

import pytest
import yaml

from sdelab.cli import main
from sdelab.opt import COMMAND_STAGES, parse_args
from sdelab.scenarios import EXIT_CONFIG, EXIT_FAILED, EXIT_OK

SCENARIO = {
    'NAME': 'cli_ou',
    'DIM': 2,
    'COEFFICIENTS': {'A': [['1', '0'], ['1']], 'H': ['-x1', '-x2'], 'PROBE_POINTS': 50},
    'CRITERIA': [{'NAME': 'drift', 'TYPE': 'ERGODIC_DRIFT', 'M': 0.5}],
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / 'cli_ou.yaml'
    path.write_text(yaml.safe_dump(SCENARIO))
    return str(path)


def test_parse_args():
    opt = parse_args(['check', '--config', 'x.yaml', '--format', 'json', '--threads', '2'])
    assert opt.command == 'check'
    assert opt.formats == ('json',)
    assert opt.stages == COMMAND_STAGES['check']
    assert parse_args(['run', '--cfg', 'x.yaml']).stages is None
    with pytest.raises(SystemExit):
        parse_args(['explode'])


def test_validate_builtin(capsys):
    assert main(['validate', '--config', 'planar_bm', '--quiet']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'planar_bm' in out and 'criteria' in out


def test_catalog_listing(capsys):
    assert main(['catalog', '--quiet']) == EXIT_OK
    assert 'superlinear_blowup' in capsys.readouterr().out


@pytest.mark.parametrize('argv', [
    ['validate', '--quiet'],
    ['run', '--config', 'no_such_scenario', '--quiet'],
    ['validate', '--config', 'planar_bm', '--threads', '0', '--quiet'],
    ['validate', '--config', 'planar_bm', '--format', 'xml', '--quiet'],
])
def test_config_errors_exit_with_code_4(argv):
    assert main(argv) == EXIT_CONFIG


def test_check_writes_a_report(scenario_file, tmp_path, capsys):
    out = tmp_path / 'out'
    assert main(['check', '--config', scenario_file, '--out', str(out), '--quiet']) == EXIT_OK
    with open(str(out / 'report.json')) as f:
        report = json.load(f)
    assert report['exit_code'] == EXIT_OK
    assert report['stages']['criteria']['criteria'][0]['name'] == 'drift'
    assert (out / 'verdicts.json').exists()
    assert (out / 'sdelab.log').exists()
    assert 'cli_ou' in capsys.readouterr().out


def test_failed_expectation_exits_with_code_2(tmp_path):
    cfg = dict(SCENARIO, CRITERIA=[{'TYPE': 'ERGODIC_DRIFT', 'M': 2.0}])
    path = tmp_path / 'failing.yaml'
    path.write_text(yaml.safe_dump(cfg))
    assert main(['check', '--config', str(path), '--quiet']) == EXIT_FAILED
