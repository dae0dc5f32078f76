import copy
import json
import os

import pytest

from sdelab.dsl import parse_expr, eval_expr
from sdelab.scenarios import (BUILTINS, EXIT_FAILED, EXIT_OK, EXIT_STAGE_ERROR, STAGES,
                              bump_centers, bump_train, builtin_path, density_source,
                              emit_report, list_builtins, load_scenario, requested_stages,
                              resolve_config, run_scenario, worst_code)
from sdelab.utils.errors import ConfigError, ReportError

OU = {
    'NAME': 'mini_ou',
    'DIM': 2,
    'COEFFICIENTS': {'A': [['1', '0'], ['1']], 'H': ['-x1', '-x2'], 'PROBE_POINTS': 50},
    'DENSITIES': ['exp(-norm2(x))',
                  {'NAME': 'flat', 'EXPR': '1', 'EXPECT_INVARIANT': False}],
    'CRITERIA': [{'TYPE': 'ERGODIC_DRIFT', 'VARIANT': 'log', 'M': 0.5}],
}

BM = {
    'NAME': 'mini_bm',
    'DIM': 2,
    'COEFFICIENTS': {'A': [['1', '0'], ['1']], 'H': ['0', '0'], 'PROBE_POINTS': 50},
    'SIMULATION': {'X0': [0.0, 0.0], 'DT': 0.01, 'HORIZON': 1.0, 'PATHS': 400, 'SEED': 3,
                   'RADII': [10.0],
                   'MOMENTS': [{'LABEL': 'r2', 'PHI': 'norm2(x)', 'TIMES': [0.5, 1.0]}]},
    'COMPARISONS': [
        {'NAME': 'second_moment', 'QUANTITY': 'moment', 'LABEL': 'r2', 'TIME': 1.0,
         'TARGET': 2.0, 'SE': 4.0},
        {'NAME': 'no_krylov', 'QUANTITY': 'krylov', 'TARGET': 1.0, 'REL': 0.1},
    ],
}


def with_changes(base, **changes):
    cfg = copy.deepcopy(base)
    cfg.update(changes)
    return cfg


@pytest.mark.parametrize('name', BUILTINS)
def test_builtin_scenarios_load(name):
    sc = load_scenario(resolve_config(name))
    assert sc.name == name
    assert requested_stages(sc)


def test_builtin_listing():
    listed = list_builtins()
    assert [name for name, _ in listed] == list(BUILTINS)
    assert all(description for _, description in listed)
    with pytest.raises(ConfigError):
        resolve_config('no_such_scenario')
    assert resolve_config(builtin_path('ou_2d')) == builtin_path('ou_2d')


def test_catalog_holds_every_named_scenario():
    assert set(BUILTINS) == {
        'planar_bm', 'ou_2d', 'example_3_8', 'remark_2_1_12_i', 'remark_2_1_12_ii',
        'example_3_2_1_4_ii', 'corollary_3_1_3_demo', 'superlinear_blowup'}
    for name in BUILTINS:
        assert os.path.isfile(builtin_path(name))


def test_example_3_8_has_two_invariant_densities():
    report = run_scenario(resolve_config('example_3_8'), stages=('density',))
    block = report.stages['density']
    assert block['status'] == 'ok'
    assert [d['name'] for d in block['densities']] == ['rho1', 'rho_exp']
    for entry in block['densities']:
        assert entry['invariant'] is True
        assert entry['invariance']['max_residual'] <= 1e-8 * max(entry['invariance']['scale'], 1.0)
        assert entry['divergence']['max_residual'] <= 1e-8
    assert any('not unique' in note for note in block['notes'])


@pytest.mark.parametrize('changes, path', [
    ({'FOO': 1}, 'FOO'),
    ({'NAME': None}, 'NAME'),
    ({'COEFFICIENTS': {'A': [['1', '0'], ['1']], 'H': ['0', '0'], 'G': ['0', '0']}},
     'COEFFICIENTS'),
    ({'COEFFICIENTS': {'A': [['1', '0'], ['1']], 'H': ['x1 +', '0']}}, 'COEFFICIENTS'),
    ({'CRITERIA': [{'TYPE': 'NOPE'}]}, 'CRITERIA[0].TYPE'),
    ({'CRITERIA': [{'TYPE': 'LYAPUNOV_L', 'EXPECT': 'maybe'}]}, 'CRITERIA[0].EXPECT'),
    ({'CRITERIA': [{'TYPE': 'LYAPUNOV_L', 'DENSITY': 'rho9'}]}, 'CRITERIA[0].DENSITY'),
    ({'CRITERIA': [{'TYPE': 'LYAPUNOV_L'}, {'TYPE': 'LYAPUNOV_L'}]}, 'CRITERIA[1].NAME'),
    ({'DENSITIES': ['1', {'NAME': 'rho1', 'EXPR': '2'}]}, 'DENSITIES[1].NAME'),
    ({'DENSITY': {'R': 2.0, 'N': 8, 'CONVERGENCE_LEVELS': 1, 'ORACLE': '1'}},
     'DENSITY.CONVERGENCE_LEVELS'),
    ({'DENSITY': {'R': 2.0, 'N': 8, 'CONVERGENCE_N': 5}}, 'DENSITY.CONVERGENCE_N'),
    ({'DENSITIES': [{'EXPR': '1', 'BUMPS': 'cosine'}]}, 'DENSITIES[0].BUMPS'),
    ({'COMPARISONS': [{'QUANTITY': 'ergodic_mean', 'TARGET': 1.0}]}, 'COMPARISONS[0]'),
])
def test_config_errors_name_the_field(changes, path):
    with pytest.raises(ConfigError) as info:
        load_scenario(with_changes(OU, **changes))
    assert info.value.path == path


def test_simulation_block_errors():
    bad = copy.deepcopy(BM)
    bad['SIMULATION']['X0'] = [0.0]
    with pytest.raises(ConfigError) as info:
        load_scenario(bad)
    assert info.value.path == 'SIMULATION.X0'
    bad = copy.deepcopy(BM)
    bad['COMPARISONS'][0]['LABEL'] = 'phi'
    with pytest.raises(ConfigError) as info:
        load_scenario(bad)
    assert info.value.path == 'COMPARISONS[0].LABEL'


def test_scenario_without_stages():
    cfg = {k: v for k, v in OU.items() if k in ('NAME', 'DIM', 'COEFFICIENTS')}
    report = run_scenario(cfg)
    assert report.exit_code == EXIT_OK
    assert all(report.stages[stage] == {} for stage in STAGES)
    assert report.to_dict()['exit_code'] == EXIT_OK


def test_density_and_criteria_stages():
    report = run_scenario(OU)
    assert report.exit_code == EXIT_OK
    densities = report.stages['density']['densities']
    assert densities[0]['invariant'] is True
    assert densities[1]['invariant'] is False
    assert report.stages['criteria']['criteria'][0]['verdict'] == 'holds-on-grid'
    checks = {c['name']: c['status'] for c in report.stages['comparisons']['comparisons']}
    assert checks == {'invariance:flat': 'passed', 'invariance:rho1': 'passed'}
    assert report.stages['simulation'] == {}
    assert 'mini_ou' in report.summary_table()


def test_unmet_expectation_fails_the_run():
    cfg = with_changes(OU, CRITERIA=[{'TYPE': 'ERGODIC_DRIFT', 'M': 0.5,
                                      'EXPECT': 'fails-with-witness'}])
    report = run_scenario(cfg, stages=('criteria',))
    assert report.exit_code == EXIT_FAILED
    assert report.failures
    assert report.stages['density'] == {}


def test_stage_error_keeps_later_criteria():
    cfg = with_changes(OU, CRITERIA=[
        {'TYPE': 'INVARIANCE_LYAPUNOV', 'VARIANT': 'dual'},
        {'TYPE': 'ERGODIC_DRIFT', 'M': 0.5},
    ])
    report = run_scenario(cfg, stages=('criteria',))
    assert report.exit_code == EXIT_STAGE_ERROR
    entries = report.stages['criteria']['criteria']
    assert entries[0]['error'] == 'CriterionError'
    assert entries[1]['verdict'] == 'holds-on-grid'


def test_constant_search_in_a_scenario():
    cfg = with_changes(BM, SIMULATION=None, COMPARISONS=None, CRITERIA=[
        {'TYPE': 'LYAPUNOV_L', 'SEARCH': {'NAME': 'M', 'LO': 0.0, 'HI': 4.0, 'TOL': 1e-3}}])
    report = run_scenario(cfg)
    entry = report.stages['criteria']['criteria'][0]
    assert entry['search']['direction'] == 'smallest'
    assert entry['search']['value'] == pytest.approx(2.0, abs=0.01)


def test_simulation_comparisons():
    report = run_scenario(BM, seed=5)
    assert report.seeds['override'] == 5
    assert report.seeds['simulation'] == 5
    comparisons = {c['name']: c for c in report.stages['comparisons']['comparisons']}
    assert comparisons['second_moment']['status'] == 'passed'
    assert comparisons['no_krylov']['status'] == 'skipped'
    assert {'moments', 'exits', 'ensemble'} <= set(report.tables)


def test_report_files_are_reproducible(tmp_path):
    first = emit_report(run_scenario(OU), str(tmp_path / 'a'))
    second = emit_report(run_scenario(OU), str(tmp_path / 'b'))
    names = sorted(os.path.basename(p) for p in first)
    assert names == ['report.json', 'timings.json', 'verdicts.json']
    assert sorted(os.path.basename(p) for p in second) == names
    for name in ('report.json', 'verdicts.json'):
        with open(str(tmp_path / 'a' / name), 'rb') as fa, \
                open(str(tmp_path / 'b' / name), 'rb') as fb:
            assert fa.read() == fb.read()
    with open(str(tmp_path / 'a' / 'report.json')) as f:
        assert json.load(f)['name'] == 'mini_ou'


def test_convergence_ladder_and_order_comparison():
    cfg = {k: v for k, v in OU.items() if k in ('NAME', 'DIM', 'COEFFICIENTS')}
    cfg['DENSITY'] = {'R': 3.0, 'N': 48, 'BOUNDARY': 'exp(-norm2(x))',
                      'ORACLE': 'exp(-norm2(x))', 'METHOD': 'direct',
                      'CONVERGENCE_N': 24, 'CONVERGENCE_LEVELS': 2}
    cfg['COMPARISONS'] = [{'NAME': 'order', 'QUANTITY': 'convergence_order',
                           'TARGET': 2.0, 'ABS': 0.3}]
    report = run_scenario(cfg)
    convergence = report.stages['density']['solver']['convergence']
    assert convergence['n'] == [24, 48]
    entry = {c['name']: c for c in report.stages['comparisons']['comparisons']}['order']
    assert entry['value'] == pytest.approx(convergence['orders'][0])
    assert entry['status'] == 'passed'


def test_density_grid_file_carries_the_mesh(tmp_path):
    cfg = {k: v for k, v in OU.items() if k in ('NAME', 'DIM', 'COEFFICIENTS')}
    cfg['DENSITY'] = {'R': 2.0, 'N': 8, 'BOUNDARY': 'exp(-norm2(x))'}
    report = run_scenario(cfg)
    assert report.exit_code == EXIT_OK
    emit_report(report, str(tmp_path))
    with open(str(tmp_path / 'density_grid.csv'), newline='') as f:
        lines = f.read().splitlines()
    assert lines[0] == 'R,n,d,index,x1,x2,value'
    assert len(lines) == 1 + 9 * 9
    for line in lines[1:]:
        assert line.startswith('2.0,8,2,')
    assert [int(line.split(',')[3]) for line in lines[1:]] == list(range(81))


def test_report_output_errors(tmp_path):
    report = run_scenario({k: v for k, v in OU.items() if k != 'CRITERIA'}, stages=())
    blocker = tmp_path / 'blocker'
    blocker.write_text('')
    with pytest.raises(ReportError):
        emit_report(report, str(blocker))
    with pytest.raises(ReportError):
        emit_report(report, str(tmp_path / 'out'), formats=('xml',))


def test_worst_code():
    assert worst_code([EXIT_OK, EXIT_FAILED, EXIT_STAGE_ERROR]) == EXIT_STAGE_ERROR
    assert worst_code([]) == EXIT_OK


def test_bump_train_density():
    expr = parse_expr(bump_train(0.5, 2, 0.4, 2.0), 2)
    assert eval_expr(expr, [1.0, 0.0]) == pytest.approx(1.0)
    # inside the first bump: min(0.2^0.5, 2 (0.4 - 0.2)) = 0.4
    assert eval_expr(expr, [1.2, 0.0]) == pytest.approx(1.4)
    assert eval_expr(expr, [10.0, 10.0]) == pytest.approx(1.0)
    assert bump_centers(2) == [(1.0, 0.0), (2.0, 0.0)]
    with pytest.raises(ValueError):
        bump_train(0.0, 2, 0.4, 2.0)


def test_density_source():
    assert density_source(2, 2, 'X') == ('2.0', [])
    text, points = density_source({'TYPE': 'BUMP_TRAIN', 'COUNT': 3}, 2, 'X')
    assert points == bump_centers(3)
    assert text == bump_train(0.5, 3, 0.4, 2.0)
    with pytest.raises(ConfigError):
        density_source({'TYPE': 'NOPE'}, 2, 'X')
    with pytest.raises(ConfigError):
        density_source({'TYPE': 'BUMP_TRAIN', 'WIDTH': -1.0}, 2, 'X')
    with pytest.raises(ConfigError):
        density_source(['1'], 2, 'X')
