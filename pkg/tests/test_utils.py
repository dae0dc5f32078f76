import json
import os

import numpy as np
import pytest

from sdelab.utils import Registry, build_from_cfg
from sdelab.utils.config import (SCHEMA_VERSION, dump_config, get_float, get_int, get_list,
                                 load_config_dict, require, update_config)
from sdelab.utils.env import get_threads, init_threads, parallel_map
from sdelab.utils.errors import ConfigError, ReportError
from sdelab.utils.logger import csv_writing, format_float, json_writing, table_writing
from sdelab.utils.metrics import DataLogger, StageTimer, calc_trend, calc_wilson_interval


def test_update_config_reads_yaml(tmp_path):
    path = tmp_path / 'scenario.yaml'
    path.write_text('NAME: demo\nDIM: 2\nSIMULATION:\n  DT: 0.01\n')
    cfg = update_config(str(path))
    assert cfg.NAME == 'demo'
    assert cfg.SIMULATION.DT == pytest.approx(0.01)
    assert cfg.SCHEMA_VERSION == SCHEMA_VERSION


def test_update_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        update_config(str(tmp_path / 'missing.yaml'))
    bad = tmp_path / 'bad.yaml'
    bad.write_text('NAME: [unclosed\n')
    with pytest.raises(ConfigError):
        update_config(str(bad))
    listed = tmp_path / 'list.yaml'
    listed.write_text('- 1\n- 2\n')
    with pytest.raises(ConfigError):
        update_config(str(listed))
    with pytest.raises(ConfigError) as info:
        load_config_dict({'SCHEMA_VERSION': 99})
    assert info.value.path == 'SCHEMA_VERSION'


def test_dump_config_is_canonical():
    a = load_config_dict({'B': 1, 'A': {'Y': [1, 2], 'X': 'x'}})
    b = load_config_dict({'A': {'X': 'x', 'Y': [1, 2]}, 'B': 1})
    assert dump_config(a) == dump_config(b)
    assert json.loads(dump_config(a))['A']['Y'] == [1, 2]


def test_field_accessors_name_the_path():
    cfg = load_config_dict({'SIM': {'DT': '0.1', 'PATHS': 10.0, 'BAD': 'x', 'R': [1, 2]}})
    assert get_float(cfg.SIM, 'DT', 'SIM') == pytest.approx(0.1)
    assert get_int(cfg.SIM, 'PATHS', 'SIM') == 10
    assert get_list(cfg.SIM, 'R', 'SIM') == [1, 2]
    assert get_float(cfg.SIM, 'MISSING', 'SIM', default=2.5) == 2.5
    with pytest.raises(ConfigError) as info:
        require(cfg.SIM, 'HORIZON', 'SIM')
    assert info.value.path == 'SIM.HORIZON'
    with pytest.raises(ConfigError):
        get_float(cfg.SIM, 'BAD', 'SIM')
    with pytest.raises(ConfigError):
        get_float({'X': -1.0}, 'X', 'SIM', positive=True)
    with pytest.raises(ConfigError):
        get_int(cfg.SIM, 'DT', 'SIM')
    with pytest.raises(ConfigError):
        get_int(cfg.SIM, 'PATHS', 'SIM', minimum=20)
    with pytest.raises(ConfigError):
        get_list(cfg.SIM, 'DT', 'SIM')


def test_registry_and_builder():
    reg = Registry('things')

    @reg.register_module
    class Thing(object):
        ID = 'THING'

        def __init__(self, SIZE=1, DIM=2):
            self.size = SIZE
            self.dim = DIM

    assert 'THING' in reg and len(reg) == 1
    assert list(reg) == ['THING'] and reg.get('THING') is Thing
    obj = build_from_cfg({'TYPE': 'THING', 'SIZE': 3}, reg, default_args={'DIM': 5})
    assert (obj.size, obj.dim) == (3, 5)
    with pytest.raises(KeyError):
        build_from_cfg({'TYPE': 'OTHER'}, reg)
    with pytest.raises(KeyError):
        reg.register_module(Thing)


def test_format_float():
    assert format_float(0.1) == '0.1'
    assert format_float(float('nan')) == 'nan'
    assert format_float(float('-inf')) == '-inf'
    assert format_float(3) == '3'
    assert format_float(True) == 'true'
    assert format_float(None) == ''


def test_csv_and_json_writing(tmp_path):
    path = str(tmp_path / 'out' / 'table.csv')
    csv_writing(path, ['t', 'value'], [[0.5, 1.25], ['x', float('nan')]])
    with open(path, newline='') as f:
        assert f.read() == 't,value\n0.5,1.25\nx,nan\n'
    jpath = str(tmp_path / 'out' / 'r.json')
    json_writing(jpath, {'b': np.float64(1.5), 'a': [np.int64(2), np.bool_(True)],
                         'c': float('inf')})
    with open(jpath) as f:
        text = f.read()
    assert json.loads(text) == {'a': [2, True], 'b': 1.5, 'c': 'inf'}
    assert text.index('"a"') < text.index('"b"')


def test_writing_into_a_file_path_fails(tmp_path):
    blocker = tmp_path / 'blocker'
    blocker.write_text('')
    with pytest.raises(ReportError):
        json_writing(os.path.join(str(blocker), 'r.json'), {})


def test_table_writing():
    text = table_writing(['name', 'value'], [['a', 1.5]], title='demo')
    assert 'demo' in text and '1.5' in text


def test_data_logger():
    log = DataLogger()
    log.update(2.0)
    log.update([1.0, 3.0])
    assert log.cnt == 3
    assert log.avg == pytest.approx(2.0)
    assert log.std == pytest.approx(1.0)
    assert log.stderr == pytest.approx(1.0 / np.sqrt(3.0))
    log.update(4.0, n=2)
    assert log.cnt == 5
    log.clear()
    assert log.cnt == 0 and np.isnan(log.stderr)


def test_stage_timer():
    timer = StageTimer()
    assert timer.stop('never') == 0.0
    timer.start('density')
    elapsed = timer.stop('density')
    assert elapsed >= 0.0
    assert timer.records['density'] == elapsed


def test_wilson_interval_and_trend():
    low, high = calc_wilson_interval(50, 100)
    assert low < 0.5 < high
    assert all(np.isnan(calc_wilson_interval(0, 0)))
    slope, intercept, r2 = calc_trend([1, 2, 3], [2, 4, 6])
    assert slope == pytest.approx(2.0) and intercept == pytest.approx(0.0, abs=1e-12)
    assert r2 == pytest.approx(1.0)
    assert calc_trend([1, 2, 3], [5, 5, 5]) == (0.0, 5.0, 1.0)


def test_thread_budget():
    assert init_threads(2) == 2
    assert get_threads() == 2
    with pytest.raises(ValueError):
        init_threads(0)
    with pytest.raises(ValueError):
        init_threads(-2)
    assert init_threads(-1) >= 1
    assert parallel_map(lambda v: v * v, [1, 2, 3, 4], threads=3) == [1, 4, 9, 16]
