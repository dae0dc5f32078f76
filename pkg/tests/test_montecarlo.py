import math

import numpy as np
import pytest

from sdelab.calculus import DensityField, build_coefficient_set
from sdelab.montecarlo import (ALIVE, EXITED, NormalStream, SimulationConfig, check_normalizable,
                               ergodic_average, exit_probability_bound, exit_statistics,
                               krylov_functional, moment_curve, simulate_ensemble,
                               step_refinement, transition_histogram)
from sdelab.utils.env import set_threads
from sdelab.utils.errors import (ConfigError, ErgodicError, NotNormalizableError,
                                 SimulationError)


@pytest.fixture
def cubic():
    """Radial drift ‖x‖²x: the deterministic part explodes in finite time."""
    return build_coefficient_set([['1', '0'], ['1']], G=['norm2(x)*x1', 'norm2(x)*x2'],
                                 probe_points=50)


def test_config_validation():
    cfg = SimulationConfig(dt=0.1, horizon=1.0, paths=4)
    assert cfg.n_steps == 10
    assert cfg.record_every == 1
    assert SimulationConfig(dt=0.1, horizon=1.0, paths=1, record_every=3).record_steps == \
        [0, 3, 6, 9, 10]
    for kwargs in ({'dt': 0.0}, {'horizon': 0.01}, {'paths': 0}, {'radii': [2.0, 1.0]},
                   {'radii': []}, {'clip': -1.0}, {'scheme': 'milstein'},
                   {'noise_substeps': 0}):
        args = dict(dt=0.1, horizon=1.0, paths=4)
        args.update(kwargs)
        with pytest.raises(SimulationError):
            SimulationConfig(**args)


def test_config_replace_rederives_the_stride():
    cfg = SimulationConfig(dt=0.001, horizon=1.0, paths=4)
    assert cfg.record_every == 5
    finer = cfg.replace(dt=0.0005)
    assert finer.record_every == 10
    assert finer.paths == 4
    assert cfg.replace(seed=3).record_every == 5


def test_config_from_block():
    cfg = SimulationConfig.from_cfg({'DT': 0.01, 'HORIZON': 1.0, 'PATHS': 10, 'SEED': 3,
                                     'RADII': [5, 10]})
    assert cfg.seed == 3 and cfg.radii == [5.0, 10.0]
    assert SimulationConfig.from_cfg({'DT': 0.01, 'HORIZON': 1.0, 'PATHS': 10}, seed=9).seed == 9
    with pytest.raises(ConfigError):
        SimulationConfig.from_cfg({'DT': 0.01, 'PATHS': 10})
    with pytest.raises(ConfigError) as info:
        SimulationConfig.from_cfg({'DT': 0.01, 'HORIZON': 1.0, 'PATHS': 10, 'RADII': [3, 2]})
    assert info.value.path == 'SIMULATION'


def test_normal_stream_is_keyed_by_path():
    block = NormalStream(7, [0, 1, 2], 2).block(5)
    assert block.shape == (3, 5, 2)
    np.testing.assert_array_equal(NormalStream(7, [1], 2).block(5)[0], block[1])
    assert not np.array_equal(NormalStream(8, [1], 2).block(5)[0], block[1])
    stream = NormalStream(7, [2], 2)
    head = stream.block(2)
    tail = stream.block(3)
    np.testing.assert_array_equal(np.concatenate([head, tail], axis=1)[0], block[2])


def test_normal_stream_substeps_share_increments():
    fine = NormalStream(11, [0], 2).block(6)[0]
    coarse = NormalStream(11, [0], 2, substeps=2).block(3)[0]
    np.testing.assert_allclose(coarse, (fine[0::2] + fine[1::2]) / math.sqrt(2.0))


def test_normal_stream_statistics():
    xi = NormalStream(0, range(10), 2).block(1000).reshape(-1)
    assert abs(xi.mean()) < 0.05
    assert xi.std() == pytest.approx(1.0, abs=0.05)


def test_ensemble_is_deterministic_and_chunk_independent(brownian):
    cfg = SimulationConfig(dt=0.01, horizon=0.5, paths=64, seed=5, chunk_size=16)
    a = simulate_ensemble(brownian, [0.0, 0.0], cfg)
    b = simulate_ensemble(brownian, [0.0, 0.0], cfg.replace(chunk_size=64))
    np.testing.assert_allclose(a.snapshots, b.snapshots, rtol=1e-12, atol=1e-14)
    set_threads(4)
    c = simulate_ensemble(brownian, [0.0, 0.0], cfg)
    np.testing.assert_allclose(a.snapshots, c.snapshots, rtol=1e-12, atol=1e-14)
    assert a.status_counts() == c.status_counts()


def test_brownian_second_moment(brownian):
    cfg = SimulationConfig(dt=0.01, horizon=1.0, paths=4000, seed=1, radii=[100.0])
    ens = simulate_ensemble(brownian, [0.0, 0.0], cfg)
    curve = moment_curve(ens, 'norm2(x)', [0.5, 1.0])
    for row in curve.rows:
        # E‖W_t‖² = 2t in the plane
        assert abs(row['estimate'] - 2.0 * row['t']) < 4.0 * row['stderr']
        assert row['bound'] is None
    bounded = moment_curve(ens, 'norm2(x) + 1', [1.0], M=2.0)
    assert bounded.within_bound
    assert bounded.rows[0]['bound'] == pytest.approx(math.exp(2.0))
    assert len(list(curve.csv_rows())) == 2


def test_ornstein_uhlenbeck_needs_no_clipping(ou):
    cfg = SimulationConfig(dt=0.01, horizon=1.0, paths=100, seed=2, radii=[10.0])
    ens = simulate_ensemble(ou, [1.0, 1.0], cfg)
    assert int(ens.clip_counts.sum()) == 0
    assert ens.status_counts()[ALIVE] == 100
    assert not ens.notes
    rows = list(ens.csv_rows())
    assert len(rows) == 100 and len(rows[0]) == len(ens.csv_header())
    assert ens.summary()['clip_events'] == 0


def test_explosive_drift_leaves_every_ball(cubic):
    cfg = SimulationConfig(dt=0.001, horizon=1.0, paths=200, seed=4, radii=[2.0, 5.0, 10.0])
    ens = simulate_ensemble(cubic, [1.5, 0.0], cfg)
    exited = ens.status == EXITED
    assert exited.mean() >= 0.9
    assert np.all(np.linalg.norm(ens.terminal[exited], axis=-1) >= 10.0)
    assert np.all(ens.overshoot[exited] >= 0.0)
    sigma = ens.exit_times[exited]
    assert np.all(np.diff(sigma, axis=1) >= 0.0)
    stats = exit_statistics(ens)
    counts = [row['exited'] for row in stats.rows]
    assert counts == sorted(counts, reverse=True)
    last = stats.rows[-1]
    assert last['ci_low'] <= last['probability'] <= last['ci_high']
    with pytest.raises(SimulationError):
        exit_statistics(ens, radii=[3.0])


def test_exit_statistics_against_a_bound(brownian):
    cfg = SimulationConfig(dt=0.01, horizon=1.0, paths=200, seed=6, radii=[3.0, 6.0])
    ens = simulate_ensemble(brownian, [0.0, 0.0], cfg)
    bounds = {r: exit_probability_bound('norm2(x) + 1', [0.0, 0.0], 2.0, 1.0, r)
              for r in cfg.radii}
    stats = exit_statistics(ens, bounds=bounds)
    assert stats.within_bound
    assert stats.to_dict()['horizon'] == 1.0


def test_exit_probability_bound():
    # e^{Mt} φ(x₀) / inf_{‖x‖=n} φ with φ = ‖x‖² + 1
    value = exit_probability_bound('norm2(x) + 1', [0.0, 0.0], 2.0, 1.0, 3.0)
    assert value == pytest.approx(math.exp(2.0) / 10.0, rel=1e-9)
    with pytest.raises(SimulationError):
        exit_probability_bound('-1', [0.0, 0.0], 1.0, 1.0, 2.0)


def test_simulation_input_errors(brownian):
    cfg = SimulationConfig(dt=0.1, horizon=1.0, paths=2, radii=[1.0])
    with pytest.raises(SimulationError):
        simulate_ensemble(brownian, [0.0, 0.0, 0.0], cfg)
    with pytest.raises(SimulationError):
        simulate_ensemble(brownian, [2.0, 0.0], cfg)
    line = build_coefficient_set([['1']], H=['0'], allow_one_dim=True, probe_points=10)
    with pytest.raises(SimulationError):
        simulate_ensemble(line, [0.0], cfg)


def test_step_refinement_on_shared_increments(brownian):
    cfg = SimulationConfig(dt=0.02, horizon=1.0, paths=200, seed=8, radii=[100.0])
    report = step_refinement(brownian, [0.0, 0.0], cfg, 'norm2(x)', [0.5, 1.0])
    assert report.consistent
    for row in report.rows:
        # Brownian paths coincide at common times
        assert row['fine'] == pytest.approx(row['coarse'], rel=1e-9)


def test_ergodic_average_of_ornstein_uhlenbeck(ou):
    cfg = SimulationConfig(dt=0.01, horizon=20.0, paths=50, seed=3, radii=[50.0])
    ens = simulate_ensemble(ou, [0.0, 0.0], cfg, functionals={'r2': 'norm2(x)'})
    curve = ergodic_average(ens, 'r2', burn_in=2.0)
    # ∫‖x‖² e^{-‖x‖²} dx / ∫ e^{-‖x‖²} dx = 1
    assert curve.terminal.estimate == pytest.approx(1.0, abs=0.2)
    assert curve.per_path.shape[0] == 50
    with pytest.raises(ErgodicError):
        ergodic_average(ens, 'missing')


def test_late_exit_is_averaged_up_to_its_exit_time(ou):
    cfg = SimulationConfig(dt=0.01, horizon=5.0, paths=6, seed=4, radii=[50.0])
    ens = simulate_ensemble(ou, [0.0, 0.0], cfg, functionals={'one': '1'})
    assert np.all(ens.status == ALIVE)
    # path 0 leaves the largest ball at t = 3 and its running integral freezes there
    ens.exit_times[0, -1] = 3.0
    ens.status[0] = EXITED
    ones = ens.integrals['one']
    ones[0] = np.minimum(ones[0], ones[0, ens.time_index(3.0)])
    curve = ergodic_average(ens, 'one', burn_in=1.0)
    np.testing.assert_allclose(curve.per_path, 1.0, rtol=1e-9)
    np.testing.assert_allclose(curve.mean, 1.0, rtol=1e-9)
    assert curve.terminal.estimate == pytest.approx(1.0, rel=1e-9)
    assert curve.converged
    assert curve.exited == 1
    assert curve.to_dict()['exited'] == 1 and curve.notes


def test_krylov_functional_of_a_constant(brownian, gauss):
    cfg = SimulationConfig(dt=0.01, horizon=1.0, paths=20, seed=0, radii=[100.0])
    result = krylov_functional(brownian, '1', 1.0, [[0.0, 0.0], [1.0, 0.0]], cfg, rho=gauss,
                               refine=2)
    assert result.sup == pytest.approx(1.0, rel=1e-9)
    assert not result.flagged
    assert result.lq_norm == pytest.approx(math.sqrt(math.pi), rel=1e-6)
    assert 'bound_shape' in result.to_dict()


def test_transition_law_of_ornstein_uhlenbeck(ou, gauss):
    cfg = SimulationConfig(dt=0.01, horizon=3.0, paths=2000, seed=12, radii=[20.0])
    report = transition_histogram(ou, [0.0, 0.0], 3.0, cfg, rho_ref=gauss)
    assert report.normalizable
    assert len(report.ks) == 2
    for mean in report.mean:
        assert abs(mean.estimate) < 4.0 * mean.stderr
    assert all(row['distance'] < 0.1 for row in report.ks)


def test_lebesgue_reference_is_not_normalizable(ou, gauss, lebesgue):
    assert check_normalizable(gauss)
    assert not check_normalizable(lebesgue)
    cfg = SimulationConfig(dt=0.05, horizon=0.5, paths=20, seed=0)
    with pytest.raises(NotNormalizableError) as info:
        transition_histogram(ou, [0.0, 0.0], 0.5, cfg, rho_ref=lebesgue)
    assert info.value.report is not None
    assert info.value.report.normalizable is False
    grid = DensityField.from_grid([np.linspace(-2, 2, 11)] * 2, np.ones((11, 11)))
    assert check_normalizable(grid)
