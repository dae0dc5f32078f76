import math

import numpy as np
import pytest

from sdelab.calculus import CoefficientSet, DensityField, build_coefficient_set
from sdelab.criteria import (CATALOG_IDS, CRITERION, FAILS, HOLDS, INCONCLUSIVE, BallIndicator,
                             CriterionInputs, GaussianPrimitive, annulus_grid, build_candidate,
                             build_criterion, evaluate_criterion, evaluate_margin, interval_grid,
                             lg_formula, recurrence_candidate, search_constant)
from sdelab.criteria.grids import region_from_cfg
from sdelab.utils.errors import ConfigError, CriterionError


@pytest.fixture
def superlinear():
    return build_coefficient_set([['1', '0'], ['1']], G=['norm2(x)*x1', 'norm2(x)*x2'],
                                 probe_points=50)


@pytest.fixture
def leaky_line():
    """1-D diffusion with invariant-looking density exp(-x^2) and constant flux -2."""
    return CoefficientSet.from_density([['1']], 'exp(-x1^2)', flux=['-2'], dim=1,
                                       allow_one_dim=True, probe_radius=5.0, probe_points=50)


def test_catalog_is_registered():
    for cid in CATALOG_IDS:
        assert cid in CRITERION
    assert 'RECURRENCE_VOLUME' in CRITERION


def test_build_criterion_errors():
    with pytest.raises(CriterionError):
        build_criterion({'M': 1.0})
    with pytest.raises(CriterionError):
        build_criterion({'TYPE': 'NO_SUCH_TEST'})
    with pytest.raises(CriterionError):
        build_criterion({'TYPE': 'LYAPUNOV_L', 'BOGUS': 1})
    with pytest.raises(CriterionError):
        build_criterion({'TYPE': 'EIGENGAP_2D', 'VARIANT': 'sideways'})
    # NAME is a label, not a constructor argument
    assert build_criterion({'TYPE': 'LYAPUNOV_L', 'NAME': 'x', 'M': 2}).m == 2.0


def test_brownian_motion_is_recurrent(brownian):
    verdict = evaluate_criterion({'TYPE': 'RECURRENCE_SUPERSOLUTION', 'N0': 1.0},
                                 CriterionInputs(brownian))
    assert verdict.verdict == HOLDS
    assert verdict.min_margin == pytest.approx(0.0, abs=1e-9)
    assert verdict.to_dict()['conclusion'] == 'recurrent'


def test_recurrence_growth_and_lg_formula(brownian):
    verdict = evaluate_criterion({'TYPE': 'RECURRENCE_GROWTH'}, CriterionInputs(brownian))
    assert verdict.holds
    X = np.array([[1.0, 0.0], [0.0, 3.0]])
    np.testing.assert_allclose(lg_formula(brownian, X), [0.0, 0.0], atol=1e-12)


def test_ornstein_uhlenbeck_drift_conditions(ou):
    inputs = CriterionInputs(ou)
    assert evaluate_criterion({'TYPE': 'ERGODIC_DRIFT', 'VARIANT': 'log', 'M': 0.5},
                              inputs).holds
    assert evaluate_criterion({'TYPE': 'ERGODIC_DRIFT', 'VARIANT': 'quadratic', 'M': 1.0},
                              inputs).holds
    strong = evaluate_criterion({'TYPE': 'ERGODIC_DRIFT', 'VARIANT': 'log', 'M': 2.0}, inputs)
    assert strong.failed
    assert strong.min_margin < 0
    assert strong.witness is not None
    assert strong.margin_at(strong.witness) == pytest.approx(strong.min_margin)
    generic = evaluate_criterion({'TYPE': 'ERGODIC_DRIFT', 'VARIANT': 'generic', 'C': 0.5},
                                 inputs)
    assert generic.holds


def test_superlinear_drift_fails_growth_condition(superlinear):
    verdict = evaluate_criterion({'TYPE': 'GROWTH_NONEXPLOSION', 'M': 1.0},
                                 CriterionInputs(superlinear))
    assert verdict.verdict == FAILS
    assert math.hypot(*verdict.witness) > 1.0
    assert verdict.to_dict()['conclusion'] == ''


def test_lyapunov_condition_and_constant_search(brownian):
    inputs = CriterionInputs(brownian)
    assert evaluate_criterion({'TYPE': 'LYAPUNOV_L', 'M': 2.0}, inputs).holds
    assert evaluate_criterion({'TYPE': 'LYAPUNOV_L', 'M': 1.0}, inputs).failed
    found = search_constant({'TYPE': 'LYAPUNOV_L'}, inputs, 'M', 0.0, 4.0, tol=1e-4)
    assert found.direction == 'smallest'
    assert found.value == pytest.approx(2.0, abs=1e-3)
    assert found.verdict.holds
    assert found.to_dict()['name'] == 'M'


def test_constant_search_needs_a_bracket(brownian):
    inputs = CriterionInputs(brownian)
    with pytest.raises(CriterionError):
        search_constant({'TYPE': 'LYAPUNOV_L'}, inputs, 'M', 3.0, 4.0)
    with pytest.raises(CriterionError):
        search_constant({'TYPE': 'LYAPUNOV_L'}, inputs, 'M', 0.0, 1.0)
    with pytest.raises(CriterionError):
        search_constant({'TYPE': 'LYAPUNOV_L'}, inputs, 'M', 4.0, 0.0)


def test_eigengap_needs_two_dimensions():
    cs = build_coefficient_set([['1', '0', '0'], ['1', '0'], ['1']], H=['0', '0', '0'],
                               probe_points=20)
    with pytest.raises(CriterionError):
        evaluate_criterion({'TYPE': 'EIGENGAP_2D'}, CriterionInputs(cs))


def test_eigengap_variants():
    cs = build_coefficient_set([['1 + x2^2/(1+norm2(x))', '0'], ['1']], G=['-x1', '-x2'],
                               probe_points=50)
    inputs = CriterionInputs(cs)
    for variant, m in (('recurrence', 0.0), ('ergodic', 0.5), ('nonexplosion', 0.0)):
        verdict = evaluate_criterion({'TYPE': 'EIGENGAP_2D', 'VARIANT': variant, 'M': m},
                                     inputs)
        assert verdict.holds, variant


def test_density_inputs_are_checked(ou, gauss):
    with pytest.raises(CriterionError):
        evaluate_criterion({'TYPE': 'INVARIANCE_LYAPUNOV', 'VARIANT': 'dual'},
                           CriterionInputs(ou))
    rho3 = DensityField.analytic('1', 3)
    with pytest.raises(CriterionError):
        evaluate_criterion({'TYPE': 'LYAPUNOV_L'}, CriterionInputs(ou, rho3))
    with pytest.raises(CriterionError):
        evaluate_criterion({'TYPE': 'LYAPUNOV_L'}, None)


def test_shear_flow_dual_lyapunov():
    cs = build_coefficient_set([['1', '0'], ['1']], G=['1', '0'], probe_points=20)
    for density in ('1', 'exp(2*x1)'):
        rho = DensityField.analytic(density, 2)
        verdict = evaluate_criterion({'TYPE': 'INVARIANCE_LYAPUNOV', 'VARIANT': 'dual',
                                      'ALPHA': 3.0}, CriterionInputs(cs, rho))
        assert verdict.holds, density


def test_log_growth_and_linear_growth(ou, gauss):
    assert evaluate_criterion({'TYPE': 'INVARIANCE_LOG_GROWTH', 'VARIANT': 'dual', 'M': 1.0},
                              CriterionInputs(ou, gauss)).holds
    assert evaluate_criterion({'TYPE': 'LINEAR_GROWTH_MOMENT', 'VARIANT': 'joint', 'M': 1.0},
                              CriterionInputs(ou)).holds


def test_non_invariance_of_leaky_line(leaky_line):
    rho = DensityField.analytic('exp(-x1^2)', 1)
    cfg = {'TYPE': 'NON_INVARIANCE', 'MODE': 'L_adjoint', 'ALPHA': 1.0 / math.sqrt(math.pi),
           'CANDIDATE': {'TYPE': 'GaussianPrimitive'},
           'REGION': {'TYPE': 'interval', 'LOW': -10.0, 'HIGH': 10.0, 'N': 10000}}
    verdict = evaluate_criterion(cfg, CriterionInputs(leaky_line, rho))
    assert verdict.holds
    assert verdict.min_margin > 0.1
    assert any(n.startswith('sup u on grid') for n in verdict.notes)
    cfg['ALPHA'] = 1.0
    assert evaluate_criterion(cfg, CriterionInputs(leaky_line, rho)).failed


def test_non_invariance_on_the_half_line():
    cs = build_coefficient_set([['x1^2']], G=['0.5*x1^2'], allow_one_dim=True, probe_points=50)
    cfg = {'TYPE': 'NON_INVARIANCE', 'MODE': 'L', 'ALPHA': 0.25,
           'CANDIDATE': 'max(x1^2*(6-x1), 54-81/x1)',
           'REGION': {'TYPE': 'interval', 'LOW': 0.0, 'HIGH': 50.0, 'N': 10000,
                      'OPEN_LOW': True}}
    verdict = evaluate_criterion(cfg, CriterionInputs(cs))
    assert verdict.holds
    assert verdict.min_margin >= 0.0


def test_non_invariance_rejects_a_vanishing_candidate():
    cs = build_coefficient_set([['1']], H=['0'], allow_one_dim=True, probe_points=10)
    cfg = {'TYPE': 'NON_INVARIANCE', 'MODE': 'L', 'ALPHA': 1.0, 'CANDIDATE': '0',
           'REGION': {'TYPE': 'interval', 'LOW': -1.0, 'HIGH': 1.0, 'N': 11}}
    verdict = evaluate_criterion(cfg, CriterionInputs(cs))
    assert verdict.verdict == INCONCLUSIVE


def test_integrable_coefficients(ou, gauss, brownian, lebesgue):
    verdict = evaluate_criterion({'TYPE': 'INTEGRABLE_COEFFS'}, CriterionInputs(ou, gauss))
    assert verdict.holds
    assert verdict.trend_table
    divergent = evaluate_criterion({'TYPE': 'INTEGRABLE_COEFFS'},
                                   CriterionInputs(brownian, lebesgue))
    assert divergent.verdict == INCONCLUSIVE


def test_volume_recurrence_test(brownian, lebesgue):
    verdict = evaluate_criterion({'TYPE': 'RECURRENCE_VOLUME', 'N_MAX': 100.0},
                                 CriterionInputs(brownian, lebesgue))
    assert verdict.holds
    # a_n = ln(n)/π for planar Brownian motion
    assert verdict.trend_table[-1]['a_n'] == pytest.approx(math.log(100.0) / math.pi, rel=1e-6)
    with pytest.raises(CriterionError):
        evaluate_criterion({'TYPE': 'RECURRENCE_VOLUME', 'N_MAX': 50.0},
                           CriterionInputs(brownian, lebesgue))


def test_volume_recurrence_is_inconclusive_in_three_dimensions():
    cs = build_coefficient_set([['1', '0', '0'], ['1', '0'], ['1']], H=['0', '0', '0'],
                               probe_points=20)
    rho = DensityField.analytic('1', 3)
    verdict = evaluate_criterion({'TYPE': 'RECURRENCE_VOLUME', 'N_MAX': 100.0,
                                  'PER_DECADE': 10}, CriterionInputs(cs, rho))
    assert verdict.verdict == INCONCLUSIVE
    assert 'extrapolated_limit' in verdict.constants


def test_volume_conservative(ou, gauss):
    verdict = evaluate_criterion({'TYPE': 'VOLUME_CONSERVATIVE', 'M': 1.0, 'C': 1.0},
                                 CriterionInputs(ou, gauss))
    assert verdict.holds
    assert all(row['ok'] for row in verdict.trend_table)


def test_margin_evaluation():
    points = np.linspace(0.0, 2.0, 5)[:, None]

    def terms(X):
        return [X[:, 0]], [np.ones(X.shape[0])]

    le = evaluate_margin(points, terms, 'le')
    assert le.min_margin == pytest.approx(-1.0)
    assert le.witness == (2.0,)
    assert not le.nonnegative
    ge = evaluate_margin(points, terms, 'ge')
    assert ge.min_margin == pytest.approx(-1.0)
    assert ge.witness == (0.0,)
    with pytest.raises(ValueError):
        evaluate_margin(points, terms, 'lt')


def test_margin_tolerates_rounding():
    points = np.zeros((3, 1))

    def terms(X):
        big = np.full(X.shape[0], 1e6)
        return [big + 1e-6], [big]

    assert evaluate_margin(points, terms).nonnegative


def test_undefined_points_are_skipped():
    points = np.array([[-1.0], [1.0], [4.0]])

    def terms(X):
        return [np.sqrt(X[:, 0])], [np.full(X.shape[0], 3.0)]

    result = evaluate_margin(points, terms)
    assert result.skipped == 1
    assert result.min_margin == pytest.approx(1.0)
    assert result.witness == (4.0,)


def test_grids():
    grid = annulus_grid(2, 0.0, 1.0, n_radial=5, n_angular=8)
    assert len(grid) == 1 + 4 * 8
    np.testing.assert_allclose(grid.points[0], [0.0, 0.0])
    line = interval_grid(0.0, 1.0, 4, open_low=True)
    np.testing.assert_allclose(line.points[:, 0], [0.25, 0.5, 0.75, 1.0])
    box = region_from_cfg({'TYPE': 'box', 'LOWER': [0, 0], 'UPPER': [1, 1], 'N': 3}, 2)
    assert len(box) == 9
    with pytest.raises(ConfigError):
        region_from_cfg({'TYPE': 'interval', 'LOW': 0, 'HIGH': 1}, 2)
    with pytest.raises(ConfigError):
        region_from_cfg({'TYPE': 'disc'}, 2)
    with pytest.raises(ConfigError):
        region_from_cfg({'TYPE': 'annulus', 'R_MIN': 2.0, 'R_MAX': 1.0}, 2)


def test_candidates():
    h = GaussianPrimitive(DIM=1)
    X = np.array([[0.0], [1.0]])
    np.testing.assert_allclose(h.value(X), [math.sqrt(math.pi) / 2,
                                            math.sqrt(math.pi) / 2 * (1 + math.erf(1.0))])
    np.testing.assert_allclose(h.gradient(X)[:, 0], np.exp(-X[:, 0] ** 2))
    ball = BallIndicator(DIM=2, RADIUS=1.0, POWER=-0.5)
    np.testing.assert_allclose(ball.value(np.array([[0.25, 0.0], [2.0, 0.0]])), [2.0, 0.0])
    g = recurrence_candidate(2.0, 2)
    np.testing.assert_allclose(g.value(np.array([[0.0, 0.0], [3.0, 0.0]])),
                               [math.log(4.0) + 2, math.log(9.0) + 2])
    assert build_candidate({'TYPE': 'GaussianPrimitive', 'AXIS': 2}, 2).axis == 1
    assert build_candidate('norm2(x)', 2).value(np.array([[1.0, 1.0]]))[0] == 2.0
    with pytest.raises(CriterionError):
        build_candidate(None, 2)
    with pytest.raises(CriterionError):
        build_candidate({'FOO': 1}, 2)
    with pytest.raises(CriterionError):
        build_candidate({'TYPE': 'Paraboloid'}, 2)
