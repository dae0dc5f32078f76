import numpy as np
import pytest

from sdelab.calculus import (CoefficientSet, DensityField, QuadratureRule, apply_generator,
                             ball_indicator, beta_ct, build_coefficient_set, bump_library,
                             decompose_drift, diffusion_root_batch, integrate,
                             invariance_residual, log_derivative_beta, symmetric_root)
from sdelab.calculus.operators import default_rule, generator_drift
from sdelab.calculus.quadrature import support_rule
from sdelab.dsl import CoordinateRangeError
from sdelab.utils.errors import (CoefficientError, DegenerateDiffusionError, DensityError,
                                 EllipticityError, QuadratureError)


def test_drift_of_divergence_form(brownian):
    cs = build_coefficient_set([['1 + x1^2', '0'], ['1']], H=['0', 'x1'], probe_points=100)
    # g_1 = ½ ∂_1 a_11 = x1, g_2 = h_2
    np.testing.assert_allclose(cs.drift([[2.0, 5.0]]), [[2.0, 2.0]])
    np.testing.assert_allclose(brownian.drift([[3.0, -1.0]]), [[0.0, 0.0]])


def test_stream_part_enters_the_drift():
    cs = build_coefficient_set([['1', '0'], ['1']], C=[['x1*x2']], H=['0', '0'],
                               probe_points=100)
    assert cs.has_stream_part
    # c_12 = x1 x2, c_21 = -x1 x2: g_1 = ½ ∂_2 c_21 = -x1/2, g_2 = ½ ∂_1 c_12 = x2/2
    np.testing.assert_allclose(cs.drift([[2.0, 4.0]]), [[-1.0, 2.0]])
    C = cs.matrix_C([[2.0, 4.0]])[0]
    np.testing.assert_allclose(C, -C.T)


def test_net_drift_input_recovers_h():
    cs = build_coefficient_set([['1 + x1^2', '0'], ['1']], G=['0', '0'], probe_points=100)
    np.testing.assert_allclose(cs.h([[3.0, 0.0]]), [[-3.0, 0.0]])
    np.testing.assert_allclose(cs.drift([[3.0, 0.0]]), [[0.0, 0.0]], atol=1e-12)


def test_full_matrix_must_be_symmetric():
    with pytest.raises(CoefficientError):
        build_coefficient_set([['1', 'x1'], ['0', '1']], H=['0', '0'], probe_points=10)
    cs = build_coefficient_set([['2', '1'], ['1', '2']], H=['0', '0'], probe_points=10)
    assert cs.A[0][1] == cs.A[1][0]


def test_non_elliptic_coefficients_raise_with_witness():
    with pytest.raises(EllipticityError) as info:
        build_coefficient_set([['1', '2'], ['1']], H=['0', '0'], probe_points=50)
    assert info.value.eigenvalue < 0
    assert len(info.value.witness) == 2


def test_dimension_and_drift_inputs_are_validated():
    with pytest.raises(CoefficientError):
        build_coefficient_set([['1']], H=['0'])
    cs = build_coefficient_set([['1']], H=['0'], allow_one_dim=True, probe_points=10)
    assert cs.dim == 1
    with pytest.raises(CoefficientError):
        build_coefficient_set([['1', '0'], ['1']], H=['0', '0'], G=['0', '0'])
    with pytest.raises(CoefficientError):
        build_coefficient_set([['1', '0'], ['1']], H=['0'])
    with pytest.raises(CoordinateRangeError):
        build_coefficient_set([['1', '0'], ['1']], H=['0', 'x3'])


def test_from_density_gives_zero_flux():
    cs = CoefficientSet.from_density([['1', '0'], ['1']], 'exp(-norm2(x))', probe_points=50)
    np.testing.assert_allclose(cs.drift([[1.0, 2.0]]), [[-1.0, -2.0]])
    assert 'norm2(x)' in cs.metadata['from_density']


def test_from_density_with_divergence_free_flux():
    cs = CoefficientSet.from_density([['1']], 'exp(-x1^2)', flux=['-2'], dim=1,
                                     allow_one_dim=True, probe_points=20)
    x = 0.5
    rho = np.exp(-x * x)
    assert cs.drift([[x]])[0, 0] == pytest.approx(-x - 2.0 / rho)


def test_log_derivative_beta_and_decomposition(ou, gauss):
    beta = log_derivative_beta(ou, gauss)
    np.testing.assert_allclose(beta.value([[1.5, -0.5]]), [[-1.5, 0.5]])
    B, report = decompose_drift(ou, gauss, rule=default_rule(2, nodes_per_axis=81))
    np.testing.assert_allclose(B.value([[0.3, 0.7]]), [[0.0, 0.0]], atol=1e-12)
    assert report.max_residual < 1e-10


def test_beta_ct_vanishes_without_stream(ou, gauss):
    np.testing.assert_allclose(beta_ct(ou, gauss).value([[1.0, 1.0]]), [[0.0, 0.0]])


def test_generator_modes(ou, gauss):
    f = 'norm2(x)'
    Lf = apply_generator(ou, gauss, f, 'L')
    # L|x|² = tr A + 2⟨G, x⟩ = 2 − 2|x|²
    np.testing.assert_allclose(Lf.value([[1.0, 0.0], [0.0, 0.0]]), [0.0, 2.0])
    # the process is reversible, so L' = L⁰ = L
    np.testing.assert_allclose(apply_generator(ou, gauss, f, 'L_adjoint').value([[2.0, 1.0]]),
                               Lf.value([[2.0, 1.0]]))
    np.testing.assert_allclose(apply_generator(ou, gauss, f, 'L_zero').value([[2.0, 1.0]]),
                               Lf.value([[2.0, 1.0]]))
    with pytest.raises(ValueError):
        generator_drift(ou, gauss, 'L_star')
    with pytest.raises(ValueError):
        generator_drift(ou, None, 'L_zero')


def test_adjoint_drift_of_a_shear():
    cs = build_coefficient_set([['1', '0'], ['1']], G=['1', '0'], probe_points=20)
    rho = DensityField.analytic('1', 2)
    b = generator_drift(cs, rho, 'L_adjoint').value([[0.3, 0.1]])
    np.testing.assert_allclose(b, [[-1.0, 0.0]])


@pytest.mark.parametrize('profile', ['poly', 'gauss'])
def test_invariance_residual_of_stationary_density(ou, gauss, profile):
    rule = default_rule(2, half_width=4.0, nodes_per_axis=121)
    for f in bump_library(rule.lower, rule.upper, profile=profile)[:3]:
        res = invariance_residual(ou, gauss, f, rule)
        assert abs(res.value) < 1e-8 * max(res.scale, 1.0)
        assert not res.leaked


def test_invariance_residual_detects_wrong_density(ou, lebesgue):
    rule = default_rule(2, half_width=4.0, nodes_per_axis=121)
    values = [abs(invariance_residual(ou, lebesgue, f, rule).value)
              for f in bump_library(rule.lower, rule.upper)[1:4]]
    assert max(values) > 1e-3


def test_leaking_test_function_is_cut_off(ou, gauss):
    rule = default_rule(2, half_width=3.0, nodes_per_axis=61)
    res = invariance_residual(ou, gauss, 'x1', rule)
    assert res.leaked
    assert res.notes


def test_symmetric_root():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    root = symmetric_root(A)
    np.testing.assert_allclose(root @ root, A, atol=1e-12)
    np.testing.assert_allclose(root, root.T)
    np.testing.assert_allclose(symmetric_root(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    with pytest.raises(DegenerateDiffusionError):
        symmetric_root(np.diag([1.0, 0.0]))


def test_batched_root_flags_degenerate_entries():
    A = np.stack([np.eye(2), np.diag([1.0, 0.0]), np.full((2, 2), np.nan)])
    root, degenerate = diffusion_root_batch(A)
    assert degenerate.tolist() == [False, True, True]
    np.testing.assert_allclose(root[0], np.eye(2))
    assert np.isnan(root[1]).all()


def test_simpson_is_exact_for_cubics():
    rule = QuadratureRule([0.0], [1.0], 11)
    assert integrate(lambda X: X[..., 0] ** 3, rule) == pytest.approx(0.25, abs=1e-14)
    box = QuadratureRule.box(1.0, 2, 5)
    assert integrate(lambda X: np.ones(X.shape[:-1]), box) == pytest.approx(4.0)
    assert box.volume == pytest.approx(4.0)


def test_quadrature_validation():
    with pytest.raises(QuadratureError):
        QuadratureRule([0.0], [1.0], 10)
    with pytest.raises(QuadratureError):
        QuadratureRule([1.0], [0.0], 11)
    with pytest.raises(QuadratureError):
        QuadratureRule([0.0], [1.0], 11, scheme='trapezoid')
    with pytest.raises(QuadratureError):
        integrate(lambda X: np.where(X[..., 0] > 0.5, np.inf, 1.0),
                  QuadratureRule([0.0], [1.0], 11))


def test_midpoint_rule_and_thread_independence():
    from sdelab.utils.env import set_threads

    rule = QuadratureRule.box(2.0, 2, 64, scheme='midpoint')

    def fn(X):
        return np.exp(-np.sum(X * X, axis=-1))

    serial = integrate(fn, rule, chunk_rows=8)
    set_threads(4)
    parallel = integrate(fn, rule, chunk_rows=8)
    assert serial == parallel
    assert serial == pytest.approx(np.pi * 0.99532226501895 ** 2, rel=1e-3)


def test_ball_indicator():
    ind = ball_indicator(1.0, 2)
    np.testing.assert_allclose(ind(np.array([[0.5, 0.0], [1.5, 0.0]])), [1.0, 0.0])


def test_density_probe_and_checked_value():
    rho = DensityField.analytic('x1', 2, name='signed')
    with pytest.raises(DensityError) as info:
        rho.probe(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert info.value.point == (-1.0, 0.0)
    with pytest.raises(DensityError):
        rho.checked_value(np.array([[0.0, 1.0]]))
    report = DensityField.analytic('1 + norm2(x)', 2).probe(np.zeros((3, 2)))
    assert report.positive and report.min_value == pytest.approx(1.0)


def test_grid_density_matches_expression():
    axes = [np.linspace(-2, 2, 81)] * 2
    X = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    values = np.exp(-np.sum(X * X, axis=-1))
    rho = DensityField.from_grid(axes, values)
    assert not rho.is_analytic
    assert rho.value(np.array([[0.5, -0.25]]))[0] == pytest.approx(np.exp(-0.3125), rel=1e-3)
    grad = rho.gradient(np.array([[0.5, 0.0]]))[0]
    assert grad[0] == pytest.approx(-np.exp(-0.25), rel=2e-2)


@pytest.mark.parametrize('density', ['1', 'exp(2*x1)'])
def test_shear_flow_has_two_invariant_measures(density):
    cs = build_coefficient_set([['1', '0'], ['1']], G=['1', '0'], probe_points=20)
    rho = DensityField.analytic(density, 2)
    rule = default_rule(2)
    for f in bump_library(rule.lower, rule.upper)[:4]:
        res = invariance_residual(cs, rho, f, rule)
        assert abs(res.value) <= 1e-8 * max(res.scale, 1.0)


def test_residual_of_non_invariant_pair_matches_integration_by_parts(brownian):
    rho = DensityField.analytic('exp(x1)', 2)
    rule = default_rule(2)
    f = bump_library(rule.lower, rule.upper)[1]
    res = invariance_residual(brownian, rho, f, rule)
    # ∫ ½Δf e^{x1} dx = ½ ∫ f e^{x1} dx
    expected = 0.5 * integrate(lambda X: f.value(X) * rho.value(X), support_rule(f, rule))
    assert res.value == pytest.approx(expected, rel=1e-6)


def test_legendre_rule_is_exact_for_high_degree():
    rule = QuadratureRule([0.0], [1.0], 5, scheme='legendre')
    assert integrate(lambda X: X[..., 0] ** 9, rule) == pytest.approx(0.1, abs=1e-14)
    box = QuadratureRule([-1.0, 0.0], [2.0, 1.0], 16, scheme='legendre')
    value = integrate(lambda X: np.exp(X[..., 0]) * X[..., 1] ** 2, box)
    assert value == pytest.approx((np.exp(2.0) - np.exp(-1.0)) / 3.0, rel=1e-13)


def test_default_bumps_vanish_outside_their_sub_box():
    lib = bump_library([-4.0, -4.0], [4.0, 4.0])
    assert len(lib) == 8
    X = np.random.default_rng(3).uniform(-4.0, 4.0, size=(4000, 2))
    for f in lib:
        assert f.name.startswith('poly@')
        lower, upper = f.support
        np.testing.assert_allclose(upper - lower, [2.0, 2.0])
        outside = ((X < lower) | (X > upper)).any(axis=-1)
        assert outside.any()
        assert np.all(f.value(X[outside]) == 0.0)
        assert np.all(f.gradient(X[outside]) == 0.0)
        center = 0.5 * (lower + upper)
        assert f.value(center[None])[0] == pytest.approx(1.0)
        # (1 - t²)³ meets zero with its first two derivatives
        face = np.array([[upper[0], center[1]]])
        assert f.value(face)[0] == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(f.hessian(face), 0.0, atol=1e-12)


def test_support_rule_covers_the_sub_box():
    rule = default_rule(2)
    f = bump_library(rule.lower, rule.upper)[5]
    sub = support_rule(f, rule)
    assert sub.scheme == 'legendre'
    np.testing.assert_allclose(sub.lower, f.support[0])
    np.testing.assert_allclose(sub.upper, f.support[1])
    # the support pokes out of a smaller box
    assert support_rule(f, QuadratureRule.box(1.5, 2, 31)) is None


def test_gaussian_bumps_remain_selectable():
    lib = bump_library([-4.0, -4.0], [4.0, 4.0], count=3, profile='gauss')
    assert [f.name.split('@')[0] for f in lib] == ['gauss'] * 3
    assert all(f.support is None for f in lib)
    assert support_rule(lib[0], default_rule(2, nodes_per_axis=81)) is None
    with pytest.raises(QuadratureError):
        bump_library([-1.0], [1.0], profile='cosine')
