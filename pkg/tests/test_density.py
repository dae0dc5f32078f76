import math

import numpy as np
import pytest

from sdelab.calculus import DensityField
from sdelab.density import (BoxMesh, assemble_system, convergence_order, invariance_of_solution,
                            max_error, shell_integral, solve_density, volume_profile)
from sdelab.utils.errors import AssemblyError, CoefficientError, VolumeError

GAUSS = 'exp(-norm2(x))'


def test_mesh_layout():
    mesh = BoxMesh(2.0, 4, 2)
    assert mesh.shape == (5, 5)
    assert mesh.h == pytest.approx(1.0)
    np.testing.assert_allclose(mesh.coordinates(mesh.origin), [0.0, 0.0])
    assert mesh.interior.size == 9 and mesh.boundary.size == 16
    assert mesh.inner_box(1.0).size == 9
    with pytest.raises(ValueError):
        BoxMesh(2.0, 3, 2)
    with pytest.raises(ValueError):
        BoxMesh(0.0, 4, 2)


def test_mesh_avoids_singular_points():
    mesh = BoxMesh(2.0, 4, 2, singular_points=[(1.0, 0.0)])
    assert mesh.R > 2.0
    assert mesh.requested_R == 2.0
    # the origin is always a node and never nudged away from
    assert BoxMesh(2.0, 4, 2, singular_points=[(0.0, 0.0)]).R == 2.0


def test_assembly_checks_dimension(brownian):
    with pytest.raises(AssemblyError):
        assemble_system(brownian, BoxMesh(1.0, 4, 3))


def test_constant_solves_the_brownian_problem(brownian):
    approx = solve_density(brownian, 2.0, 16)
    np.testing.assert_allclose(approx.flat, 1.0, atol=1e-12)
    assert approx.valid
    assert approx.origin_value == pytest.approx(1.0)
    assert approx.diagnostics['method'] == 'direct'


def test_linear_oracle_is_reproduced_exactly(brownian):
    report = convergence_order(brownian, 1.0, 8, '1 + x1', '1 + x1', levels=2)
    assert report.exact
    assert report.order == 'exact'


def test_manufactured_ornstein_uhlenbeck_solution(ou):
    report = convergence_order(ou, 4.0, 32, GAUSS, GAUSS, levels=2, method='direct')
    assert report.n == [32, 64]
    assert report.errors[1] < report.errors[0]
    assert 1.5 < report.orders[-1] < 2.5
    assert not report.exact


@pytest.mark.slow
def test_ornstein_uhlenbeck_accuracy_on_fine_meshes(ou):
    report = convergence_order(ou, 4.0, 64, GAUSS, GAUSS, levels=3, method='direct')
    assert report.n == [64, 128, 256]
    # max-norm error at R = 4, n = 128
    assert report.errors[1] <= 5e-3
    assert len(report.orders) == 2
    assert all(1.8 <= order <= 2.2 for order in report.orders)


def test_iterative_and_direct_solvers_agree(ou):
    direct = solve_density(ou, 3.0, 24, boundary=GAUSS, method='direct')
    iterative = solve_density(ou, 3.0, 24, boundary=GAUSS, method='iterative')
    np.testing.assert_allclose(iterative.flat, direct.flat, rtol=1e-6, atol=1e-6)
    assert iterative.diagnostics['iterations'] > 0


def test_solution_is_deterministic(ou):
    a = solve_density(ou, 3.0, 16, boundary=GAUSS)
    b = solve_density(ou, 3.0, 16, boundary=GAUSS)
    assert np.array_equal(a.values, b.values)
    assert a.to_dict() == b.to_dict()


def test_computed_density_is_nearly_invariant(ou):
    approx = solve_density(ou, 4.0, 64, boundary=GAUSS)
    assert max_error(approx, GAUSS) < 0.05
    report = invariance_of_solution(ou, approx)
    assert len(report.residuals) == 8
    flat = DensityField.from_grid(approx.mesh.axes, np.ones(approx.mesh.shape))
    wrong = invariance_of_solution(ou, flat)
    assert report.max_residual < 0.2 * wrong.max_residual


def test_density_solver_needs_two_or_three_dimensions():
    from sdelab.calculus import build_coefficient_set

    cs = build_coefficient_set([['1']], H=['0'], allow_one_dim=True, probe_points=10)
    with pytest.raises(CoefficientError):
        solve_density(cs, 1.0, 8)


def test_grid_density_from_solution(ou):
    approx = solve_density(ou, 3.0, 16, boundary=GAUSS)
    field = approx.to_field()
    assert not field.is_analytic
    assert field.value(np.zeros((1, 2)))[0] == pytest.approx(1.0)
    rows = list(approx.csv_rows())
    assert len(rows) == approx.mesh.n_nodes
    assert len(rows[0]) == len(approx.csv_header()) == 3 + 1 + 2 + 1
    assert rows[0][:3] == [3.0, 16, 2]


def test_shell_integral_of_ball_volume():
    def one(X):
        return np.ones(X.shape[:-1])

    assert shell_integral(one, 2, 0.0, 3.0) == pytest.approx(9.0 * math.pi, rel=1e-12)
    assert shell_integral(one, 3, 0.0, 1.0) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-10)
    assert shell_integral(one, 2, 2.0, 1.0) == 0.0


def test_volume_profile_of_lebesgue_measure(brownian, lebesgue):
    profile = volume_profile(lebesgue, [1.0, 2.0, 4.0], cs=brownian, annulus_radii=[1.0])
    np.testing.assert_allclose(profile.mass, [math.pi, 4 * math.pi, 16 * math.pi], rtol=1e-10)
    # ⟨Ax, x⟩/|x|² = 1 for A = I
    np.testing.assert_allclose(profile.v1, profile.mass, rtol=1e-10)
    assert profile.v2 == [0.0, 0.0, 0.0]
    assert profile.annuli[0]['mass'] == pytest.approx(12 * math.pi, rel=1e-10)
    assert len(list(profile.rows())) == 3


def test_volume_profile_of_gaussian(gauss):
    profile = volume_profile(gauss, [1.0, 5.0])
    assert profile.mass[0] == pytest.approx(math.pi * (1 - math.exp(-1.0)), rel=1e-8)
    assert profile.mass[1] == pytest.approx(math.pi, rel=1e-8)
    assert profile.v1 is None


def test_volume_profile_validation(lebesgue):
    with pytest.raises(VolumeError):
        volume_profile(lebesgue, [2.0, 1.0])
    with pytest.raises(VolumeError):
        volume_profile(lebesgue, [])
    axes = [np.linspace(-2, 2, 21)] * 2
    grid = DensityField.from_grid(axes, np.ones((21, 21)))
    with pytest.raises(VolumeError):
        volume_profile(grid, [1.0, 3.0])
    assert volume_profile(grid, [1.0]).mass[0] == pytest.approx(math.pi, rel=1e-10)
