from .assemble import LinearSystem, assemble_system, boundary_data
from .mesh import BoxMesh
from .solver import (ConvergenceReport, DensityApproximation, SolutionResidualReport,
                     convergence_order, invariance_of_solution, max_error, nested_agreement,
                     solve_density, solve_linear, spread_against)
from .volume import VolumeProfile, shell_integral, volume_profile

__all__ = [
    'BoxMesh', 'LinearSystem', 'assemble_system', 'boundary_data', 'solve_linear',
    'solve_density', 'DensityApproximation', 'invariance_of_solution', 'SolutionResidualReport',
    'convergence_order', 'ConvergenceReport', 'max_error', 'nested_agreement', 'spread_against',
    'volume_profile', 'VolumeProfile', 'shell_integral',
]
