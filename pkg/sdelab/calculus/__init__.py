from .coefficients import CoefficientSet, EllipticityReport, build_coefficient_set
from .fields import (ClosedFormField, DensityField, ExprField, Field, GridField, VectorField,
                     fd_derivative)
from .operators import (DivergenceReport, GeneratorField, InvarianceResidual, apply_generator,
                        beta_ct, decompose_drift, diffusion_root, diffusion_root_batch,
                        invariance_residual, log_derivative_beta, symmetric_root)
from .quadrature import QuadratureRule, ball_indicator, bump_library, integrate

__all__ = [
    'CoefficientSet', 'EllipticityReport', 'build_coefficient_set',
    'Field', 'ExprField', 'ClosedFormField', 'GridField', 'DensityField', 'VectorField',
    'fd_derivative',
    'log_derivative_beta', 'beta_ct', 'decompose_drift', 'DivergenceReport', 'apply_generator',
    'GeneratorField', 'invariance_residual', 'InvarianceResidual', 'diffusion_root',
    'diffusion_root_batch', 'symmetric_root',
    'QuadratureRule', 'integrate', 'bump_library', 'ball_indicator',
]
