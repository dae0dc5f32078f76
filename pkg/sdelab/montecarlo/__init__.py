from .config import SimulationConfig
from .estimators import (EstimatorResult, check_normalizable, ergodic_average, exit_probability_bound,
                         exit_statistics, krylov_functional, moment_curve, step_refinement,
                         transition_histogram)
from .rng import NormalStream
from .simulate import ALIVE, DEGENERATE, DOMAIN, EXITED, PathEnsemble, simulate_ensemble

__all__ = [
    'SimulationConfig', 'NormalStream', 'PathEnsemble', 'simulate_ensemble',
    'ALIVE', 'EXITED', 'DEGENERATE', 'DOMAIN',
    'EstimatorResult', 'moment_curve', 'exit_statistics', 'exit_probability_bound',
    'krylov_functional', 'ergodic_average', 'transition_histogram', 'check_normalizable',
    'step_refinement',
]
