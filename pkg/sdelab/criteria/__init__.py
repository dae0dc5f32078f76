from .builder import (ConstantSearch, CriterionInputs, build_criterion, evaluate_criterion,
                      search_constant)
from .candidates import CANDIDATE, BallIndicator, GaussianPrimitive, build_candidate, \
    recurrence_candidate
from .catalog import CRITERION, CriterionBase, lg_formula
from .grids import RegionGrid, annulus_grid, box_grid, growth_check, interval_grid
from .margin import MarginResult, evaluate_margin, lyapunov_margin
from .recurrence import recurrence_volume_test  # noqa: F401 registers RECURRENCE_VOLUME
from .verdict import FAILS, HOLDS, INCONCLUSIVE, CriterionVerdict

CATALOG_IDS = (
    'LYAPUNOV_L', 'LYAPUNOV_EXTERIOR', 'GROWTH_NONEXPLOSION', 'EIGENGAP_2D',
    'LINEAR_GROWTH_MOMENT', 'INTEGRABLE_COEFFS', 'INVARIANCE_LYAPUNOV', 'INVARIANCE_LOG_GROWTH',
    'NON_INVARIANCE', 'RECURRENCE_SUPERSOLUTION', 'RECURRENCE_GROWTH', 'VOLUME_CONSERVATIVE',
    'ERGODIC_DRIFT',
)

__all__ = [
    'CRITERION', 'CANDIDATE', 'CATALOG_IDS', 'CriterionBase', 'CriterionInputs',
    'CriterionVerdict', 'ConstantSearch', 'build_criterion', 'evaluate_criterion',
    'search_constant', 'build_candidate', 'recurrence_candidate', 'GaussianPrimitive',
    'BallIndicator', 'lg_formula', 'RegionGrid', 'annulus_grid', 'box_grid', 'interval_grid',
    'growth_check', 'MarginResult', 'evaluate_margin', 'lyapunov_margin',
    'recurrence_volume_test', 'HOLDS', 'FAILS', 'INCONCLUSIVE',
]
