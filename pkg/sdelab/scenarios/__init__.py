from .builders import DENSITY_BUILDER, BumpTrain, bump_centers, bump_train, density_source
from .catalog import BUILTINS, builtin_path, list_builtins, resolve_config, run_catalog
from .pipeline import STAGES, requested_stages, run_scenario
from .report import (EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_STAGE_ERROR, Report, emit_report,
                     worst_code)
from .scenario import COMPUTED, Scenario, build_scenario, load_scenario

__all__ = [
    'Scenario', 'load_scenario', 'build_scenario', 'COMPUTED', 'run_scenario', 'STAGES', 'requested_stages',
    'Report', 'emit_report', 'worst_code', 'EXIT_OK', 'EXIT_FAILED', 'EXIT_STAGE_ERROR',
    'EXIT_CONFIG', 'BUILTINS', 'builtin_path', 'resolve_config', 'list_builtins', 'run_catalog',
    'bump_train', 'bump_centers', 'BumpTrain', 'DENSITY_BUILDER', 'density_source',
]
