from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

HOLDS = 'holds-on-grid'
FAILS = 'fails-with-witness'
INCONCLUSIVE = 'inconclusive'
VERDICTS = (HOLDS, FAILS, INCONCLUSIVE)


@dataclass
class CriterionVerdict:
    """Outcome of one sampled criterion check.

    ``min_margin`` is RHS − LHS (or LHS − RHS for lower bounds) minimized over
    the grid, ``witness`` its argmin. ``margin_fn`` re-evaluates the template at
    arbitrary points and is not serialized.
    """
    id: str
    region: dict
    min_margin: float
    witness: Optional[Tuple[float, ...]]
    verdict: str
    conclusion: str = ''
    constants: dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    trend_table: Optional[List[dict]] = None
    growth: Optional[List[dict]] = None
    skipped_points: int = 0
    margin_fn: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        assert self.verdict in VERDICTS, self.verdict

    @property
    def holds(self):
        return self.verdict == HOLDS

    @property
    def failed(self):
        return self.verdict == FAILS

    def margin_at(self, point):
        if self.margin_fn is None:
            raise ValueError('{} has no pointwise margin'.format(self.id))
        X = np.asarray(point, dtype=float).reshape(1, -1)
        return float(np.asarray(self.margin_fn(X)).reshape(-1)[0])

    def to_dict(self):
        out = {
            'id': self.id,
            'region': self.region,
            'min_margin': self.min_margin,
            'witness': None if self.witness is None else [float(v) for v in self.witness],
            'verdict': self.verdict,
            'conclusion': self.conclusion if self.verdict == HOLDS else '',
            'constants': dict(self.constants),
            'notes': list(self.notes),
            'skipped_points': self.skipped_points,
        }
        if self.trend_table is not None:
            out['trend_table'] = self.trend_table
        if self.growth is not None:
            out['growth'] = self.growth
        return out
