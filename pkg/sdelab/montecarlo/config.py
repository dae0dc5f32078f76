import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from ..utils.config import get_float, get_int, get_list
from ..utils.errors import ConfigError, SimulationError

SCHEMES = ('euler-maruyama',)


@dataclass
class SimulationConfig:
    """Euler–Maruyama run settings.

    ``clip`` is κ: the drift is rescaled to norm κ/Δ whenever ‖G(X)‖Δ > κ.
    ``noise_substeps = k`` sums k standard normals per step scaled by 1/√k, so
    a (Δ, k=2) run reuses the Brownian increments of the (Δ/2, k=1) run with
    the same seed. Snapshots are kept every ``record_every`` steps.
    """
    dt: float
    horizon: float
    paths: int
    seed: int = 0
    radii: List[float] = field(default_factory=lambda: [10.0])
    clip: float = 10.0
    scheme: str = 'euler-maruyama'
    chunk_size: int = 1024
    record_every: Optional[int] = None
    noise_substeps: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise SimulationError('dt must be positive, got {}'.format(self.dt))
        if not self.horizon >= self.dt:
            raise SimulationError('horizon {} is shorter than one step {}'.format(
                self.horizon, self.dt))
        if self.paths < 1:
            raise SimulationError('paths must be at least 1, got {}'.format(self.paths))
        self.radii = [float(r) for r in self.radii]
        if not self.radii or any(r <= 0 for r in self.radii) or \
                any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise SimulationError('radii must be positive and strictly increasing, got {}'.format(
                self.radii))
        if not self.clip > 0:
            raise SimulationError('clip threshold must be positive, got {}'.format(self.clip))
        if self.scheme not in SCHEMES:
            raise SimulationError('unknown scheme {!r}'.format(self.scheme))
        if self.noise_substeps < 1 or self.chunk_size < 1:
            raise SimulationError('noise_substeps and chunk_size must be at least 1')
        if self.record_every is None:
            self.record_every = max(1, self.n_steps // 200)
        if self.record_every < 1:
            raise SimulationError('record_every must be at least 1')

    @property
    def n_steps(self):
        return int(math.floor(self.horizon / self.dt + 1e-9))

    @property
    def largest_radius(self):
        return self.radii[-1]

    @property
    def record_steps(self):
        """Step indices of the snapshots: every ``record_every`` steps and the last one."""
        steps = list(range(0, self.n_steps + 1, self.record_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return steps

    def replace(self, **kwargs):
        """A validated copy with some fields changed; the snapshot stride is re-derived."""
        values = asdict(self)
        values.update(kwargs)
        if ('dt' in kwargs or 'horizon' in kwargs) and 'record_every' not in kwargs:
            values['record_every'] = None
        return SimulationConfig(**values)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_cfg(cls, cfg, path='SIMULATION', seed=None):
        """Read UPPERCASE keys; a ``seed`` override replaces ``SEED``."""
        kwargs = dict(
            dt=get_float(cfg, 'DT', path, positive=True),
            horizon=get_float(cfg, 'HORIZON', path, positive=True),
            paths=get_int(cfg, 'PATHS', path, minimum=1),
            seed=get_int(cfg, 'SEED', path, default=0, minimum=0) if seed is None else int(seed),
            radii=[float(r) for r in get_list(cfg, 'RADII', path, default=[10.0])],
            clip=get_float(cfg, 'CLIP', path, default=10.0, positive=True),
            scheme=str(cfg.get('SCHEME', 'euler-maruyama')),
            chunk_size=get_int(cfg, 'CHUNK_SIZE', path, default=1024, minimum=1),
            noise_substeps=get_int(cfg, 'NOISE_SUBSTEPS', path, default=1, minimum=1),
        )
        if cfg.get('RECORD_EVERY') is not None:
            kwargs['record_every'] = get_int(cfg, 'RECORD_EVERY', path, minimum=1)
        try:
            return cls(**kwargs)
        except SimulationError as exc:
            raise ConfigError(path, str(exc))
