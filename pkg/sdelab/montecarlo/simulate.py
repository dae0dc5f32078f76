"""Euler–Maruyama ensembles with a radius ladder of localizing exit times."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from tqdm import tqdm

from ..calculus.operators import as_field, diffusion_root_batch
from ..utils.env import get_threads, parallel_map
from ..utils.errors import SimulationError
from .config import SimulationConfig
from .rng import NormalStream

logger = logging.getLogger(__name__)

ALIVE = 'alive'
EXITED = 'exited'
DEGENERATE = 'degenerate'
DOMAIN = 'domain'
STATUSES = (ALIVE, EXITED, DEGENERATE, DOMAIN)

# steps of normals drawn per generator call
NOISE_BLOCK = 512


@dataclass
class PathEnsemble:
    """Per-path results of one run.

    ``snapshots[p, s]`` is X at ``times[s]`` stopped at the largest radius;
    ``exit_times[p, j]`` is σ for ``radii[j]`` (NaN when not reached);
    ``integrals[name][p, s]`` is ∫₀^{times[s]} f(X_u) du by left endpoints.
    """
    config: SimulationConfig
    x0: np.ndarray
    times: np.ndarray
    snapshots: np.ndarray
    exit_times: np.ndarray
    status: np.ndarray
    clip_counts: np.ndarray
    overshoot: np.ndarray
    max_increment: np.ndarray
    exit_positions: np.ndarray
    integrals: Dict[str, np.ndarray] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def radii(self):
        return self.config.radii

    @property
    def n_paths(self):
        return self.snapshots.shape[0]

    @property
    def terminal(self):
        return self.snapshots[:, -1, :]

    def time_index(self, t):
        """Snapshot index of time ``t``; ``t`` must fall on the recorded grid."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)) + 0.5 * self.config.dt:
            raise SimulationError('time {} is not on the snapshot grid (every {} steps)'.format(
                t, self.config.record_every))
        return idx

    def status_counts(self):
        return {s: int(np.sum(self.status == s)) for s in STATUSES}

    def csv_header(self):
        d = self.snapshots.shape[-1]
        return (['path', 'status', 'clips', 'overshoot']
                + ['x{}'.format(k + 1) for k in range(d)]
                + ['sigma_{:g}'.format(r) for r in self.radii])

    def csv_rows(self):
        for p in range(self.n_paths):
            yield ([p, str(self.status[p]), int(self.clip_counts[p]), float(self.overshoot[p])]
                   + [float(v) for v in self.terminal[p]]
                   + [float(v) for v in self.exit_times[p]])

    def summary(self):
        return {
            'paths': self.n_paths,
            'status': self.status_counts(),
            'clip_events': int(self.clip_counts.sum()),
            'max_overshoot': float(np.nanmax(self.overshoot)) if self.n_paths else 0.0,
            'config': self.config.to_dict(),
            'x0': [float(v) for v in self.x0],
            'notes': list(self.notes),
        }


def _prepare_functionals(functionals, dim):
    return {name: as_field(f, dim) for name, f in (functionals or {}).items()}


def _simulate_chunk(cs, x0, cfg, indices, functionals, constant_root):
    d = cs.dim
    m = len(indices)
    n_steps = cfg.n_steps
    dt = cfg.dt
    sqrt_dt = np.sqrt(dt)
    radii = np.asarray(cfg.radii)
    record = set(cfg.record_steps[1:])
    n_rec = len(cfg.record_steps)

    X = np.tile(np.asarray(x0, dtype=float), (m, 1))
    active = np.ones(m, dtype=bool)
    status = np.full(m, ALIVE, dtype=object)
    exit_step = np.full((m, radii.size), -1, dtype=np.int64)
    exit_pos = np.full((m, radii.size, d), np.nan)
    clips = np.zeros(m, dtype=np.int64)
    max_inc = np.zeros(m)
    snapshots = np.empty((m, n_rec, d))
    snapshots[:, 0] = X
    acc = {name: np.zeros(m) for name in functionals}
    curves = {name: np.zeros((m, n_rec)) for name in functionals}
    stream = NormalStream(cfg.seed, indices, d, cfg.noise_substeps)
    noise = None
    rec = 1

    for k in range(n_steps):
        j = k % NOISE_BLOCK
        if j == 0:
            noise = stream.block(min(NOISE_BLOCK, n_steps - k))
        idx = np.flatnonzero(active)
        if idx.size:
            Xa = X[idx]
            with np.errstate(all='ignore'):
                G = cs.drift(Xa, strict=False)
                for name, f in functionals.items():
                    acc[name][idx] += f.value(Xa, strict=False) * dt
                bad = ~np.isfinite(G).all(axis=-1)
                norm = np.linalg.norm(G, axis=-1)
                over = ~bad & (norm * dt > cfg.clip)
                if over.any():
                    G[over] *= (cfg.clip / (dt * norm[over]))[:, None]
                    clips[idx[over]] += 1
            if constant_root is not None:
                diffusion = np.einsum('ij,pj->pi', constant_root, noise[idx, j])
                degenerate = np.zeros(idx.size, dtype=bool)
            else:
                root, degenerate = diffusion_root_batch(cs.matrix_A(Xa, strict=False))
                diffusion = np.einsum('pij,pj->pi', root, noise[idx, j])
            stop = bad | degenerate
            if stop.any():
                status[idx[bad]] = DOMAIN
                status[idx[degenerate & ~bad]] = DEGENERATE
                active[idx[stop]] = False
            move = ~stop
            idm = idx[move]
            step = G[move] * dt + sqrt_dt * diffusion[move]
            X_new = X[idm] + step
            max_inc[idm] = np.maximum(max_inc[idm], np.linalg.norm(step, axis=-1))
            r_new = np.linalg.norm(X_new, axis=-1)
            crossed = (r_new[:, None] >= radii[None, :]) & (exit_step[idm] < 0)
            if crossed.any():
                rows, cols = np.nonzero(crossed)
                exit_step[idm[rows], cols] = k + 1
                exit_pos[idm[rows], cols] = X_new[rows]
            X[idm] = X_new
            out = r_new >= radii[-1]
            if out.any():
                status[idm[out]] = EXITED
                active[idm[out]] = False
        if k + 1 in record:
            snapshots[:, rec] = X
            for name in functionals:
                curves[name][:, rec] = acc[name]
            rec += 1

    exit_times = np.where(exit_step >= 0, exit_step * dt, np.nan)
    return snapshots[:, :rec], exit_times, status, clips, max_inc, exit_pos, \
        {name: c[:, :rec] for name, c in curves.items()}


def simulate_ensemble(cs, x0, cfg, functionals=None, progress=False):
    """Run ``cfg.paths`` Euler–Maruyama paths of dX = G dt + σ dW from ``x0``.

    Paths are absorbed at the first exit from the largest ladder radius; a path
    whose drift is undefined or whose A is degenerate stops with that status.
    ``functionals`` maps names to fields f whose running integrals ∫ f(X) dt
    are recorded at the snapshot times.
    """
    if cs.dim < 2:
        raise SimulationError('the simulator needs d >= 2, got d={}'.format(cs.dim))
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != cs.dim:
        raise SimulationError('x0 has {} coordinates, d={}'.format(x0.size, cs.dim))
    if not np.linalg.norm(x0) < cfg.radii[0]:
        raise SimulationError('x0 = {} is not inside the smallest radius {}'.format(
            tuple(x0), cfg.radii[0]))
    functionals = _prepare_functionals(functionals, cs.dim)
    constant_root = None
    if cs.is_constant_diffusion():
        root, degenerate = diffusion_root_batch(cs.matrix_A(x0[None, :]))
        if degenerate[0]:
            raise SimulationError('A is degenerate')
        constant_root = root[0]

    starts = list(range(0, cfg.paths, cfg.chunk_size))
    chunks = [list(range(s, min(s + cfg.chunk_size, cfg.paths))) for s in starts]

    def run(indices):
        return _simulate_chunk(cs, x0, cfg, indices, functionals, constant_root)

    if get_threads() == 1 or len(chunks) == 1:
        parts = [run(c) for c in tqdm(chunks, desc='paths', disable=not progress)]
    else:
        parts = parallel_map(run, chunks)

    snapshots = np.concatenate([p[0] for p in parts])
    exit_times = np.concatenate([p[1] for p in parts])
    status = np.concatenate([p[2] for p in parts]).astype(str)
    clips = np.concatenate([p[3] for p in parts])
    max_inc = np.concatenate([p[4] for p in parts])
    exit_pos = np.concatenate([p[5] for p in parts])
    integrals = {name: np.concatenate([p[6][name] for p in parts]) for name in functionals}
    times = np.asarray(cfg.record_steps, dtype=float) * cfg.dt

    largest = exit_pos[:, -1, :]
    overshoot = np.where(status == EXITED, np.linalg.norm(largest, axis=-1) - cfg.radii[-1], 0.0)
    ens = PathEnsemble(cfg, x0, times, snapshots, exit_times, status, clips, overshoot, max_inc,
                       exit_pos, integrals)
    total_clips = int(clips.sum())
    if total_clips:
        logger.warning('drift clipped %d times over %d paths (kappa=%g)', total_clips,
                       cfg.paths, cfg.clip)
        ens.notes.append('drift clipped {} times'.format(total_clips))
    counts = ens.status_counts()
    if counts[DEGENERATE] or counts[DOMAIN]:
        logger.warning('%d paths stopped on degenerate A, %d on undefined drift',
                       counts[DEGENERATE], counts[DOMAIN])
    logger.info('simulated %d paths x %d steps: %s', cfg.paths, cfg.n_steps, counts)
    return ens
