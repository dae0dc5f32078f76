"""Counter-based Gaussian streams, one per (master seed, path index)."""
import numpy as np
from scipy.special import ndtri

_SCALE = 1.0 / 9007199254740992.0  # 2**-53


def uniforms(raw):
    """Open-interval uniforms from the top 53 bits of raw 64-bit words."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE


class NormalStream(object):
    """Standard normals for a block of paths, drawn step by step in order.

    Each path owns a Philox generator keyed by ``(seed, path_index)``, so the
    numbers a path sees do not depend on chunking, block sizes or threads.
    """

    def __init__(self, seed, indices, dim, substeps=1):
        self.dim = int(dim)
        self.substeps = int(substeps)
        self.indices = [int(i) for i in indices]
        self._gens = [np.random.Philox(key=np.array([seed, i], dtype=np.uint64))
                      for i in self.indices]

    def block(self, steps):
        """Array ``(paths, steps, dim)`` of step normals, substeps already combined."""
        count = steps * self.substeps * self.dim
        raw = np.stack([g.random_raw(count) for g in self._gens]) if count else \
            np.zeros((len(self._gens), 0), dtype=np.uint64)
        xi = ndtri(uniforms(raw)).reshape(len(self._gens), steps, self.substeps, self.dim)
        if self.substeps == 1:
            return xi[:, :, 0, :]
        return xi.sum(axis=2) / np.sqrt(self.substeps)
