"""Seeded 2D coherent gradient noise with values in [-1, 1].

Simplex-style lattice noise: skew the plane into a triangular grid, pick the
three surrounding corners, and sum their radially attenuated gradient
contributions. Smooth (C1) in both arguments, zero mean, deterministic for a
fixed seed. Evaluations accept scalars or numpy arrays.
"""

from __future__ import annotations

import numpy as np

_F2 = 0.5 * (np.sqrt(3.0) - 1.0)
_G2 = (3.0 - np.sqrt(3.0)) / 6.0

_GRADS = np.array(
    [(1, 1), (-1, 1), (1, -1), (-1, -1), (1, 0), (-1, 0), (0, 1), (0, -1)],
    dtype=np.float64,
)


class GradientNoise:
    """Callable noise field; one shuffled permutation table per instance."""

    def __init__(self, seed: int):
        rng = np.random.default_rng(seed)
        perm = rng.permutation(256).astype(np.int64)
        self._perm = np.concatenate([perm, perm])

    def _corner(self, t: np.ndarray, dx: np.ndarray, dy: np.ndarray, gi: np.ndarray) -> np.ndarray:
        t = np.maximum(t, 0.0)
        t2 = t * t
        g = _GRADS[gi % 8]
        return t2 * t2 * (g[..., 0] * dx + g[..., 1] * dy)

    def __call__(self, x, y=0.0):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        x, y = np.broadcast_arrays(x, y)

        s = (x + y) * _F2
        i = np.floor(x + s).astype(np.int64)
        j = np.floor(y + s).astype(np.int64)
        t = (i + j) * _G2
        x0 = x - (i - t)
        y0 = y - (j - t)

        upper = x0 > y0  # which intermediate corner of the simplex cell
        i1 = np.where(upper, 1, 0)
        j1 = np.where(upper, 0, 1)

        x1 = x0 - i1 + _G2
        y1 = y0 - j1 + _G2
        x2 = x0 - 1.0 + 2.0 * _G2
        y2 = y0 - 1.0 + 2.0 * _G2

        ii = i & 255
        jj = j & 255
        p = self._perm
        g0 = p[ii + p[jj]]
        g1 = p[ii + i1 + p[jj + j1]]
        g2 = p[ii + 1 + p[jj + 1]]

        n0 = self._corner(0.5 - x0 * x0 - y0 * y0, x0, y0, g0)
        n1 = self._corner(0.5 - x1 * x1 - y1 * y1, x1, y1, g1)
        n2 = self._corner(0.5 - x2 * x2 - y2 * y2, x2, y2, g2)

        out = 70.0 * (n0 + n1 + n2)
        return float(out) if out.ndim == 0 else out
