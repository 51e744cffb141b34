"""Regular periodic grids on the unit torus (d <= 3)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TorusGrid:
    d: int
    n: int

    @property
    def size(self):
        return self.n ** self.d

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def centers(self):
        g = np.arange(self.n) / self.n
        if self.d == 1:
            return g[:, None]
        mesh = np.meshgrid(*([g] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def flat_index(self, multi):
        """Flatten per-axis indices (..., d) into linear cell indices."""
        multi = np.asarray(multi)
        idx = multi[..., 0] % self.n
        for a in range(1, self.d):
            idx = idx * self.n + (multi[..., a] % self.n)
        return idx

    def cell_of(self, points):
        """Linear index of the cell containing each point (mod 1)."""
        pts = np.asarray(points, dtype=float)
        multi = np.floor(pts * self.n).astype(np.int64)
        return self.flat_index(multi)

    def neighbor(self, idx, axis, step):
        """Linear indices shifted by ``step`` cells along ``axis`` (periodic)."""
        idx = np.asarray(idx)
        stride = self.n ** (self.d - 1 - axis)
        along = (idx // stride) % self.n
        return idx + ((along + step) % self.n - along) * stride

    def interp_weights(self, points):
        """Periodic multilinear interpolation stencil.

        Returns (indices, weights) with shapes (m, 2^d); weights are
        nonnegative and sum to one per point.
        """
        pts = np.asarray(points, dtype=float) * self.n
        base = np.floor(pts).astype(np.int64)
        frac = pts - base
        m = pts.shape[0]
        ncorn = 1 << self.d
        idx = np.empty((m, ncorn), dtype=np.int64)
        wts = np.empty((m, ncorn))
        for corner in range(ncorn):
            offs = [(corner >> a) & 1 for a in range(self.d)]
            multi = base + np.asarray(offs)[None, :]
            idx[:, corner] = self.flat_index(multi)
            w = np.ones(m)
            for a in range(self.d):
                w = w * (frac[:, a] if offs[a] else 1.0 - frac[:, a])
            wts[:, corner] = w
        return idx, wts
