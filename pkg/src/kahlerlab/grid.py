"""Periodic grid domains for flat-torus models.

A domain with complex dimension ``n`` is discretized on ``2n`` real axes in
interleaved order ``(x_0, y_0, x_1, y_1, ...)`` where ``z_j = x_j + i y_j``.
Every axis is periodic; fields live on the flat index of the C-ordered grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDomainError


@dataclass(frozen=True)
class GridDomain:
    """Uniform periodic grid on a real 2n-torus.

    Parameters
    ----------
    complex_dim : int
        Complex dimension n >= 1 (2n real axes).
    resolution : tuple of int
        Nodes per real axis, each >= 4.
    side_lengths : tuple of float
        Torus period per real axis, each > 0.
    """

    complex_dim: int
    resolution: tuple
    side_lengths: tuple

    def __post_init__(self):
        n = self.complex_dim
        if n < 1:
            raise InvalidDomainError(f"complex dimension must be >= 1, got {n}")
        res = tuple(int(r) for r in self.resolution)
        sides = tuple(float(s) for s in self.side_lengths)
        if len(res) != 2 * n or len(sides) != 2 * n:
            raise InvalidDomainError(
                f"expected {2 * n} axes, got resolution {res} and sides {sides}"
            )
        if any(r < 4 for r in res):
            raise InvalidDomainError(f"resolution must be >= 4 per axis, got {res}")
        if any(s <= 0 for s in sides):
            raise InvalidDomainError(f"degenerate side length in {sides}")
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "side_lengths", sides)

    @classmethod
    def cube(cls, complex_dim, resolution, side=1.0):
        """Isotropic domain: same resolution and side on every real axis."""
        axes = 2 * complex_dim
        sides = (side,) * axes if np.isscalar(side) else tuple(side)
        return cls(complex_dim, (resolution,) * axes, sides)

    @property
    def num_axes(self):
        return 2 * self.complex_dim

    @property
    def shape(self):
        return self.resolution

    @property
    def num_nodes(self):
        return int(np.prod(self.resolution))

    @property
    def spacings(self):
        return tuple(s / r for s, r in zip(self.side_lengths, self.resolution))

    @property
    def cell_volume(self):
        """Coordinate volume per node; uniform weights are the periodic trapezoid rule."""
        return float(np.prod(self.spacings))

    def coordinates(self):
        """Node coordinates, shape (num_nodes, 2n)."""
        axes = [np.arange(r) * h for r, h in zip(self.resolution, self.spacings)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def reshape(self, u):
        return np.asarray(u).reshape(self.shape)

    def shift(self, u, axis, step):
        """Field values at the node displaced by ``step`` cells along ``axis``."""
        return np.roll(self.reshape(u), -step, axis=axis).ravel()

    def neighbor_indices(self, offsets):
        """Flat index of the neighbor at integer ``offsets`` (one per axis)."""
        idx = np.arange(self.num_nodes).reshape(self.shape)
        for axis, step in enumerate(offsets):
            if step:
                idx = np.roll(idx, -step, axis=axis)
        return idx.ravel()

    def integrate(self, field):
        """Coordinate-measure integral of a nodal field."""
        return float(np.sum(field) * self.cell_volume)

    def axis_pairs(self):
        """All unordered real-axis pairs (a, b), a < b."""
        m = self.num_axes
        return [(a, b) for a in range(m) for b in range(a + 1, m)]
