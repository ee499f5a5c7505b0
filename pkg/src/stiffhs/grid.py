"""Uniform cell-centred grids and their conservative Laplacians.

Three layouts are supported: a symmetric 1D slab ``[-L, L]``, a radial grid on
``[0, R]`` carrying a dimension parameter ``n``, and a square 2D box
``[-L, L]^2``.  All of them expose the same finite-volume operator

    (L u)_i = sum_j w_ij (u_j - u_i),   w_ij >= 0,

with zero flux through the outer boundary, so that ``sum_i V_i (L u)_i = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError


def sphere_area(n):
    """Surface measure of the unit sphere S^{n-1} (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class Grid1D:
    """Three-point grid; ``kind`` is ``"slab"`` or ``"radial"``."""

    kind: str
    n: int
    dx: float
    cells: int
    extent: float

    @property
    def shape(self):
        return (self.cells,)

    @property
    def dim(self):
        return 1 if self.kind == "slab" else self.n

    @cached_property
    def centers(self):
        i = np.arange(self.cells)
        if self.kind == "slab":
            return -self.extent + (i + 0.5) * self.dx
        return (i + 0.5) * self.dx

    @cached_property
    def radius(self):
        return np.abs(self.centers)

    @cached_property
    def volumes(self):
        if self.kind == "slab":
            return np.full(self.cells, self.dx)
        faces = np.arange(self.cells + 1) * self.dx
        return sphere_area(self.n) / self.n * np.diff(faces ** self.n)

    @cached_property
    def face_areas(self):
        """Areas of the faces i-1/2 .. N-1/2 (length cells + 1)."""
        if self.kind == "slab":
            return np.ones(self.cells + 1)
        faces = np.arange(self.cells + 1) * self.dx
        return sphere_area(self.n) * faces ** (self.n - 1)

    @cached_property
    def coefficients(self):
        """(cp, cm): weights towards the right / left neighbour, zero flux at ends."""
        a = self.face_areas.copy()
        a[0] = 0.0
        a[-1] = 0.0
        cp = a[1:] / (self.volumes * self.dx)
        cm = a[:-1] / (self.volumes * self.dx)
        return np.ascontiguousarray(cp), np.ascontiguousarray(cm)

    @cached_property
    def outer_face_weight(self):
        """Weight of a Dirichlet ghost beyond the last cell."""
        return self.face_areas[-1] / (self.volumes[-1] * self.dx)

    @cached_property
    def weight_max(self):
        cp, cm = self.coefficients
        return float(np.max(cp + cm))

    def laplacian(self, u, ghost=None):
        cp, cm = self.coefficients
        out = np.zeros_like(u)
        du = np.diff(u)
        out[:-1] += cp[:-1] * du
        out[1:] -= cm[1:] * du
        if ghost is not None:
            out[-1] += self.outer_face_weight * (ghost - u[-1])
        return out

    def neighbours(self):
        """Sparse (rows, cols, weights) of the off-diagonal stencil."""
        cp, cm = self.coefficients
        i = np.arange(self.cells - 1)
        rows = np.concatenate([i, i + 1])
        cols = np.concatenate([i + 1, i])
        w = np.concatenate([cp[:-1], cm[1:]])
        return rows, cols, w


@dataclass(frozen=True)
class Grid2D:
    """Square box ``[-L, L]^2`` with the five-point stencil."""

    dx: float
    cells: int
    extent: float
    center: tuple = (0.0, 0.0)
    kind: str = "box2d"
    n: int = 2

    @property
    def shape(self):
        return (self.cells, self.cells)

    @property
    def dim(self):
        return 2

    @cached_property
    def axis(self):
        return -self.extent + (np.arange(self.cells) + 0.5) * self.dx

    @cached_property
    def mesh(self):
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def radius(self):
        x, y = self.mesh
        return np.hypot(x - self.center[0], y - self.center[1])

    @cached_property
    def volumes(self):
        return np.full(self.shape, self.dx * self.dx)

    @property
    def weight_max(self):
        return 4.0 / self.dx ** 2

    def laplacian(self, u, ghost=None):
        out = np.zeros_like(u)
        h2 = self.dx * self.dx
        d0 = np.diff(u, axis=0) / h2
        d1 = np.diff(u, axis=1) / h2
        out[:-1, :] += d0
        out[1:, :] -= d0
        out[:, :-1] += d1
        out[:, 1:] -= d1
        return out

    def neighbours(self):
        nn = self.cells
        idx = np.arange(nn * nn).reshape(nn, nn)
        pairs = [
            (idx[:-1, :], idx[1:, :]),
            (idx[:, :-1], idx[:, 1:]),
        ]
        rows, cols = [], []
        for a, b in pairs:
            rows += [a.ravel(), b.ravel()]
            cols += [b.ravel(), a.ravel()]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        return rows, cols, np.full(rows.size, 1.0 / self.dx ** 2)


def make_grid(geometry, n, dx, extent, center=(0.0, 0.0)):
    """Build the grid for a geometry; ``extent`` is half-width or outer radius."""
    if dx <= 0 or extent <= 0:
        raise DomainError("dx and extent must be positive")
    if geometry == "radial":
        cells = int(math.ceil(extent / dx - 1e-9))
        return Grid1D("radial", int(n), dx, cells, cells * dx)
    if geometry == "slab":
        half = int(math.ceil(extent / dx - 1e-9))
        return Grid1D("slab", 1, dx, 2 * half, half * dx)
    if geometry == "box2d":
        half = int(math.ceil(extent / dx - 1e-9))
        return Grid2D(dx, 2 * half, half * dx, tuple(center))
    raise DomainError(f"unknown geometry {geometry!r}")


@dataclass(frozen=True)
class DensityField:
    values: np.ndarray
    grid: object

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise DomainError("field shape does not match grid")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("field values must be finite and nonnegative")


class PressureField(DensityField):
    pass


def dilate(values, grid, radius):
    """Cellwise max over the closed discrete ball of ``radius`` (reflect at r=0)."""
    from scipy import ndimage

    v = np.asarray(values, dtype=float)
    k = int(math.floor(radius / grid.dx + 1e-9))
    if k <= 0:
        return v.copy()
    if grid.kind == "box2d":
        off = np.arange(-k, k + 1)
        disc = off[:, None] ** 2 + off[None, :] ** 2 <= k * k
        return ndimage.maximum_filter(v, footprint=disc, mode="constant", cval=-np.inf)
    if grid.kind == "radial":
        # mirror the first k cells so that the window sees r -> -r
        padded = np.concatenate([v[:k][::-1], v, np.full(k, -np.inf)])
    else:
        padded = np.concatenate([np.full(k, -np.inf), v, np.full(k, -np.inf)])
    win = np.lib.stride_tricks.sliding_window_view(padded, 2 * k + 1)
    return win.max(axis=1)
