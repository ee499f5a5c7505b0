"""Quasi-static pressure problem -Laplace(p) = G(p) with Dirichlet data.

Two discretisations live here:

* :func:`solve_radial` works on a node grid spanning ``[r_inner, r_outer]`` and
  uses the conservative radial operator ``r^{1-n} D(r^{n-1} D p)``; the origin
  is handled by reflection, which gives ``-2n (p_1 - p_0) / h^2`` there.
* :func:`solve_cell_problem` works on the cell grids of :mod:`stiffhs.grid`
  with exactly the PME Laplacian, so that matched initial data are discrete
  subsolutions of the time stepper.  Dirichlet data are imposed by fixing the
  cells outside the mask (no cut-cell fitting, first order at the boundary).

Both use damped Newton from ``p = 0``.  Because ``G`` is nonincreasing, the
Jacobian is an M-matrix and the iteration converges in a handful of steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .errors import DomainError, SolverError
from .grid import Grid2D, PressureField
from .model import GrowthLaw

MAX_NEWTON = 50
TOL = 1e-10


@dataclass(frozen=True)
class RadialProfile:
    n: int
    r_inner: float
    r_outer: float
    samples: np.ndarray
    bc_inner: float | None
    bc_outer: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def r(self):
        return np.linspace(self.r_inner, self.r_outer, self.samples.size)

    @property
    def h(self):
        return (self.r_outer - self.r_inner) / (self.samples.size - 1)

    def __call__(self, r):
        return np.interp(r, self.r, self.samples, left=0.0, right=0.0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "p"])
            for r, p in zip(self.r, self.samples):
                w.writerow([f"{r:.17g}", f"{p:.17g}"])


def _radial_operator(n, r, h, symmetric):
    """Tridiagonal coefficients (lower, diag, upper) of -r^{1-n}D(r^{n-1}D)."""
    rp = (r + 0.5 * h) ** (n - 1)
    rm = np.abs(r - 0.5 * h) ** (n - 1)
    # shell volume / (|S^{n-1}| h); exact on quadratics for every n
    shell = ((r + 0.5 * h) ** n - np.sign(r - 0.5 * h) * np.abs(r - 0.5 * h) ** n) / (n * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = -rp / (shell * h * h)
        lo = -rm / (shell * h * h)
    if symmetric:
        up[0] = -2.0 * n / (h * h)
        lo[0] = 0.0
    diag = -(up + lo)
    return lo, diag, up


def _residual_norm(F):
    return float(np.max(np.abs(F))) if F.size else 0.0


def solve_radial(n, r_inner, r_outer, bc_inner, bc_outer, law: GrowthLaw, grid_points,
                 tol=TOL, max_iter=MAX_NEWTON) -> RadialProfile:
    """Solve -Delta p = G(p) on a radial shell (or ball when ``bc_inner is None``).

    ``bc_inner=None`` with ``r_inner == 0`` imposes the symmetry condition
    p'(0) = 0; any number is used as Dirichlet data at ``r_inner``.
    """
    if not r_outer > r_inner >= 0:
        raise DomainError("need r_outer > r_inner >= 0")
    if grid_points < 16:
        raise DomainError("grid_points must be at least 16")
    symmetric = bc_inner is None
    if symmetric and r_inner != 0:
        raise DomainError("symmetry condition only applies at r = 0")
    if bc_outer < 0 or (not symmetric and bc_inner < 0):
        raise DomainError("boundary data must be nonnegative")

    N = int(grid_points)
    r = np.linspace(r_inner, r_outer, N)
    h = (r_outer - r_inner) / (N - 1)
    lo, diag, up = _radial_operator(n, r, h, symmetric)

    p = np.zeros(N)
    p[-1] = bc_outer
    if not symmetric:
        p[0] = bc_inner
    first = 0 if symmetric else 1
    idx = slice(first, N - 1)

    def residual(q):
        F = diag * q + G_of(q)
        F[1:] += lo[1:] * q[:-1]
        F[:-1] += up[:-1] * q[1:]
        return F[idx]

    def G_of(q):
        return -law(q)

    # the roundoff floor of the discrete operator can exceed TOL on fine grids
    tol = max(tol, 64 * np.finfo(float).eps * (1.0 + max(bc_outer, bc_inner or 0.0, law.p_max)) / h ** 2)
    F = residual(p)
    res = _residual_norm(F)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise SolverError(f"Newton failed after {it} iterations", res, it)
        d = diag[idx] - law.derivative(p[idx])
        ab = np.zeros((3, d.size))
        ab[0, 1:] = up[idx][:-1]
        ab[1] = d
        ab[2, :-1] = lo[idx][1:]
        step = solve_banded((1, 1), ab, -F)
        lam = 1.0
        while True:
            trial = p.copy()
            trial[idx] += lam * step
            Ft = residual(trial)
            rt = _residual_norm(Ft)
            if rt < res or lam < 1e-6:
                break
            lam *= 0.5
        p, F, res = trial, Ft, rt
        it += 1
    return RadialProfile(int(n), float(r_inner), float(r_outer), p,
                         None if symmetric else float(bc_inner), float(bc_outer), it, res)


def boundary_gradient(profile: RadialProfile, side: str) -> float:
    """|p_r| at an endpoint by the one-sided second-order difference."""
    p = profile.samples
    if p.size < 3:
        raise DomainError("profile needs at least 3 points")
    h = profile.h
    if side == "outer":
        d = (3 * p[-1] - 4 * p[-2] + p[-3]) / (2 * h)
    elif side == "inner":
        d = (-3 * p[0] + 4 * p[1] - p[2]) / (2 * h)
    else:
        raise DomainError("side must be 'inner' or 'outer'")
    return abs(float(d))


# --------------------------------------------------------------------------
# cell-grid problems

def solve_cell_problem(grid, mask, law: GrowthLaw, boundary=None, tol=1e-9,
                       max_iter=MAX_NEWTON) -> np.ndarray:
    """Solve the cell-grid problem on ``mask``; cells outside carry ``boundary``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise DomainError("mask shape does not match grid")
    p = np.zeros(grid.shape) if boundary is None else np.array(boundary, dtype=float)
    if np.any(p < 0):
        raise DomainError("boundary data must be nonnegative")
    if not mask.any():
        return p if boundary is not None else np.zeros(grid.shape)
    p[mask] = 0.0

    flat = mask.ravel()
    unknown = np.flatnonzero(flat)
    index = -np.ones(flat.size, dtype=np.int64)
    index[unknown] = np.arange(unknown.size)
    rows, cols, w = grid.neighbours()
    keep = flat[rows]
    rows, cols, w = rows[keep], cols[keep], w[keep]
    diag = np.bincount(index[rows], weights=w, minlength=unknown.size)
    inner = flat[cols]
    A = sparse.csr_matrix((-w[inner], (index[rows[inner]], index[cols[inner]])),
                          shape=(unknown.size, unknown.size))
    A = A + sparse.diags(diag)
    pf = p.ravel()
    fixed = np.bincount(index[rows[~inner]], weights=w[~inner] * pf[cols[~inner]],
                        minlength=unknown.size)

    x = np.zeros(unknown.size)

    def residual(v):
        return A @ v - fixed - law(v)

    F = residual(x)
    res = _residual_norm(F)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise SolverError(f"Newton failed after {it} iterations", res, it)
        J = A - sparse.diags(law.derivative(x) * np.ones(x.size))
        step = spsolve(J.tocsc(), -F)
        lam = 1.0
        while True:
            trial = x + lam * step
            Ft = residual(trial)
            rt = _residual_norm(Ft)
            if rt < res or lam < 1e-6:
                break
            lam *= 0.5
        x, F, res = trial, Ft, rt
        it += 1
    pf = pf.copy()
    pf[unknown] = x
    return pf.reshape(grid.shape)


@dataclass(frozen=True)
class DomainMask:
    """Open set on a 2D box (cells whose centres lie inside) with boundary values."""

    grid: Grid2D
    mask: np.ndarray
    boundary: np.ndarray | None = None

    @property
    def components(self):
        _, count = ndimage.label(self.mask)
        return count

    @classmethod
    def disc(cls, grid, radius, center=(0.0, 0.0)):
        x, y = grid.mesh
        return cls(grid, np.hypot(x - center[0], y - center[1]) < radius)

    @classmethod
    def annulus(cls, grid, inner, outer, center=(0.0, 0.0)):
        x, y = grid.mesh
        r = np.hypot(x - center[0], y - center[1])
        return cls(grid, (r > inner) & (r < outer))


def solve_cartesian_2d(mask: DomainMask, law: GrowthLaw) -> PressureField:
    """Five-point Newton solve on a 2D mask; the empty mask yields zeros."""
    grid = mask.grid
    if not np.any(mask.mask):
        return PressureField(np.zeros(grid.shape), grid)
    values = solve_cell_problem(grid, mask.mask, law, mask.boundary)
    return PressureField(values, grid)
