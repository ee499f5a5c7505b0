"""Explicit finite-volume solver for rho_t = Lap(rho^m) + rho G(P_m(rho)).

The update is

    rho <- rho + dt * (L_h(rho^m) + rho * G(P_m(rho)))

with the conservative operator of :mod:`stiffhs.grid`.  Under the step rule
below the map is monotone (nondecreasing in every cell value), which is what
gives the discrete comparison principle, the L1 contraction and the time
monotonicity of matched data.

Only a window of cells is updated: cells outside the window are zero and have
zero neighbours, so they stay exactly zero.  The window grows by one cell
whenever the density reaches its edge, which keeps large truncated domains
cheap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .elliptic import solve_cell_problem
from .errors import ConfigurationError, ContractWarning, DomainError, NumericalError
from .grid import DensityField, dilate, sphere_area
from .model import ExteriorDensity, GrowthLaw, Omega0, check_m, density_from_pressure

UNDERSHOOT = -1e-12
EMPTY = math.inf  # sentinel for minima over an empty cell set


@dataclass(frozen=True)
class SolverConfig:
    """Step control.  ``boundary`` is ``zero-flux`` or ``dirichlet``.

    With ``dirichlet`` the outer face of a 1D grid sees the pressure
    ``boundary_pressure(t)`` (a number or a callable).
    """

    cfl_safety: float = 0.9
    dt_cap: float = 1e-2
    boundary: str = "zero-flux"
    boundary_pressure: object = 0.0

    def __post_init__(self):
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError("cfl_safety must lie in (0, 1]")
        if not self.dt_cap > 0:
            raise ConfigurationError("dt_cap must be positive")
        if self.boundary not in ("zero-flux", "dirichlet"):
            raise ConfigurationError(f"unknown boundary condition {self.boundary!r}")

    def pressure_at(self, t):
        b = self.boundary_pressure
        return float(b(t)) if callable(b) else float(b)


@dataclass(frozen=True)
class PmeState:
    rho: DensityField
    t: float
    m: float
    law: GrowthLaw
    ext: ExteriorDensity = field(default_factory=ExteriorDensity)

    def __post_init__(self):
        check_m(self.m)

    @property
    def grid(self):
        return self.rho.grid

    @property
    def pressure(self):
        r = self.rho.values
        return self.m / (self.m - 1.0) * np.power(r, self.m - 1.0)


# --------------------------------------------------------------------------
# step rule

def reaction_slope_bound(law: GrowthLaw, m, p_top):
    """max |d/drho (rho G(P_m(rho)))| over pressures in [0, p_top]."""
    if law.form == "off":
        return 0.0
    if law.form == "constant-test":
        return law.g0
    # G + (m-1) p G' = g0 (1 - m p / p_max), linear in p
    return law.g0 * max(1.0, abs(1.0 - m * p_top / law.p_max))


def stable_dt(grid, law, m, rho_max, config: SolverConfig):
    """Largest step for which the explicit update is monotone."""
    m = float(m)
    rho_max = max(float(rho_max), 0.0)
    diff = m * rho_max ** (m - 1.0)
    react = reaction_slope_bound(law, m, m / (m - 1.0) * rho_max ** (m - 1.0))
    s = config.cfl_safety
    bounds = [config.dt_cap]
    denom = diff * grid.weight_max + react
    if denom > 0:
        bounds.append(s / denom)
    if diff > 0:
        bounds.append(s * grid.dx ** 2 / (2 * grid.dim * diff))
    if react > 0:
        bounds.append(s / (2 * react))
    return min(bounds)


# --------------------------------------------------------------------------
# initial data

def bump_weights(grid, radius):
    """Normalised samples of the standard bump exp(-1/(1-s^2)) on the grid offsets."""
    k = int(math.floor(radius / grid.dx))
    off = np.arange(-k, k + 1) * grid.dx
    s = off / radius if radius > 0 else off
    w = np.where(np.abs(s) < 1, np.exp(-1.0 / np.maximum(1 - s * s, 1e-300)), 0.0)
    if w.sum() == 0:
        w = np.zeros_like(off)
        w[k] = 1.0
    return w / w.sum()


def mollify(values, grid, radius):
    """Convolve with a bump of the given radius, renormalised on the grid."""
    from scipy import ndimage

    v = np.asarray(values, dtype=float)
    w = bump_weights(grid, radius)
    if w.size == 1:
        return v.copy()
    if grid.kind == "box2d":
        k = w.size // 2
        off = np.arange(-k, k + 1) * grid.dx
        s2 = (off[:, None] ** 2 + off[None, :] ** 2) / radius ** 2
        w2 = np.where(s2 < 1, np.exp(-1.0 / np.maximum(1 - s2, 1e-300)), 0.0)
        return ndimage.convolve(v, w2 / w2.sum(), mode="nearest")
    # radial: 'reflect' mirrors about the face r = 0, i.e. rho(-r) = rho(r)
    mode = "reflect" if grid.kind == "radial" else "nearest"
    return ndimage.convolve1d(v, w, mode=mode)


def omega_mask(grid, omega0: Omega0):
    r = grid.radius
    if omega0.kind != "empty" and omega0.bounding_radius > grid.extent:
        raise DomainError("omega0 does not fit inside the grid")
    return omega0.contains(r)


def initial_pressure(grid, omega0: Omega0, law: GrowthLaw):
    """Cell-grid solve of -Lap p0 = G(p0) in omega0, zero outside."""
    mask = omega_mask(grid, omega0)
    if not mask.any():
        return np.zeros(grid.shape)
    return solve_cell_problem(grid, mask, law)


def matched_initial_density(m, omega0: Omega0, rho0_ext, law: GrowthLaw, grid,
                            p0=None) -> DensityField:
    """max(P_m^{-1}(p0), rho_E0 mollified at radius 1/m).

    ``rho0_ext`` is a radial profile (callable of |x|) or an array of cell values.
    ``p0`` may be passed to reuse one elliptic solve across several m.
    """
    m = check_m(m)
    if p0 is None:
        p0 = initial_pressure(grid, omega0, law)
    ext = rho0_ext(grid.radius) if callable(rho0_ext) else np.asarray(rho0_ext, float)
    if np.any(ext >= 1.0) or np.any(ext < 0):
        raise DomainError("exterior density must satisfy 0 <= rho_E0 < 1")
    ext_m = mollify(ext, grid, 1.0 / m) if np.any(ext > 0) else np.zeros(grid.shape)
    inner = density_from_pressure(np.maximum(p0, 0.0), m)
    return DensityField(np.maximum(inner, np.maximum(ext_m, 0.0)), grid)


def hessian_bound(values, grid):
    """Largest second derivative of a cell field, by centred differences.

    Radial fields count both Hessian eigenvalues, v'' and v'/r.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return 0.0
    h = grid.dx
    if grid.kind == "box2d":
        worst = 0.0
        for axis in (0, 1):
            d = np.gradient(v, h, axis=axis, edge_order=2)
            for axis2 in (0, 1):
                worst = max(worst, float(np.max(np.abs(np.gradient(d, h, axis=axis2, edge_order=2)))))
        return worst
    if grid.kind == "radial":
        v = np.concatenate([v[:1], v])  # mirror cell across r = 0
        r = np.concatenate([[-grid.radius[0]], grid.radius])
    else:
        r = None
    d = np.gradient(v, h, edge_order=2)
    worst = float(np.max(np.abs(np.gradient(d, h, edge_order=2))))
    if r is not None:
        worst = max(worst, float(np.max(np.abs(d[1:] / r[1:]))))
    return worst


def initial_curvature_product(m, rho0_ext, grid):
    """m (1 - delta)^m |D^2 rho_E0,m| with 1 - delta the largest exterior value.

    The matched-data construction wants this to vanish as m grows; it is
    reported, not enforced.
    """
    ext = rho0_ext(grid.radius) if callable(rho0_ext) else np.asarray(rho0_ext, float)
    top = float(np.max(ext)) if ext.size else 0.0
    if top <= 0:
        return 0.0, 0.0
    hess = hessian_bound(mollify(ext, grid, 1.0 / m), grid)
    return hess, m * top ** m * hess


# --------------------------------------------------------------------------
# diagnostics

def support_radius(p, grid, eps):
    """Largest |x| with p > eps; radial grids interpolate the crossing linearly."""
    p = np.asarray(p)
    above = p > eps
    if not above.any():
        return 0.0
    if grid.kind == "box2d":
        return float(grid.radius[above].max())
    r = grid.radius
    if grid.kind == "slab":
        return float(r[above].max())
    i = int(np.flatnonzero(above)[-1])
    if i + 1 >= p.size:
        return float(r[i])
    a, b = p[i], p[i + 1]
    return float(r[i] + (a - eps) / (a - b) * grid.dx)


@dataclass(frozen=True)
class Diagnostics:
    t: float
    mass: float
    max_p: float
    support_radius: float
    ab_min: float
    exterior_error: float

    def row(self):
        return [self.t, self.mass, self.max_p, self.support_radius, self.ab_min, self.exterior_error]


DIAGNOSTIC_COLUMNS = ["t", "mass", "max_p", "support_radius", "ab_min", "exterior_error"]


def diagnostics(state: PmeState, eps=None, margin=None) -> Diagnostics:
    """Mass, pressure max, support radius, Aronson-Benilan minimum, exterior error."""
    grid = state.grid
    rho = state.rho.values
    p = state.pressure
    eps = 1e-3 * state.law.p_max if eps is None else eps
    margin = 4 * grid.dx if margin is None else margin
    mass = float(np.sum(grid.volumes * rho))
    pos = p > eps
    if pos.any():
        w = grid.laplacian(p) + state.law(p)
        ab = float(w[pos].min())
    else:
        ab = EMPTY
    ext = state.ext.at_radius(grid.radius, state.t)
    outside = ~(dilate(pos.astype(float), grid, margin) > 0)
    ext_err = float(np.abs(rho - ext)[outside].max()) if outside.any() else 0.0
    return Diagnostics(float(state.t), mass, float(p.max()) if p.size else 0.0,
                       support_radius(p, grid, eps), ab, ext_err)


# --------------------------------------------------------------------------
# stepping

class _Runner:
    """Kernel driver for one density array with an active window."""

    def __init__(self, rho, grid, m, law, config):
        self.grid = grid
        self.m = m
        self.law = law
        self.config = config
        self.rho = np.ascontiguousarray(rho, dtype=float).copy()
        self.out = self.rho.copy()
        self.u = np.zeros_like(self.rho)
        self.clamped = 0
        self.flux = 0.0
        nz = np.nonzero(self.rho)
        if grid.kind == "box2d":
            self.win = self._window2d(nz)
        else:
            n = self.rho.size
            if nz[0].size:
                a, b = int(nz[0][0]), int(nz[0][-1]) + 1
                self.win = [max(a - 1, 0), min(b + 1, n)]
            else:
                self.win = [0, 0]
            if config.boundary == "dirichlet":
                self.win[1] = n
                self.win[0] = min(self.win[0], n - 1) if self.win[1] > self.win[0] else n - 1
        self.rho_max = float(self.rho.max()) if self.rho.size else 0.0

    def _window2d(self, nz):
        n0, n1 = self.rho.shape
        if not nz[0].size:
            return [0, 0, 0, 0]
        return [max(int(nz[0].min()) - 1, 0), min(int(nz[0].max()) + 2, n0),
                max(int(nz[1].min()) - 1, 0), min(int(nz[1].max()) + 2, n1)]

    def step(self, dt, t):
        g = self.grid
        law = self.law
        if g.kind == "box2d":
            ilo, ihi, jlo, jhi = self.win
            if ihi <= ilo or jhi <= jlo:
                return 0.0
            source, vmin, vmax, _ = kernels.step_2d(
                self.rho, self.out, self.u, self.m, dt, 1.0 / g.dx ** 2, g.dx * g.dx,
                law.form_code, law.g0, law.p_max, ilo, ihi, jlo, jhi)
            self._check(vmin, vmax, source, t)
            self.rho, self.out = self.out, self.rho
            self._grow2d()
        else:
            lo, hi = self.win
            if hi <= lo:
                return 0.0
            cp, cm = g.coefficients
            ghost_w = ghost_u = 0.0
            if self.config.boundary == "dirichlet":
                ghost_w = g.outer_face_weight
                ghost_u = density_from_pressure(self.config.pressure_at(t), self.m) ** self.m
            source, vmin, vmax, flux = kernels.step_1d(
                self.rho, self.out, self.u, cp, cm, g.volumes, self.m, dt,
                law.form_code, law.g0, law.p_max, lo, hi, ghost_w, ghost_u)
            self._check(vmin, vmax, source, t)
            self.flux += flux * dt
            self.rho, self.out = self.out, self.rho
            n = self.rho.size
            if lo > 0 and self.rho[lo] != 0.0:
                self.win[0] = lo - 1
            if hi < n and self.rho[hi - 1] != 0.0:
                self.win[1] = hi + 1
        return source * dt

    def _grow2d(self):
        ilo, ihi, jlo, jhi = self.win
        r = self.rho
        n0, n1 = r.shape
        if ilo > 0 and r[ilo, jlo:jhi].any():
            self.win[0] = ilo - 1
        if ihi < n0 and r[ihi - 1, jlo:jhi].any():
            self.win[1] = ihi + 1
        if jlo > 0 and r[ilo:ihi, jlo].any():
            self.win[2] = jlo - 1
        if jhi < n1 and r[ilo:ihi, jhi - 1].any():
            self.win[3] = jhi + 1

    def _check(self, vmin, vmax, source, t):
        if not (vmin >= UNDERSHOOT) or not math.isfinite(vmax) or not math.isfinite(source):
            bad = self.out
            dump = {"t": t, "min": float(np.nanmin(bad)) if np.isfinite(bad).any() else None,
                    "nan_cells": int(np.isnan(bad).sum()), "window": list(self.win),
                    "rho": self.rho.copy()}
            raise NumericalError(
                f"explicit step failed at t={t:.6g}: min density {vmin:.3e}, max {vmax:.3e}", dump)
        if vmin < 0:
            sl = self._slices()
            neg = self.out[sl] < 0
            self.clamped += int(neg.sum())
            self.out[sl][neg] = 0.0
        self.rho_max = vmax if vmax > 0 else 0.0

    def _slices(self):
        if self.grid.kind == "box2d":
            ilo, ihi, jlo, jhi = self.win
            return (slice(ilo, ihi), slice(jlo, jhi))
        return slice(self.win[0], self.win[1])


def step(state: PmeState, config: SolverConfig, dt=None) -> PmeState:
    """One explicit step; ``dt`` defaults to the stable step for this state."""
    limit = stable_dt(state.grid, state.law, state.m, state.rho.values.max(initial=0.0), config)
    if dt is None:
        dt = limit
    elif dt > limit * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt:.3e} exceeds the monotone step limit {limit:.3e}")
    runner = _Runner(state.rho.values, state.grid, state.m, state.law, config)
    runner.step(dt, state.t)
    return replace(state, rho=DensityField(runner.rho, state.grid), t=state.t + dt)


def step_semi_implicit(state: PmeState, config: SolverConfig, dt):
    """Placeholder for a linearly implicit variant; not implemented."""
    raise NotImplementedError("semi-implicit stepping is deferred; use step()")


# --------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    grid: object
    m: float
    law: GrowthLaw
    ext: ExteriorDensity
    times: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    source: list = field(default_factory=list)  # cumulative exact source integral
    flux: list = field(default_factory=list)  # cumulative boundary inflow
    source_rate: list = field(default_factory=list)
    steps: int = 0
    dt_min: float = math.inf
    dt_max: float = 0.0
    clamped: int = 0
    cap_violations: int = 0
    eps: float | None = None
    margin: float | None = None

    def state(self, k) -> PmeState:
        return PmeState(DensityField(self.rho[k], self.grid), self.times[k], self.m, self.law, self.ext)

    def pressure(self, k):
        return self.m / (self.m - 1.0) * np.power(self.rho[k], self.m - 1.0)

    def mass(self, k):
        return float(np.sum(self.grid.volumes * self.rho[k]))

    @property
    def diagnostics(self):
        return [diagnostics(self.state(k), self.eps, self.margin) for k in range(len(self.times))]

    def mass_balance(self):
        """Mass change minus recorded source and flux, relative to initial mass."""
        m0 = self.mass(0)
        out = {"mass0": m0, "massT": self.mass(-1), "source": self.source[-1],
               "flux": self.flux[-1]}
        out["source_trapezoid"] = float(np.trapezoid(self.source_rate, self.times)) if len(self.times) > 1 else 0.0
        scale = m0 if m0 > 0 else 1.0
        out["defect"] = (out["massT"] - m0 - out["source"] - out["flux"]) / scale
        out["defect_trapezoid"] = (out["massT"] - m0 - out["source_trapezoid"] - out["flux"]) / scale
        return out


def _source_rate(grid, rho, m, law):
    p = m / (m - 1.0) * np.power(rho, m - 1.0)
    return float(np.sum(grid.volumes * rho * law(p)))


def run_lockstep(initial, grid, m, law: GrowthLaw, ext: ExteriorDensity, times,
                 config: SolverConfig | None = None, t0=0.0, pressure_cap=True,
                 eps=None, margin=None):
    """Evolve several initial densities with one shared step sequence.

    Sharing the steps makes cellwise comparisons between the runs exact
    consequences of the monotone update.  Returns one :class:`Trajectory` each.
    """
    m = check_m(m)
    config = config or SolverConfig()
    times = [float(t) for t in times]
    if any(t < t0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise DomainError("output times must be sorted and not before t0")
    runners = [_Runner(np.asarray(getattr(r, "values", r)), grid, m, law, config) for r in initial]
    trajs = [Trajectory(grid, m, law, ext, eps=eps, margin=margin) for _ in runners]
    cum = [0.0] * len(runners)
    cap = None
    if pressure_cap and law.form == "linear":
        from .barriers import make_decay_supersolution
        top = max(m / (m - 1.0) * r.rho_max ** (m - 1.0) for r in runners)
        cap = make_decay_supersolution(m, top, law, strict=False)

    t = float(t0)
    steps = 0
    dt_min, dt_max = math.inf, 0.0
    for target in times:
        while t < target:
            rmax = max(r.rho_max for r in runners)
            dt = stable_dt(grid, law, m, rmax, config)
            last = t + dt >= target
            if last:
                dt = target - t
            for k, r in enumerate(runners):
                cum[k] += r.step(dt, t)
            t = target if last else t + dt
            steps += 1
            dt_min, dt_max = min(dt_min, dt), max(dt_max, dt)
        for k, (r, tr) in enumerate(zip(runners, trajs)):
            tr.times.append(t)
            tr.rho.append(r.rho.copy())
            tr.source.append(cum[k])
            tr.flux.append(r.flux)
            tr.source_rate.append(_source_rate(grid, r.rho, m, law))
            if cap is not None:
                top = m / (m - 1.0) * r.rho_max ** (m - 1.0)
                if top > cap.value(t) + 1e-3:
                    tr.cap_violations += 1
                    warnings.warn(f"pressure {top:.4g} exceeds decay cap {cap.value(t):.4g} at t={t:.4g}",
                                  ContractWarning, stacklevel=2)
    for r, tr in zip(runners, trajs):
        tr.steps = steps
        tr.dt_min, tr.dt_max = dt_min, dt_max
        tr.clamped = r.clamped
    return trajs


def run(scenario, m, config: SolverConfig | None = None, initial=None) -> Trajectory:
    """Matched-data run of a scenario at one stiffness value."""
    scenario.validate()
    if config is None:
        config = SolverConfig(scenario.cfl_safety, scenario.dt_cap)
    grid = scenario.grid()
    ext = scenario.exterior_density
    t0 = 0.0
    if initial is None and scenario.initial == "barenblatt":
        t0 = scenario.times()[0]
        initial = barenblatt_exact(grid.radius, t0, m, scenario.total_mass, scenario.dimension)
    elif initial is None:
        initial = matched_initial_density(m, scenario.omega0, scenario.exterior, scenario.growth, grid)
    margin = scenario.margin_cells * grid.dx
    return run_lockstep([initial], grid, m, scenario.growth, ext, scenario.times(), config, t0=t0,
                        eps=scenario.support_threshold, margin=margin)[0]


# --------------------------------------------------------------------------
# Barenblatt profile (G = 0)

def barenblatt_constants(m, n):
    alpha = n / (n * (m - 1.0) + 2.0)
    beta = alpha / n
    k = alpha * (m - 1.0) / (2.0 * m * n)
    return alpha, beta, k


def barenblatt_level(m, total_mass, n):
    """Constant C giving the requested total mass."""
    from scipy.special import beta as beta_fn

    _, _, k = barenblatt_constants(m, n)
    q = 1.0 / (m - 1.0)
    unit = sphere_area(n) * k ** (-n / 2.0) * 0.5 * beta_fn(n / 2.0, q + 1.0)
    return (total_mass / unit) ** (1.0 / (n / 2.0 + q))


def barenblatt_exact(x, t, m, total_mass, n):
    """Self-similar source solution of rho_t = Lap(rho^m) in dimension n.

    ``x`` holds distances from the centre, or coordinates along a trailing axis
    of length ``n`` when ``n > 1``.
    """
    if t <= 0:
        raise DomainError("Barenblatt profile needs t > 0")
    m = check_m(m)
    x = np.asarray(x, dtype=float)
    if n > 1 and x.ndim >= 1 and x.shape[-1] == n:
        r2 = np.sum(x * x, axis=-1)
    else:
        r2 = x * x
    alpha, beta, k = barenblatt_constants(m, n)
    c = barenblatt_level(m, total_mass, n)
    base = np.maximum(c - k * r2 * t ** (-2 * beta), 0.0)
    out = t ** (-alpha) * base ** (1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


def barenblatt_radius(t, m, total_mass, n):
    _, beta, k = barenblatt_constants(m, n)
    return math.sqrt(barenblatt_level(m, total_mass, n) / k) * t ** beta
