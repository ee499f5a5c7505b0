"""Stiff-limit experiments: m sweeps against the front reference and structure checks."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError
from .front import FrontTrajectory, run_front
from .grid import dilate, sphere_area
from .pme import (SolverConfig, Trajectory, initial_curvature_product, initial_pressure,
                  matched_initial_density, run_lockstep,
                  support_radius)

COMPARE_TOL = 1e-12
CONTRACTION_SLACK = 1e-2
MONOTONE_TOL = 1e-10


# --------------------------------------------------------------------------
# field operations

def sup_convolution(field_, sigma):
    """Cellwise max over the discrete ball of radius ``sigma``."""
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    cls = type(field_)
    out = dilate(field_.values, field_.grid, sigma)
    return cls(out, field_.grid)


def _l1(grid, v):
    return float(np.sum(grid.volumes * np.abs(v)))


def _same_setup(a: Trajectory, b: Trajectory):
    if a.grid != b.grid or a.rho[0].shape != b.rho[0].shape:
        raise DomainError("runs live on different grids")
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-14):
        raise DomainError("runs have different output times")
    if a.m != b.m or a.law != b.law:
        raise DomainError("runs use different parameters")


def l1_contraction_check(run_a: Trajectory, run_b: Trajectory):
    """||rho_a - rho_b||_1 / (e^{g0 t} ||rho_a(0) - rho_b(0)||_1) at each snapshot."""
    _same_setup(run_a, run_b)
    grid = run_a.grid
    g0 = run_a.law.rate_at_zero
    t0 = run_a.times[0]
    d0 = _l1(grid, run_a.rho[0] - run_b.rho[0])
    ratios, diffs = [], []
    for k, t in enumerate(run_a.times):
        d = _l1(grid, run_a.rho[k] - run_b.rho[k])
        diffs.append(d)
        ratios.append(0.0 if d0 == 0 else d / (math.exp(g0 * (t - t0)) * d0))
    worst = max(ratios) if ratios else 0.0
    return {"times": list(run_a.times), "l1": diffs, "ratio": ratios, "max_ratio": worst,
            "flagged": worst > 1 + CONTRACTION_SLACK}


def comparison_check(run_a: Trajectory, run_b: Trajectory):
    """(ordered, worst) where ordered means rho_a <= rho_b + 1e-12 at every snapshot.

    Initial data ordered the wrong way round give (False, violation); data
    that are not ordered either way violate the precondition.
    """
    _same_setup(run_a, run_b)
    a0, b0 = run_a.rho[0], run_b.rho[0]
    if np.any(a0 > b0) and np.any(b0 > a0):
        raise DomainError("initial data are not ordered")
    worst = max(float(np.max(a - b)) for a, b in zip(run_a.rho, run_b.rho))
    worst = max(worst, 0.0)
    return worst <= COMPARE_TOL, worst


def time_monotonicity(traj: Trajectory):
    """Cellwise min of rho(t_{k+1}) - rho(t_k) over consecutive snapshots."""
    if len(traj.rho) < 2:
        return math.inf
    return min(float(np.min(b - a)) for a, b in zip(traj.rho, traj.rho[1:]))


# --------------------------------------------------------------------------
# perimeter and band measure

def _segment_length(p, eps, dx):
    """Total length of the eps contour of a 2D field (marching squares)."""
    a = p[:-1, :-1]
    b = p[1:, :-1]
    c = p[1:, 1:]
    d = p[:-1, 1:]
    # crossing points on the four cell edges, in cell-local units
    corners = [(a, b, (0, 0), (1, 0)), (b, c, (1, 0), (1, 1)), (c, d, (1, 1), (0, 1)),
               (d, a, (0, 1), (0, 0))]
    pts = []
    hits = []
    for u, v, s, e in corners:
        hit = (u > eps) != (v > eps)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lam = np.where(hit, (eps - u) / (v - u), 0.0)
        x = s[0] + lam * (e[0] - s[0])
        y = s[1] + lam * (e[1] - s[1])
        pts.append((x, y))
        hits.append(hit)
    count = sum(h.astype(int) for h in hits)
    total = 0.0
    # two crossings: one segment joining them
    two = count == 2
    if two.any():
        xs = np.stack([np.where(h, pt[0], np.nan) for h, pt in zip(hits, pts)])[:, two]
        ys = np.stack([np.where(h, pt[1], np.nan) for h, pt in zip(hits, pts)])[:, two]
        order = np.argsort(np.isnan(xs), axis=0, kind="stable")[:2]
        x2 = np.take_along_axis(xs, order, 0)
        y2 = np.take_along_axis(ys, order, 0)
        total += float(np.sum(np.hypot(x2[0] - x2[1], y2[0] - y2[1])))
    # saddle: pair the crossings by the centre value
    four = count == 4
    if four.any():
        centre = 0.25 * (a + b + c + d)[four]
        x = [pt[0][four] for pt in pts]
        y = [pt[1][four] for pt in pts]
        above_a = a[four] > eps
        join_ab = above_a == (centre > eps)
        # centre on a's side: a and c connect, so the segments cut off b and d
        l1 = np.hypot(x[0] - x[3], y[0] - y[3]) + np.hypot(x[1] - x[2], y[1] - y[2])
        l2 = np.hypot(x[0] - x[1], y[0] - y[1]) + np.hypot(x[2] - x[3], y[2] - y[3])
        total += float(np.sum(np.where(join_ab, l2, l1)))
    return total * dx


def contour_length(p, grid, eps):
    if grid.kind != "box2d":
        raise DomainError("contour length needs a 2D field")
    return _segment_length(np.asarray(p, dtype=float), eps, grid.dx)


def _radial_perimeter(p, grid, eps):
    n = grid.n
    above = p > eps
    if not above.any():
        return 0.0
    edges = np.flatnonzero(np.diff(above.astype(int)))
    total = 0.0
    r = grid.radius
    for i in edges:
        a, b = p[i], p[i + 1]
        x = r[i] + (a - eps) / (a - b) * grid.dx
        total += sphere_area(n) * x ** (n - 1)
    if above[-1]:
        total += sphere_area(n) * grid.extent ** (n - 1)
    return float(total)


def perimeter_series(trajectory, eps=None):
    """Perimeter of {p > eps} per snapshot plus the band {eps/2 < p < 2 eps}.

    Radial PME fields use interpolated crossings and exact sphere areas; 2D
    fields use marching squares.  Front trajectories sum sphere areas over
    component endpoints.
    """
    if isinstance(trajectory, FrontTrajectory):
        n = trajectory.setup.n
        per = []
        for s in trajectory.states:
            total = 0.0
            for c in s.components:
                if c.left_kind != "center":
                    total += sphere_area(n) * c.left ** (n - 1)
                total += sphere_area(n) * c.right ** (n - 1)
            per.append(total)
        return {"times": trajectory.times, "perimeter": per}
    grid = trajectory.grid
    eps = trajectory.eps if eps is None else eps
    if eps is None:
        eps = 1e-3 * trajectory.law.p_max
    per, band = [], []
    for k in range(len(trajectory.times)):
        p = trajectory.pressure(k)
        if grid.kind == "box2d":
            per.append(contour_length(p, grid, eps))
        elif grid.kind == "radial":
            per.append(_radial_perimeter(p, grid, eps))
        else:
            raise DomainError("perimeter needs a radial or 2D trajectory")
        inband = (p > eps / 2) & (p < 2 * eps)
        band.append(float(np.sum(grid.volumes[inband])))
    t = np.asarray(trajectory.times)
    measure = float(np.trapezoid(band, t)) if len(t) > 1 else 0.0
    return {"times": list(trajectory.times), "perimeter": per, "band_area": band,
            "band_measure": measure, "eps": eps}


# --------------------------------------------------------------------------
# front speed

def _ls_slope(t, y):
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    tc = t - t.mean()
    den = float(np.sum(tc * tc))
    return 0.0 if den == 0 else float(np.sum(tc * (y - y.mean())) / den)


def support_series(traj: Trajectory, eps=None):
    eps = traj.eps if eps is None else eps
    if eps is None:
        eps = 1e-3 * traj.law.p_max
    return np.array([support_radius(traj.pressure(k), traj.grid, eps) for k in range(len(traj.times))])


def front_speed(traj: Trajectory, t_max=None, eps=None):
    """Least-squares slope of the support radius over snapshots up to ``t_max``."""
    t = np.asarray(traj.times)
    r = support_series(traj, eps)
    keep = t <= (t[-1] if t_max is None else t_max) + 1e-15
    return _ls_slope(t[keep], r[keep])


def velocity_law_error(pme_trajectory: Trajectory, front_trajectory: FrontTrajectory, window=5):
    """Measured support speed vs g |p_r| of the reference at each snapshot.

    Speeds come from least-squares slopes over ``window`` consecutive snapshots
    (shrunk at the ends).  When both speeds vanish the error is 0.
    """
    t = np.asarray(pme_trajectory.times)
    if t.size < 3:
        raise DomainError("need at least 3 snapshots")
    ref_t = np.asarray(front_trajectory.times)
    if ref_t.size != t.size or not np.allclose(ref_t, t, atol=1e-12):
        raise DomainError("trajectories must share output times")
    r = support_series(pme_trajectory)
    half = window // 2
    setup = front_trajectory.setup
    from .front import endpoint_data
    from .model import INFINITE

    measured, reference, err = [], [], []
    for k in range(t.size):
        lo, hi = max(0, k - half), min(t.size, k + half + 1)
        v = _ls_slope(t[lo:hi], r[lo:hi])
        s = front_trajectory.states[k]
        ref = 0.0
        for c, prof in zip(s.components, s.profiles):
            if c.right_kind == "free" and c.right == s.radius:
                _, grad, _, g = endpoint_data(c, prof, s.t, setup)
                ref = math.inf if g is INFINITE else g * grad
        measured.append(v)
        reference.append(ref)
        if ref == 0 and abs(v) < 1e-12:
            err.append(0.0)
        elif ref == 0:
            err.append(math.inf)
        else:
            err.append(abs(v - ref) / ref)
    return {"times": t.tolist(), "measured": measured, "reference": reference, "rel_error": err,
            "median": float(np.median(err))}


# --------------------------------------------------------------------------
# sweep

ERROR_COLUMNS = ["m", "t", "pressure_error", "density_inner_error", "density_outer_error",
                 "support_radius", "reference_radius", "support_error", "ab_min", "ab_bound",
                 "contraction_ratio", "perimeter", "reference_perimeter"]


@dataclass
class SweepReport:
    metadata: dict
    rows: list = field(default_factory=list)
    per_m: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def table(self, column, t=None):
        """Values of a column per m at time ``t`` (default: final time)."""
        t = self.metadata["times"][-1] if t is None else t
        out = {}
        for row in self.rows:
            if abs(row["t"] - t) < 1e-12:
                out[row["m"]] = row[column]
        return out

    def as_dict(self):
        return {"metadata": self.metadata, "rows": self.rows, "per_m": self.per_m,
                "summary": self.summary}

    def csv_rows(self):
        return [[row[c] for c in ERROR_COLUMNS] for row in self.rows]


def shrunken_sets(radius, state, width):
    """(K_in, K_out) masks: at least ``width`` inside / outside the reference set."""
    r = np.asarray(radius)
    k_in = np.zeros(r.shape, bool)
    near = np.zeros(r.shape, bool)
    for c in state.components:
        centred = c.left_kind == "center"
        k_in |= (r >= (-math.inf if centred else c.left + width)) & (r <= c.right - width)
        near |= (r > (-math.inf if centred else c.left - width)) & (r < c.right + width)
    return k_in, ~near


def _sweep_one(scenario, m, front_traj, p0):
    grid = scenario.grid()
    law = scenario.growth
    ext = scenario.exterior_density
    eps = scenario.support_threshold
    width = scenario.margin_cells * grid.dx
    config = SolverConfig(scenario.cfl_safety, scenario.dt_cap)
    rho0 = matched_initial_density(m, scenario.omega0, scenario.exterior, law, grid, p0=p0).values
    other = rho0 * (1.0 - scenario.perturbation)
    main, pert = run_lockstep([rho0, other], grid, m, law, ext, scenario.times(), config,
                              eps=eps, margin=width)
    contraction = l1_contraction_check(main, pert)
    rows = []
    n = scenario.n
    for k, t in enumerate(main.times):
        s = front_traj.states[k]
        rho = main.rho[k]
        p = main.pressure(k)
        k_in, k_out = shrunken_sets(grid.radius, s, width)
        p_ref = s.pressure(grid.radius)
        ext_t = ext.at_radius(grid.radius, t)
        r_m = support_radius(p, grid, eps)
        r_ref = s.radius
        pos = p > eps
        ab = float((grid.laplacian(p) + law(p))[pos].min()) if pos.any() else math.inf
        rows.append({
            "m": m, "t": t,
            "pressure_error": float(np.abs(p - p_ref)[k_in].max()) if k_in.any() else 0.0,
            "density_inner_error": float(np.abs(rho - 1.0)[k_in].max()) if k_in.any() else 0.0,
            "density_outer_error": float(np.abs(rho - ext_t)[k_out].max()) if k_out.any() else 0.0,
            "support_radius": r_m,
            "reference_radius": r_ref,
            "support_error": abs(r_m - r_ref) / r_ref if r_ref > 0 else abs(r_m),
            "ab_min": ab,
            "ab_bound": -1.0 / ((m - 1.0) * t) if t > 0 else -math.inf,
            "contraction_ratio": contraction["ratio"][k],
            "perimeter": _radial_perimeter(p, grid, eps),
            "reference_perimeter": sphere_area(n) * r_ref ** (n - 1) if r_ref > 0 else 0.0,
        })
    per_m = {
        "steps": main.steps, "dt_min": main.dt_min, "dt_max": main.dt_max,
        "clamped": main.clamped, "mass_balance": main.mass_balance(),
        "time_monotonicity": time_monotonicity(main),
        "max_contraction_ratio": contraction["max_ratio"],
        "cap_violations": main.cap_violations,
    }
    hess, product = initial_curvature_product(m, scenario.exterior, grid)
    per_m["exterior_hessian"] = hess
    per_m["initial_curvature_product"] = product
    if len(main.times) >= 3:
        per_m["velocity_law_median_error"] = velocity_law_error(main, front_traj)["median"]
    return rows, per_m


def _trend(values):
    """True when the last two increments do not increase."""
    v = list(values)
    if len(v) < 3:
        return True
    return v[-1] <= v[-2] and v[-2] <= v[-3]


def m_sweep(scenario, threads=1, scenario_hash=None) -> SweepReport:
    """Run the PME at every m of the scenario against the front reference."""
    if scenario.geometry != "radial":
        raise DomainError("m_sweep needs a radial scenario")
    scenario.validate()
    if len(scenario.m_list) < 3:
        raise DomainError("m_sweep needs at least three m values")
    front = run_front(scenario)
    grid = scenario.grid()
    p0 = initial_pressure(grid, scenario.omega0, scenario.growth)
    ms = list(scenario.m_list)
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_one, [scenario] * len(ms), ms, [front] * len(ms),
                                    [p0] * len(ms)))
    else:
        results = [_sweep_one(scenario, m, front, p0) for m in ms]

    report = SweepReport({
        "scenario_hash": scenario_hash, "name": scenario.name, "dx": grid.dx,
        "cells": grid.cells, "outer_radius": grid.extent, "times": list(scenario.times()),
        "m_list": ms, "margin": scenario.margin_cells * grid.dx,
        "margin_cells": scenario.margin_cells, "eps_supp": scenario.support_threshold,
        "growth_derivative_at_zero": float(scenario.growth.derivative(0.0)),
        "monotone_growth": scenario.growth.satisfies_monotone_hypothesis,
        "backend": kernels.BACKEND,
    })
    for m, (rows, per_m) in zip(ms, results):
        report.rows.extend(rows)
        report.per_m[str(m)] = per_m

    final = scenario.times()[-1]
    trends = {}
    for col in ("pressure_error", "density_inner_error", "density_outer_error", "support_error"):
        vals = [report.table(col, final)[m] for m in ms]
        trends[col] = _trend(vals)
    monotone = [m for m in ms if report.per_m[str(m)]["time_monotonicity"] >= -MONOTONE_TOL]
    report.summary = {
        "trend_nonincreasing": trends,
        "under_resolved": not all(trends.values()),
        "smallest_monotone_m": min(monotone) if monotone else None,
        "final_time": final,
        "front_saturated_at": front.saturated_at,
    }
    return report
