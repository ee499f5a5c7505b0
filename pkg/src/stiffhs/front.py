"""Radial reference solver for the quasi-static free boundary problem.

The positive set is a union of radial intervals.  On each interval the
pressure solves -Lap p = G(p) with p = 0 at free endpoints; free endpoints move
outward from the interval with speed ``g |p_r|``, where ``g`` is the velocity
coefficient just outside the endpoint.  Time stepping is Euler with one Heun
corrector.

Where the exterior density reaches one (g infinite) the region is absorbed
at once: :func:`nucleation_scan` finds those radii from the closed-form
threshold time and unions them into the positive set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .elliptic import boundary_gradient, solve_radial
from .errors import DomainError, FrontLogicError
from .model import INFINITE, ExteriorDensity, GrowthLaw, velocity_coefficient

TOUCH = 1e-12
MIN_WIDTH = 1e-9
SCAN_POINTS = 4097

# endpoint kinds: "center" (r = 0, symmetry), "free" (moves, p = 0),
# "fixed" (pinned Dirichlet data), "wall" (truncation edge, p = 0, pinned)


@dataclass(frozen=True)
class Component:
    left: float
    right: float
    left_kind: str = "free"
    right_kind: str = "free"

    @property
    def width(self):
        return self.right - self.left


@dataclass(frozen=True)
class FrontState:
    t: float
    components: tuple = ()
    profiles: tuple = ()
    nucleated: tuple = ()  # (left, right, time)
    saturated: bool = False
    events: tuple = ()  # (time, kind, detail) since the previous output

    @property
    def radius(self):
        """Outermost free endpoint (0 for an empty positive set)."""
        free = [c.right for c in self.components if c.right_kind in ("free", "wall")]
        return max(free) if free else 0.0

    def contains(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, bool)
        for c in self.components:
            out |= (r >= c.left - TOUCH) & (r <= c.right + TOUCH)
        return out

    def pressure(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        for c, prof in zip(self.components, self.profiles):
            if prof is None:
                continue
            inside = (r >= c.left) & (r <= c.right)
            out[inside] = prof(r[inside])
        return out


@dataclass(frozen=True)
class FrontSetup:
    """Everything the stepper needs besides the state."""

    n: int
    law: GrowthLaw
    ext: ExteriorDensity
    outer: float
    points: int = 129
    fixed_value: object = None  # callable t -> Dirichlet value at fixed endpoints


# --------------------------------------------------------------------------
# profiles and speeds

def _bc(kind, t, setup):
    if kind == "center":
        return None
    if kind == "fixed":
        return float(setup.fixed_value(t))
    return 0.0


def _profile(comp: Component, t, setup: FrontSetup):
    if comp.width < MIN_WIDTH:
        return None
    inner = _bc(comp.left_kind, t, setup)
    outer = _bc(comp.right_kind, t, setup)
    if comp.left_kind == "center":
        return solve_radial(setup.n, 0.0, comp.right, None, outer, setup.law, setup.points)
    return solve_radial(setup.n, comp.left, comp.right, inner, outer, setup.law, setup.points)


def _g_outside(ext, r, t, side):
    nudge = TOUCH * (1.0 + abs(r))
    x = r + nudge if side == "right" else max(r - nudge, 0.0)
    return velocity_coefficient(ext, x, t)


def endpoint_data(comp: Component, prof, t, setup: FrontSetup):
    """(|p_r| left, |p_r| right, g left, g right); g is None at pinned ends."""
    out = []
    for side, kind in (("inner", comp.left_kind), ("outer", comp.right_kind)):
        grad = 0.0 if prof is None or kind == "center" else boundary_gradient(prof, side)
        out.append(grad)
    gs = []
    for side, kind, r in (("left", comp.left_kind, comp.left), ("right", comp.right_kind, comp.right)):
        gs.append(_g_outside(setup.ext, r, t, side) if kind == "free" else None)
    return out[0], out[1], gs[0], gs[1]


def _speeds(components, profiles, t, setup):
    speeds = []
    for comp, prof in zip(components, profiles):
        gl_, gr_, g_left, g_right = endpoint_data(comp, prof, t, setup)
        v = []
        for grad, g, kind in ((gl_, g_left, comp.left_kind), (gr_, g_right, comp.right_kind)):
            if kind != "free":
                v.append(0.0)
            elif g is INFINITE:
                raise FrontLogicError("velocity coefficient is infinite at a free endpoint; "
                                      "run nucleation_scan first")
            else:
                v.append(g * grad)
        speeds.append(tuple(v))
    return speeds


def _normalise(components, setup, t, events):
    """Clamp to the domain, fix endpoint kinds and union touching intervals."""
    comps = []
    for c in components:
        left, right = c.left, c.right
        lk, rk = c.left_kind, c.right_kind
        if lk == "free" and left <= TOUCH:
            left, lk = 0.0, "center"
        if rk == "free" and right >= setup.outer - TOUCH:
            right, rk = setup.outer, "wall"
        comps.append(Component(left, right, lk, rk))
    comps.sort(key=lambda c: c.left)
    merged = []
    for c in comps:
        if merged and c.left <= merged[-1].right + TOUCH:
            prev = merged.pop()
            if c.right > prev.right:
                right, rk = c.right, c.right_kind
            else:
                right, rk = prev.right, prev.right_kind
            events.append((t, "merge", (prev.left, prev.right, c.left, c.right)))
            merged.append(Component(prev.left, right, prev.left_kind, rk))
        else:
            merged.append(c)
    return tuple(merged)


def _is_saturated(components, setup):
    return (len(components) == 1 and components[0].left_kind == "center"
            and components[0].right >= setup.outer - TOUCH)


def _with_profiles(state: FrontState, setup):
    profs = tuple(_profile(c, state.t, setup) for c in state.components)
    return replace(state, profiles=profs, saturated=_is_saturated(state.components, setup))


# --------------------------------------------------------------------------
# time stepping

def _euler(components, speeds, dt):
    return [Component(c.left - dt * v[0], c.right + dt * v[1], c.left_kind, c.right_kind)
            for c, v in zip(components, speeds)]


def _overlaps(components, setup):
    for a, b in zip(components, components[1:]):
        if a.right >= b.left - TOUCH:
            return True
    return any((c.left_kind == "free" and c.left <= TOUCH)
               or (c.right_kind == "free" and c.right >= setup.outer - TOUCH) for c in components)


def advance(state: FrontState, dt, setup: FrontSetup) -> FrontState:
    """Move free endpoints over [t, t + dt] by Euler plus a Heun corrector."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    if state.saturated or not state.components:
        return replace(state, t=state.t + dt)
    profiles = state.profiles or tuple(_profile(c, state.t, setup) for c in state.components)
    v0 = _speeds(state.components, profiles, state.t, setup)

    # split the step when a front would cross a large part of its interval
    vmax = max(max(v) for v in v0)
    widths = [c.width for c in state.components if c.width > MIN_WIDTH]
    limit = 0.1 * min(widths) if widths else math.inf
    pieces = max(1, int(math.ceil(vmax * dt / limit))) if vmax > 0 else 1
    if pieces > 1:
        sub = state
        for _ in range(pieces):
            sub = _advance_once(sub, dt / pieces, setup)
        return sub
    return _advance_once(replace(state, profiles=profiles), dt, setup, v0)


def _advance_once(state, dt, setup, v0=None):
    events = list(state.events)
    profiles = state.profiles or tuple(_profile(c, state.t, setup) for c in state.components)
    if v0 is None:
        v0 = _speeds(state.components, profiles, state.t, setup)
    t1 = state.t + dt
    pred = _euler(state.components, v0, dt)
    if _overlaps(pred, setup):
        new = pred
    else:
        p1 = tuple(_profile(c, t1, setup) for c in pred)
        try:
            v1 = _speeds(pred, p1, t1, setup)
        except FrontLogicError:
            v1 = v0
        avg = [tuple(0.5 * (a + b) for a, b in zip(x, y)) for x, y in zip(v0, v1)]
        new = _euler(state.components, avg, dt)
    comps = _normalise(new, setup, t1, events)
    return _with_profiles(FrontState(t1, comps, (), state.nucleated, False, tuple(events)), setup)


def _scan_edges(ext: ExteriorDensity, lo, hi, t_next):
    """Sample radii in [lo, hi], including profile breakpoints."""
    p = ext.profile
    pts = [np.linspace(lo, hi, SCAN_POINTS)]
    for b in (p.inner, p.outer, p.inner - p.taper, p.outer + p.taper):
        if math.isfinite(b) and lo <= b <= hi:
            pts.append(np.array([b]))
    return np.unique(np.concatenate(pts))


def nucleation_scan(state: FrontState, setup: FrontSetup, t_next) -> FrontState:
    """Absorb every radius whose exterior density reaches one by ``t_next``."""
    if t_next < state.t:
        raise DomainError("t_next must not precede the state time")
    ext = setup.ext
    prof = ext.profile
    growth = math.exp(ext.g0 * t_next) if ext.g0 > 0 else 1.0
    if prof.value * growth < 1.0:
        return state
    hi = min(setup.outer, prof.support_radius)
    r = _scan_edges(ext, 0.0, hi, t_next)
    level = prof(r) * growth

    def f(x):
        return float(prof(x)) * growth - 1.0

    hit = level >= 1.0
    if not hit.any():
        return state
    edges = np.flatnonzero(np.diff(hit.astype(int)))
    runs = []
    start = 0.0 if hit[0] else None
    for i in edges:
        a, b = r[i], r[i + 1]
        x = brentq(f, a, b, xtol=1e-14) if f(a) * f(b) < 0 else (b if not hit[i] else a)
        if hit[i]:
            runs.append((start, x))
            start = None
        else:
            start = x
    if start is not None:
        runs.append((start, setup.outer if hi >= setup.outer - TOUCH else r[-1]))

    events = list(state.events)
    thresh = ext.threshold_time
    new = list(state.components)
    nucleated = list(state.nucleated)
    for a, b in runs:
        a, b = float(a), float(b)
        if b - a < MIN_WIDTH:
            continue
        mid = np.linspace(a, b, 33)
        if np.all(state.contains(mid)):
            continue
        s = float(np.min(thresh(np.clip(mid, a, b))))
        s = max(s, state.t)
        lk = "center" if a <= TOUCH else "free"
        rk = "wall" if b >= setup.outer - TOUCH else "free"
        new.append(Component(0.0 if lk == "center" else a, b, lk, rk))
        nucleated.append((a, b, s))
        events.append((s, "nucleate", (a, b)))
    if len(new) == len(state.components):
        return state
    comps = _normalise(new, setup, state.t, events)
    out = FrontState(state.t, comps, (), tuple(nucleated), False, tuple(events))
    return _with_profiles(out, setup)


# --------------------------------------------------------------------------
# trajectories

@dataclass
class FrontTrajectory:
    setup: FrontSetup
    states: list = field(default_factory=list)
    saturated_at: float | None = None

    @property
    def times(self):
        return [s.t for s in self.states]

    @property
    def radii(self):
        return np.array([s.radius for s in self.states])

    def rows(self):
        """Front table rows: t, index, endpoints, |p_r|, g, event flag."""
        out = []
        for s in self.states:
            flags = {}
            for _, kind, detail in s.events:
                for i, c in enumerate(s.components):
                    lo, hi = (detail[0], detail[-1]) if kind == "merge" else detail
                    if c.left - TOUCH <= lo and hi <= c.right + TOUCH:
                        if kind == "nucleate" or flags.get(i) != "nucleate":
                            flags[i] = kind
            for i, (c, prof) in enumerate(zip(s.components, s.profiles)):
                gl_, gr_, g_left, g_right = endpoint_data(c, prof, s.t, self.setup)
                out.append([s.t, i, c.left, c.right, gl_, gr_, _g_text(g_left), _g_text(g_right),
                            flags.get(i, "move")])
        return out

    def to_csv(self, path):
        from .io import write_csv
        write_csv(path, FRONT_COLUMNS, self.rows())


FRONT_COLUMNS = ["t", "component", "left", "right", "grad_left", "grad_right",
                 "g_left", "g_right", "event"]


def _g_text(g):
    if g is None:
        return ""
    if g is INFINITE:
        return "inf"
    return g


def initial_state(components, setup: FrontSetup, t=0.0) -> FrontState:
    events = []
    comps = _normalise(components, setup, t, events)
    state = _with_profiles(FrontState(t, comps, (), (), False, ()), setup)
    return nucleation_scan(state, setup, t)


def integrate(state: FrontState, setup: FrontSetup, times, dt) -> FrontTrajectory:
    """Step through ``times`` (sorted, >= state.t) with nucleation scans."""
    traj = FrontTrajectory(setup)
    times = [float(t) for t in times]
    for target in times:
        while state.t < target - 1e-15 and not state.saturated:
            h = min(dt, target - state.t)
            state = nucleation_scan(state, setup, state.t + h)
            if state.saturated:
                break
            state = advance(state, h, setup)
        if state.saturated and traj.saturated_at is None:
            traj.saturated_at = max(s for _, _, s in state.nucleated) if state.nucleated else state.t
        if state.t < target:
            state = replace(state, t=target)
        traj.states.append(state)
        state = replace(state, events=())
    return traj


def run_front(scenario, dt=None, points=None) -> FrontTrajectory:
    """Reference free boundary trajectory for a radial scenario."""
    if scenario.geometry != "radial":
        raise DomainError("the front solver handles radial scenarios only")
    scenario.validate()
    setup = FrontSetup(scenario.n, scenario.growth, scenario.exterior_density,
                       scenario.outer_radius, points or scenario.front_points)
    comps = [Component(a, b, "center" if a == 0 else "free", "free")
             for a, b in scenario.omega0.intervals()]
    state = initial_state(comps, setup)
    return integrate(state, setup, scenario.times(), dt or scenario.front_dt)


def fixed_boundary_radial_solution(n, x0, R_fixed, boundary_value_fn, init_front, ext: ExteriorDensity,
                                   T, law: GrowthLaw, mode="exterior", dt=1e-3, points=129,
                                   times=None, outer=None) -> FrontTrajectory:
    """Radial solution with a pinned sphere |x - x0| = R_fixed carrying data > 0.

    ``exterior`` mode: positive set R_fixed <= r <= R(t), front moving out.
    ``interior`` mode: R(t) <= r <= R_fixed, front moving in.
    Radii are measured from ``x0``; the exterior density is taken in the same
    radial coordinate.
    """
    del x0  # radial coordinate already centred
    if mode not in ("exterior", "interior"):
        raise DomainError("mode must be 'exterior' or 'interior'")
    samples = np.linspace(0.0, T, 1001)
    vals = np.array([boundary_value_fn(s) for s in samples])
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise DomainError("boundary data must stay positive on [0, T]")
    if mode == "exterior":
        if not init_front > R_fixed:
            raise DomainError("exterior mode needs init_front > R_fixed")
        outer = outer or max(4.0 * init_front, init_front + 10.0)
        region = np.linspace(init_front, outer, 2049)
        comp = Component(R_fixed, init_front, "fixed", "free")
    else:
        if not 0 <= init_front < R_fixed:
            raise DomainError("interior mode needs 0 <= init_front < R_fixed")
        outer = R_fixed
        region = np.linspace(0.0, init_front, 2049)
        comp = Component(init_front, R_fixed, "free" if init_front > 0 else "center", "fixed")
    if np.any(ext.at_radius(region, T) >= 1.0):
        raise DomainError("exterior density reaches one outside the positive set")
    setup = FrontSetup(int(n), law, ext, outer, points, boundary_value_fn)
    state = _with_profiles(FrontState(0.0, (comp,)), setup)
    times = [0.0, T] if times is None else times
    return integrate(state, setup, times, dt)
