"""Algebraic layer of the model: pressure law, growth law, exterior density.

The stiff pressure law links density and pressure through

    p = P_m(rho) = m / (m - 1) * rho**(m - 1)

and cells grow at rate ``G(p)``.  Outside the saturated zone the density is
slaved to the exterior profile ``rho_E(x, t) = rho_E0(x) * exp(G(0) t)`` and the
free boundary speed is amplified by ``g = 1 / (1 - min(1, rho_E))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ScenarioError


class Infinite(enum.Enum):
    INFINITE = "infinite"

    def __repr__(self):
        return "INFINITE"


INFINITE = Infinite.INFINITE


# --------------------------------------------------------------------------
# stiffness / pressure law

def check_m(m):
    m = float(m)
    if not math.isfinite(m) or m <= 1.0:
        raise DomainError(f"stiffness exponent must satisfy 1 < m < inf, got {m}")
    return m


def pressure_from_density(rho, m):
    """P_m(rho) = m/(m-1) rho^(m-1); accepts scalars or arrays."""
    m = check_m(m)
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("density must be finite and nonnegative")
    out = m / (m - 1.0) * np.power(r, m - 1.0)
    return float(out) if out.ndim == 0 else out


def density_from_pressure(p, m):
    """Inverse of :func:`pressure_from_density`."""
    m = check_m(m)
    q = np.asarray(p, dtype=float)
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise DomainError("pressure must be finite and nonnegative")
    out = np.power((m - 1.0) / m * q, 1.0 / (m - 1.0))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# growth law

GROWTH_FORMS = ("linear", "constant-test", "off")


@dataclass(frozen=True)
class GrowthLaw:
    """Pressure-limited growth rate.

    ``linear``: G(p) = g0 (1 - p/p_max), strictly decreasing, G(p_max) = 0.
    ``constant-test``: G = g0 everywhere; violates G' < 0, verification only.
    ``off``: G = 0, used for Barenblatt checks.
    """

    g0: float = 1.0
    p_max: float = 1.0
    form: str = "linear"

    def __post_init__(self):
        if self.form not in GROWTH_FORMS:
            raise DomainError(f"unknown growth form {self.form!r}")
        if self.form != "off" and not self.g0 > 0:
            raise DomainError("g0 must be positive")
        if not self.p_max > 0:
            raise DomainError("p_max must be positive")

    @property
    def form_code(self):
        return {"off": 0, "constant-test": 1, "linear": 2}[self.form]

    @property
    def rate_at_zero(self):
        return 0.0 if self.form == "off" else self.g0

    @property
    def satisfies_monotone_hypothesis(self):
        return self.form == "linear"

    def __call__(self, p):
        return growth_rate(self, p)

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        slope = -self.g0 / self.p_max if self.form == "linear" else 0.0
        out = np.full_like(p, slope)
        return float(out) if out.ndim == 0 else out


def growth_rate(law: GrowthLaw, p):
    p = np.asarray(p, dtype=float)
    if law.form == "linear":
        out = law.g0 * (1.0 - p / law.p_max)
    elif law.form == "constant-test":
        out = np.full_like(p, law.g0)
    else:
        out = np.zeros_like(p)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# radial profiles (exterior density shapes)

@dataclass(frozen=True)
class RadialShape:
    """Radial profile ``value`` on ``[inner, outer]`` with cosine tapers.

    ``taper == 0`` gives an indicator of the closed band.  ``outer = inf``
    makes the profile constant out to the domain edge.
    """

    value: float = 0.0
    inner: float = 0.0
    outer: float = math.inf
    taper: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("profile value must be nonnegative")
        if self.inner < 0 or self.outer < self.inner or self.taper < 0:
            raise DomainError("need 0 <= inner <= outer and taper >= 0")

    @classmethod
    def zero(cls):
        return cls(0.0)

    @classmethod
    def plateau(cls, value, radius=math.inf, taper=0.0):
        return cls(value, 0.0, radius, taper)

    @property
    def is_zero(self):
        return self.value == 0.0

    @property
    def support_radius(self):
        return self.outer + self.taper

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        if self.value == 0.0:
            return out
        inside = (r >= self.inner) & (r <= self.outer)
        out[inside] = self.value
        if self.taper > 0:
            d_out = r - self.outer
            band = (d_out > 0) & (d_out < self.taper)
            out[band] = self.value * 0.5 * (1 + np.cos(np.pi * d_out[band] / self.taper))
            if self.inner > 0:
                d_in = self.inner - r
                band = (d_in > 0) & (d_in < self.taper)
                out[band] = self.value * 0.5 * (1 + np.cos(np.pi * d_in[band] / self.taper))
        return out

    def radius_at_least(self, level):
        """Smallest R with {profile >= level} inside the closed ball B_R."""
        if self.value < level or self.value == 0.0:
            return 0.0
        if not math.isfinite(self.outer):
            return math.inf
        if self.taper == 0:
            return self.outer
        # 0.5 (1 + cos(pi d / w)) = level / value
        d = self.taper / math.pi * math.acos(2 * level / self.value - 1)
        return self.outer + d


# --------------------------------------------------------------------------
# exterior density

@dataclass(frozen=True)
class ExteriorDensity:
    """rho_E(x, t) = rho_E0(|x - center|) * exp(g0 t)."""

    profile: RadialShape = field(default_factory=RadialShape.zero)
    g0: float = 1.0
    center: tuple = ()

    def __post_init__(self):
        if self.profile.value >= 1.0:
            raise DomainError("exterior density must satisfy 0 <= rho_E0 < 1")

    def initial(self, r):
        return self.profile(r)

    def at_radius(self, r, t):
        if t < 0:
            raise DomainError("time must be nonnegative")
        return self.profile(r) * math.exp(self.g0 * t)

    def threshold_time(self, r):
        """Time at which rho_E(r, .) reaches 1 (inf where it never does)."""
        v = self.profile(r)
        if self.g0 <= 0:
            return np.where(v >= 1.0, 0.0, np.inf)
        with np.errstate(divide="ignore"):
            out = np.where(v > 0, -np.log(np.where(v > 0, v, 1.0)) / self.g0, np.inf)
        return out

    def radius_of(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return abs(float(x))
        c = np.zeros(x.shape[-1]) if not self.center else np.asarray(self.center, float)
        return np.linalg.norm(x - c, axis=-1)


def exterior_density_at(ext: ExteriorDensity, x, t):
    """rho_E at a point ``x`` (scalar radius or coordinate vector) and time t."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    r = ext.radius_of(x)
    out = ext.at_radius(r, t)
    return float(out) if np.ndim(out) == 0 else out


def velocity_coefficient(ext: ExteriorDensity, x, t):
    """g = 1 / (1 - min(1, rho_E)); INFINITE once rho_E >= 1."""
    rho = exterior_density_at(ext, x, t)
    if rho >= 1.0:
        return INFINITE
    return 1.0 / (1.0 - rho)


# --------------------------------------------------------------------------
# scenario

GEOMETRIES = ("slab", "radial", "box2d")


@dataclass(frozen=True)
class Omega0:
    """Initial saturated set: ``ball``, ``annulus`` or ``empty``."""

    kind: str = "ball"
    radius: float = 1.0
    inner: float = 0.0
    center: tuple = ()

    def intervals(self):
        """Radial intervals [a, b] covered by the set."""
        if self.kind == "empty":
            return []
        if self.kind == "ball":
            return [(0.0, self.radius)]
        return [(self.inner, self.radius)]

    def contains(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "empty":
            return np.zeros(r.shape, bool)
        lo = 0.0 if self.kind == "ball" else self.inner
        inside = r < self.radius
        if lo > 0:
            inside &= r > lo
        return inside

    @property
    def bounding_radius(self):
        return 0.0 if self.kind == "empty" else self.radius


@dataclass(frozen=True)
class Scenario:
    geometry: str = "radial"
    n: int = 2
    omega0: Omega0 = field(default_factory=Omega0)
    exterior: RadialShape = field(default_factory=RadialShape.zero)
    growth: GrowthLaw = field(default_factory=GrowthLaw)
    m_list: tuple = (10.0, 20.0, 40.0, 80.0)
    dx: float = 0.02
    outer_radius: float = 5.0
    horizon: float = 0.5
    output_times: tuple = ()
    eps_supp: float | None = None
    sigma: float = 0.0
    cfl_safety: float = 0.9
    dt_cap: float = 1e-2
    front_dt: float = 1e-3
    front_points: int = 129
    margin_cells: float = 4.0
    perturbation: float = 0.1
    initial: str = "matched"
    total_mass: float = 1.0
    name: str = "scenario"

    @property
    def support_threshold(self):
        return 1e-3 * self.growth.p_max if self.eps_supp is None else self.eps_supp

    @property
    def exterior_density(self):
        center = self.omega0.center if self.geometry == "box2d" else ()
        return ExteriorDensity(self.exterior, self.growth.rate_at_zero, center)

    @property
    def dimension(self):
        return {"slab": 1, "radial": self.n, "box2d": 2}[self.geometry]

    def times(self):
        if self.output_times:
            return tuple(float(t) for t in self.output_times)
        return (0.0, self.horizon)

    def truncation_radius(self):
        """R e^{16 G(0) T / n} with R enclosing Omega0 and {rho_E0 >= 1/2}."""
        r = max(self.omega0.bounding_radius, self.exterior.radius_at_least(0.5))
        if self.initial == "barenblatt":
            from .pme import barenblatt_radius
            r = max([r] + [barenblatt_radius(self.horizon, m, self.total_mass, self.dimension)
                           for m in self.m_list if m > 1 and self.total_mass > 0])
        if self.geometry == "box2d" and self.omega0.center:
            r += float(np.linalg.norm(self.omega0.center))
        return r * math.exp(16 * self.growth.rate_at_zero * self.horizon / self.dimension)

    def grid(self):
        from .grid import make_grid
        center = tuple(self.omega0.center) if self.geometry == "box2d" and self.omega0.center else (0.0, 0.0)
        return make_grid(self.geometry, self.n, self.dx, self.outer_radius, center)

    def validate(self):
        problems = []
        for m in self.m_list:
            if not (math.isfinite(m) and m > 1):
                problems.append(f"m must exceed 1, got {m}")
        if list(self.m_list) != sorted(set(self.m_list)):
            problems.append("m_list must be strictly increasing")
        if not 0 <= self.exterior.value < 1:
            problems.append("exterior density must satisfy 0 <= rho_E0 < 1")
        if self.dx <= 0:
            problems.append("dx must be positive")
        if self.horizon < 0:
            problems.append("horizon must be nonnegative")
        if not 0 < self.cfl_safety <= 1:
            problems.append("cfl_safety must lie in (0, 1]")
        if self.geometry not in GEOMETRIES:
            problems.append(f"geometry must be one of {GEOMETRIES}")
        if self.geometry == "radial" and self.n < 1:
            problems.append("radial dimension n must be >= 1")
        if self.omega0.kind not in ("ball", "annulus", "empty"):
            problems.append(f"unknown omega0 kind {self.omega0.kind!r}")
        if self.omega0.kind == "annulus" and not 0 < self.omega0.inner < self.omega0.radius:
            problems.append("annulus needs 0 < inner < radius")
        if self.omega0.bounding_radius >= self.outer_radius:
            problems.append("omega0 does not fit inside the grid")
        if self.sigma < 0:
            problems.append("sigma must be nonnegative")
        if self.initial not in ("matched", "barenblatt"):
            problems.append(f"initial must be 'matched' or 'barenblatt', got {self.initial!r}")
        if self.initial == "barenblatt":
            if self.growth.form != "off":
                problems.append("barenblatt initial data need growth form 'off'")
            if not self.times()[0] > 0:
                problems.append("barenblatt initial data need a first output time > 0")
            if not self.total_mass > 0:
                problems.append("total_mass must be positive")
        ts = self.times()
        if any(b < a for a, b in zip(ts, ts[1:])) or ts[0] < 0 or ts[-1] > self.horizon + 1e-12:
            problems.append("output times must be sorted within [0, horizon]")
        if problems:
            raise ScenarioError(problems)
        return self
