"""Explicit barriers for the free boundary problem and their numerical checks.

A superbarrier phi satisfies, on its positive set and on its zero level,

    -Lap(phi) - G(phi) > 0,       phi_t - g |D phi|^2 > 0,

and a subbarrier the reverse inequalities.  :func:`verify_barrier` samples
both with a Sobol sequence; Laplacians are taken with the (2n+1)-point stencil,
gradients with central differences and time derivatives with the complex
step, so the checks do not reuse the closed-form derivatives.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

from .errors import BarrierConstructionError, DomainError
from .model import GrowthLaw

STENCIL_H = 0.05
MARGIN_FLOOR = 1e-6


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier family member; ``params`` holds the construction constants."""

    kind: str
    n: int
    params: dict
    t_window: tuple
    x_center: tuple
    x_radius: float
    law: GrowthLaw | None = None
    g_bound: float = 1.0  # velocity coefficient used on the zero level

    def __call__(self, x, t):
        return _EVAL[self.kind](self, np.asarray(x), t)

    def zero_radius(self, t):
        """Radius of the zero level around ``x_center`` (None if none exists)."""
        p = self.params
        if self.kind == "superbarrier_WT":
            return p["R"] * math.exp(8 * p["g0"] * t / self.n)
        if self.kind == "subbarrier_expanding":
            return p["c"] * t + p["r"]
        return None

    def as_dict(self):
        return {"kind": self.kind, "n": self.n, "params": dict(self.params),
                "t_window": list(self.t_window), "x_center": list(self.x_center),
                "x_radius": self.x_radius, "g_bound": self.g_bound}


def _wt(spec, x, t):
    p = spec.params
    r2 = np.sum((x - np.asarray(spec.x_center)) ** 2, axis=-1)
    return p["g0"] / spec.n * (p["R"] ** 2 * np.exp(16 * p["g0"] * t / spec.n) - r2)


def _expanding(spec, x, t):
    p = spec.params
    r2 = np.sum((x - np.asarray(spec.x_center)) ** 2, axis=-1)
    return p["alpha"] * ((p["c"] * t + p["r"]) ** 2 - r2)


def _decay(spec, x, t):
    p = spec.params
    shape = np.shape(x)[:-1]
    v = p["p_max"] + max(p["M"] - p["p_max"], 0.0) * np.exp(-p["rate"] * t)
    return np.broadcast_to(v, shape) if shape else v


_EVAL = {"superbarrier_WT": _wt, "subbarrier_expanding": _expanding, "decay_supersolution": _decay}


# --------------------------------------------------------------------------
# constructors

def make_WT(R, T, n, g0):
    """(g0/n)(R^2 exp(16 g0 t / n) - |x|^2): expanding paraboloid superbarrier.

    Its zero level is outrun wherever g < 2, i.e. while the exterior density
    stays below one half outside B_R.
    """
    if not (R > 0 and T > 0 and g0 > 0 and n >= 1):
        raise DomainError("make_WT needs R, T, g0 > 0 and n >= 1")
    reach = R * math.exp(8 * g0 * T / n)
    return BarrierSpec("superbarrier_WT", int(n), {"R": float(R), "T": float(T), "g0": float(g0)},
                       (0.0, float(T)), (0.0,) * int(n), reach, GrowthLaw(g0, 1.0, "constant-test"),
                       g_bound=2.0)


def _bisect_root(f, lo, hi):
    if not f(lo) * f(hi) < 0:
        raise BarrierConstructionError("no sign change for bisection")
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-14, maxiter=200)


def make_expanding_subbarrier(r, x0, law: GrowthLaw, n=None):
    """alpha ((c t + r)^2 - |x - x0|^2) with alpha, c picked by bisection.

    alpha is half the root of G(4 alpha) = 2 n alpha and c half the root of
    c (c + r) / (2 alpha r^2) = 1, so both strict inequalities hold with room.
    """
    if not 0 < r < 1:
        raise DomainError("subbarrier radius must satisfy 0 < r < 1")
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    n = len(x0) if n is None else int(n)
    if len(x0) != n:
        raise DomainError("x0 has the wrong dimension")
    if law.rate_at_zero <= 0:
        raise BarrierConstructionError("no admissible alpha: G(0) <= 0")

    def f_alpha(a):
        return float(law(4 * a)) - 2 * n * a

    hi = 1.0
    while f_alpha(hi) > 0:
        hi *= 2
        if hi > 1e12:
            raise BarrierConstructionError("alpha inequality has no root")
    alpha = 0.5 * _bisect_root(f_alpha, 0.0, hi)

    def f_c(c):
        return c * (c + r) / (2 * alpha * r * r) - 1.0

    c_hi = 1.0
    while f_c(c_hi) < 0:
        c_hi *= 2
    c = 0.5 * _bisect_root(f_c, 0.0, c_hi)

    m1 = float(law(4 * alpha)) - 2 * n * alpha
    m2 = 1.0 - c * (c + r) / (2 * alpha * r * r)
    if m1 < MARGIN_FLOOR or m2 < MARGIN_FLOOR:
        raise BarrierConstructionError(f"margins too small: {m1:.3e}, {m2:.3e}")
    params = {"r": float(r), "alpha": alpha, "c": c, "alpha_margin": m1, "c_margin": m2}
    return BarrierSpec("subbarrier_expanding", n, params, (0.0, 1.0), x0, c + r, law, g_bound=1.0)


def decay_constant(law: GrowthLaw, M):
    """c = -max_{[0, M]} G'."""
    if law.form == "linear":
        return law.g0 / law.p_max
    return 0.0


def make_decay_supersolution(m, M, law: GrowthLaw, strict=True, n=1):
    """Spatially constant cap p_M + (M - p_M)_+ exp(-c (m-1) t / M).

    The time rate c (m-1)/M is only a supersolution rate while the cap stays
    above 1/M, guaranteed when M p_M >= 1.  With ``strict`` the constructor
    refuses other cases; otherwise the rate is lowered to c (m-1) p_M, which
    is always admissible.
    """
    if not m > 1:
        raise DomainError("m must exceed 1")
    if M < 0:
        raise DomainError("M must be nonnegative")
    c = decay_constant(law, M)
    excess = max(M - law.p_max, 0.0)
    if excess > 0 and c <= 0:
        raise BarrierConstructionError("growth law has no decay: G' = 0")
    scale = 1.0 / M if M > 0 else 0.0
    if excess > 0 and M * law.p_max < 1:
        if strict:
            raise BarrierConstructionError("decay cap needs M * p_max >= 1")
        scale = law.p_max
    params = {"m": float(m), "M": float(M), "p_max": law.p_max, "c": c, "rate": c * (m - 1) * scale}
    return _DecaySpec("decay_supersolution", int(n), params, (0.0, 1.0), (0.0,) * int(n), 1.0, law)


class _DecaySpec(BarrierSpec):
    def value(self, t):
        return float(_decay(self, np.zeros((1,)), t))


# --------------------------------------------------------------------------
# verification

def _laplacian(spec, x, t, h):
    n = spec.n
    acc = -2 * n * spec(x, t)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        acc = acc + spec(x + e, t) + spec(x - e, t)
    return acc / (h * h)


def _gradient_sq(spec, x, t, h):
    n = spec.n
    acc = 0.0
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        acc = acc + ((spec(x + e, t) - spec(x - e, t)) / (2 * h)) ** 2
    return acc


def _time_derivative(spec, x, t):
    step = 1e-30
    return np.imag(spec(x.astype(complex), np.asarray(t) + 1j * step)) / step


def _sobol(dim, count, seed_skip=0):
    s = qmc.Sobol(dim, scramble=False)
    # skip the origin point, which sits on symmetry axes
    s.fast_forward(1 + seed_skip)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # counts need not be powers of two
        return s.random(count)


def _directions(n, u):
    if n == 1:
        return np.where(u[:, :1] < 0.5, -1.0, 1.0)
    v = qmc_normal(u)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def qmc_normal(u):
    from scipy.special import ndtri

    return ndtri(np.clip(u, 1e-12, 1 - 1e-12))


def _sample_interior(spec, count):
    n = spec.n
    t0, t1 = spec.t_window
    u = _sobol(n + 1, count)
    x = np.asarray(spec.x_center) + spec.x_radius * (2 * u[:, :n] - 1)
    t = t0 + (t1 - t0) * u[:, n]
    return x, t


def _sample_boundary(spec, count):
    n = spec.n
    t0, t1 = spec.t_window
    u = _sobol(n + 1, count, seed_skip=count + 1)
    t = t0 + (t1 - t0) * u[:, 0]
    d = _directions(n, u[:, 1:])
    rad = np.array([spec.zero_radius(s) for s in t])
    return np.asarray(spec.x_center) + rad[:, None] * d, t


def verify_barrier(spec: BarrierSpec, kind: str, sample_count=10_000, t_window=None):
    """Sample the barrier inequalities; returns a JSON-compatible report.

    ``kind`` is ``super`` or ``sub``.  Interior margins are
    ``-Lap(phi) - G(phi)`` (sign flipped for ``sub``); boundary margins are
    ``phi_t - g |D phi|^2`` with ``g = spec.g_bound``, also reported divided by
    ``|D phi|^2``.
    """
    if kind not in ("super", "sub"):
        raise DomainError("kind must be 'super' or 'sub'")
    if t_window is not None:
        a, b = t_window
        if a < spec.t_window[0] or b > spec.t_window[1]:
            raise DomainError("sampling window outside the barrier's validity window")
        spec = _with_window(spec, (float(a), float(b)))
    sign = 1.0 if kind == "super" else -1.0
    report = {"barrier": spec.kind, "kind": kind, "params": dict(spec.params), "samples": int(sample_count)}

    if spec.kind == "decay_supersolution":
        t0, t1 = spec.t_window
        t = t0 + (t1 - t0) * _sobol(1, sample_count)[:, 0]
        m = spec.params["m"]
        phi = np.asarray(_decay(spec, np.zeros((t.size, 1)), t), dtype=float)
        dphi = _time_derivative(spec, np.zeros((t.size, 1)), t)
        # spatially constant: p_t - (m-1) p G(p) is the whole pressure operator
        resid = dphi - (m - 1) * phi * spec.law(phi)
        excess = phi - spec.params["p_max"]
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(excess > 0, resid / excess, 0.0)
        worst = float(np.min(sign * resid))
        report.update(interior_margin=worst, interior_margin_relative=float(np.min(sign * rel)),
                      boundary_margin=None, boundary_samples=0)
        report["pass"] = bool(worst > 0 or (worst == 0 and np.all(excess == 0) and kind == "super"))
        return report

    x, t = _sample_interior(spec, sample_count)
    phi = spec(x, t)
    keep = phi > 0
    x, t, phi = x[keep], t[keep], phi[keep]
    lap = _laplacian(spec, x, t, STENCIL_H)
    interior = sign * (-lap - spec.law(phi))

    xb, tb = _sample_boundary(spec, sample_count)
    dt = _time_derivative(spec, xb, tb)
    grad2 = _gradient_sq(spec, xb, tb, STENCIL_H)
    boundary = sign * (dt - spec.g_bound * grad2)
    report.update(
        interior_samples=int(keep.sum()),
        interior_margin=float(interior.min()),
        boundary_samples=int(len(tb)),
        boundary_margin=float(boundary.min()),
        boundary_margin_relative=float((boundary / grad2).min()),
        boundary_residual=float(np.max(np.abs(spec(xb, tb)))),
    )
    report["pass"] = bool(report["interior_margin"] > 0 and report["boundary_margin"] > 0)
    return report


def _with_window(spec, window):
    cls = type(spec)
    return cls(spec.kind, spec.n, spec.params, window, spec.x_center, spec.x_radius,
               spec.law, spec.g_bound)


def wt_identities(spec: BarrierSpec, sample_count=10_000, h=STENCIL_H):
    """Worst deviations of -Lap W - 2 g0 and W_t/|DW|^2 - 4 (on the zero level)."""
    if spec.kind != "superbarrier_WT":
        raise DomainError("identities only apply to the W_T barrier")
    g0 = spec.params["g0"]
    x, t = _sample_interior(spec, sample_count)
    lap = _laplacian(spec, x, t, h)
    xb, tb = _sample_boundary(spec, sample_count)
    dt = _time_derivative(spec, xb, tb)
    grad2 = _gradient_sq(spec, xb, tb, h)
    return {
        "laplacian_error": float(np.max(np.abs(-lap - 2 * g0))),
        "ratio_error": float(np.max(np.abs(dt / grad2 - 4.0))),
        "samples": int(sample_count),
    }
