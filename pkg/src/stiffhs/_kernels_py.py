"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

Signatures and return values match exactly; results agree with the compiled
path up to summation order in the source integral.
"""

import numpy as np


def _growth(form, g0, pmax, p):
    if form == 2:
        return g0 * (1.0 - p / pmax)
    if form == 1:
        return np.full_like(p, g0)
    return np.zeros_like(p)


def step_1d(rho, out, u, cp, cm, vol, m, dt, form, g0, pmax, lo, hi, ghost_w, ghost_u):
    n = rho.shape[0]
    if hi <= lo:
        return 0.0, 1e300, -1e300, 0.0
    a = max(lo - 1, 0)
    b = min(hi + 1, n)
    r = rho[a:b]
    u[a:b] = np.power(r, m - 1.0) * r

    seg = slice(lo, hi)
    uc = u[seg]
    right = np.zeros(hi - lo)
    left = np.zeros(hi - lo)
    top = min(hi, n - 1)
    right[: top - lo] = u[lo + 1 : top + 1]
    start = max(lo, 1)
    left[start - lo :] = u[start - 1 : hi - 1]
    lap = cp[seg] * (right - uc) + cm[seg] * (left - uc)
    flux = 0.0
    if hi == n and ghost_w > 0.0:
        lap[-1] = lap[-1] + ghost_w * (ghost_u - uc[-1])
        flux = vol[n - 1] * ghost_w * (ghost_u - uc[-1])
    rs = rho[seg]
    p = (m / (m - 1.0)) * np.power(rs, m - 1.0)
    src = rs * _growth(form, g0, pmax, p)
    v = rs + dt * (lap + src)
    out[seg] = v
    if v.size == 0:
        return 0.0, 1e300, -1e300, flux
    return float(np.dot(vol[seg], src)), float(v.min()), float(v.max()), flux


def step_2d(rho, out, u, m, dt, inv_h2, cell_area, form, g0, pmax, ilo, ihi, jlo, jhi):
    n0, n1 = rho.shape
    if ihi <= ilo or jhi <= jlo:
        return 0.0, 1e300, -1e300, 0.0
    ia, ib = max(ilo - 1, 0), min(ihi + 1, n0)
    ja, jb = max(jlo - 1, 0), min(jhi + 1, n1)
    r = rho[ia:ib, ja:jb]
    u[ia:ib, ja:jb] = np.power(r, m - 1.0) * r

    # pad with the centre value so that missing neighbours contribute zero flux
    win = u[ia:ib, ja:jb]
    ci, cj = ilo - ia, jlo - ja
    h, w = ihi - ilo, jhi - jlo
    uc = win[ci : ci + h, cj : cj + w]
    lap = np.zeros((h, w))
    if h and w:
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = np.empty((h, w))
            i0, j0 = ci + di, cj + dj
            src_i = slice(max(i0, 0), min(i0 + h, win.shape[0]))
            src_j = slice(max(j0, 0), min(j0 + w, win.shape[1]))
            nb[...] = uc
            dst_i = slice(src_i.start - i0, src_i.stop - i0)
            dst_j = slice(src_j.start - j0, src_j.stop - j0)
            nb[dst_i, dst_j] = win[src_i, src_j]
            lap = lap + (nb - uc)
    lap = lap * inv_h2
    rs = rho[ilo:ihi, jlo:jhi]
    p = (m / (m - 1.0)) * np.power(rs, m - 1.0)
    srcv = rs * _growth(form, g0, pmax, p)
    v = rs + dt * (lap + srcv)
    out[ilo:ihi, jlo:jhi] = v
    if v.size == 0:
        return 0.0, 1e300, -1e300, 0.0
    return float(cell_area * srcv.sum()), float(v.min()), float(v.max()), 0.0
