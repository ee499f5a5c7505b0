# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Explicit PME update kernels (compiled)."""

from libc.math cimport pow


cdef inline double _growth(int form, double g0, double pmax, double p) nogil:
    if form == 2:
        return g0 * (1.0 - p / pmax)
    if form == 1:
        return g0
    return 0.0


def step_1d(double[::1] rho, double[::1] out, double[::1] u,
            double[::1] cp, double[::1] cm, double[::1] vol,
            double m, double dt, int form, double g0, double pmax,
            Py_ssize_t lo, Py_ssize_t hi, double ghost_w, double ghost_u):
    cdef Py_ssize_t n = rho.shape[0]
    cdef Py_ssize_t i, a, b
    cdef double rm1, lap, p, src, v, left, right
    cdef double coef = m / (m - 1.0)
    cdef double source = 0.0, flux = 0.0
    cdef double vmin = 1e300, vmax = -1e300

    a = lo - 1 if lo > 0 else 0
    b = hi + 1 if hi < n else n
    with nogil:
        for i in range(a, b):
            u[i] = pow(rho[i], m - 1.0) * rho[i]
        for i in range(lo, hi):
            right = u[i + 1] if i + 1 < n else 0.0
            left = u[i - 1] if i > 0 else 0.0
            lap = cp[i] * (right - u[i]) + cm[i] * (left - u[i])
            if i == n - 1 and ghost_w > 0.0:
                lap = lap + ghost_w * (ghost_u - u[i])
                flux += vol[i] * ghost_w * (ghost_u - u[i])
            rm1 = pow(rho[i], m - 1.0)
            p = coef * rm1
            src = rho[i] * _growth(form, g0, pmax, p)
            v = rho[i] + dt * (lap + src)
            out[i] = v
            source += vol[i] * src
            if v < vmin or v != v:
                vmin = v
            if v > vmax:
                vmax = v
    return source, vmin, vmax, flux


def step_2d(double[:, ::1] rho, double[:, ::1] out, double[:, ::1] u,
            double m, double dt, double inv_h2, double cell_area,
            int form, double g0, double pmax,
            Py_ssize_t ilo, Py_ssize_t ihi, Py_ssize_t jlo, Py_ssize_t jhi):
    cdef Py_ssize_t n0 = rho.shape[0], n1 = rho.shape[1]
    cdef Py_ssize_t i, j, ia, ib, ja, jb
    cdef double lap, p, src, v, uc, rm1
    cdef double coef = m / (m - 1.0)
    cdef double source = 0.0
    cdef double vmin = 1e300, vmax = -1e300

    ia = ilo - 1 if ilo > 0 else 0
    ib = ihi + 1 if ihi < n0 else n0
    ja = jlo - 1 if jlo > 0 else 0
    jb = jhi + 1 if jhi < n1 else n1
    with nogil:
        for i in range(ia, ib):
            for j in range(ja, jb):
                u[i, j] = pow(rho[i, j], m - 1.0) * rho[i, j]
        for i in range(ilo, ihi):
            for j in range(jlo, jhi):
                uc = u[i, j]
                lap = 0.0
                if i + 1 < n0:
                    lap = lap + (u[i + 1, j] - uc)
                if i > 0:
                    lap = lap + (u[i - 1, j] - uc)
                if j + 1 < n1:
                    lap = lap + (u[i, j + 1] - uc)
                if j > 0:
                    lap = lap + (u[i, j - 1] - uc)
                lap = lap * inv_h2
                rm1 = pow(rho[i, j], m - 1.0)
                p = coef * rm1
                src = rho[i, j] * _growth(form, g0, pmax, p)
                v = rho[i, j] + dt * (lap + src)
                out[i, j] = v
                source += cell_area * src
                if v < vmin or v != v:
                    vmin = v
                if v > vmax:
                    vmax = v
    return source, vmin, vmax, 0.0
