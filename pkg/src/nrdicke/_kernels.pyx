# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled right-hand sides and Dormand-Prince 5(4) stepper.

State layout: species m = -1, 0, +1 each contribute (sx, sy, sz); the full
model appends (a_re, a_im).  ``par`` is the packed parameter vector built by
:func:`nrdicke._core.pack_params`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite, fmax, fmin, pow

cnp.import_array()

cdef enum:
    P_WC = 0
    P_KAPPA = 1
    P_GAMMA = 2
    P_OMEGA = 3
    P_G = 6
    P_H = 9
    P_COS = 12
    P_SIN = 15
    P_C = 18
    NPAR = 27
    MAXDIM = 16



# Dormand-Prince tableau
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0
cdef double A73 = 500.0 / 1113.0
cdef double A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0
cdef double A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0
cdef double D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0
cdef double D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0
cdef double D7 = 69997945.0 / 29380423.0


cdef inline void _rhs_full(const double* par, const double* y, double* dy) noexcept nogil:
    cdef double gam = par[P_GAMMA]
    cdef double ar = y[9]
    cdef double ai = y[10]
    cdef double sx, sy, sz, drive
    cdef double src_re = 0.0
    cdef double src_im = 0.0
    cdef int m, o
    for m in range(3):
        o = 3 * m
        sx = y[o]
        sy = y[o + 1]
        sz = y[o + 2]
        # e^{-i m phi} a + c.c.
        drive = 2.0 * (par[P_COS + m] * ar + par[P_SIN + m] * ai) * par[P_G + m]
        dy[o] = -par[P_OMEGA + m] * sy + gam * sx * sz
        dy[o + 1] = par[P_OMEGA + m] * sx - drive * sz + gam * sy * sz
        dy[o + 2] = drive * sy - gam * (1.0 - sz * sz)
        src_re += par[P_H + m] * par[P_SIN + m] * sx
        src_im += par[P_H + m] * par[P_COS + m] * sx
    dy[9] = -par[P_KAPPA] * ar + par[P_WC] * ai + 0.5 * src_re
    dy[10] = -par[P_WC] * ar - par[P_KAPPA] * ai - 0.5 * src_im


cdef inline void _rhs_adiabatic(const double* par, const double* y, double* dy) noexcept nogil:
    cdef double gam = par[P_GAMMA]
    cdef double sx, sy, sz, field
    cdef int m, o
    for m in range(3):
        o = 3 * m
        sx = y[o]
        sy = y[o + 1]
        sz = y[o + 2]
        field = (par[P_C + 3 * m] * y[0] + par[P_C + 3 * m + 1] * y[3]
                 + par[P_C + 3 * m + 2] * y[6])
        dy[o] = -par[P_OMEGA + m] * sy + gam * sx * sz
        dy[o + 1] = par[P_OMEGA + m] * sx + sz * field + gam * sy * sz
        dy[o + 2] = -field * sy - gam * (1.0 - sz * sz)


cdef inline void _rhs(int mode, const double* par, const double* y, double* dy) noexcept nogil:
    if mode == 0:
        _rhs_full(par, y, dy)
    else:
        _rhs_adiabatic(par, y, dy)


def rhs(int mode, double[::1] par, double[::1] y):
    """Evaluate the packed right-hand side once (mode 0 full, 1 adiabatic)."""
    cdef int n = y.shape[0]
    if par.shape[0] != NPAR:
        raise ValueError("packed parameter vector has wrong length")
    if (mode == 0 and n != 11) or (mode == 1 and n != 9):
        raise ValueError("state length does not match mode")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    _rhs(mode, &par[0], &y[0], &o[0])
    return out


cdef double _err_norm(int n, const double* y0, const double* y1, const double* e,
                      double rtol, double atol) noexcept nogil:
    # componentwise (max) norm: every coordinate meets its own tolerance
    cdef double acc = 0.0
    cdef double sc, r
    cdef int i
    for i in range(n):
        sc = atol + rtol * fmax(fabs(y0[i]), fabs(y1[i]))
        r = fabs(e[i]) / sc
        if r > acc:
            acc = r
    return acc


def dopri5(int mode, double[::1] par, double[::1] y0, double t0, double t_end,
           double sample_dt, double rtol, double atol, double max_step,
           double h_min, long max_steps):
    """Integrate and sample on the grid ``t0 + k*sample_dt``.

    Returns ``(samples, status, t_last, n_accepted, n_rejected)`` where
    status is 0 on success, 1 on step underflow, 2 on a non-finite
    right-hand side and 3 when ``max_steps`` is exhausted.  On failure the
    rows after the last good sample are NaN.
    """
    cdef int n = y0.shape[0]
    if n > MAXDIM:
        raise ValueError("state too large")
    if par.shape[0] != NPAR:
        raise ValueError("packed parameter vector has wrong length")
    cdef long n_samp = <long>((t_end - t0) / sample_dt + 1e-9) + 1
    cdef double t_final = t0 + (n_samp - 1) * sample_dt
    out_arr = np.full((n_samp, n), np.nan, dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    cdef double y[MAXDIM]
    cdef double ynew[MAXDIM]
    cdef double ytmp[MAXDIM]
    cdef double k1[MAXDIM]
    cdef double k2[MAXDIM]
    cdef double k3[MAXDIM]
    cdef double k4[MAXDIM]
    cdef double k5[MAXDIM]
    cdef double k6[MAXDIM]
    cdef double k7[MAXDIM]
    cdef double ev[MAXDIM]
    cdef double r2[MAXDIM]
    cdef double r3[MAXDIM]
    cdef double r4[MAXDIM]
    cdef double r5[MAXDIM]
    cdef const double* p = &par[0]
    cdef int i
    cdef long k = 1
    cdef long n_acc = 0
    cdef long n_rej = 0
    cdef int status = 0
    cdef double t = t0
    cdef double h, err, fac, ts, th, th1, d0, d1, d2, h0, h1, sc
    cdef double err_old = 1e-4
    cdef bint last_rejected = False

    with nogil:
        for i in range(n):
            y[i] = y0[i]
            out[0, i] = y[i]
        _rhs(mode, p, y, k1)

        # starting step (Hairer & Wanner, II.4)
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol + rtol * fabs(y[i])
            d0 += (y[i] / sc) * (y[i] / sc)
            d1 += (k1[i] / sc) * (k1[i] / sc)
        d0 = sqrt(d0 / n)
        d1 = sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        h0 = fmin(h0, max_step)
        for i in range(n):
            ytmp[i] = y[i] + h0 * k1[i]
        _rhs(mode, p, ytmp, k2)
        d2 = 0.0
        for i in range(n):
            sc = atol + rtol * fabs(y[i])
            d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc)
        d2 = sqrt(d2 / n) / h0
        if fmax(d1, d2) <= 1e-15:
            h1 = fmax(1e-6, h0 * 1e-3)
        else:
            h1 = pow(0.01 / fmax(d1, d2), 0.2)
        h = fmin(fmin(100.0 * h0, h1), max_step)

        while k < n_samp:
            if n_acc + n_rej >= max_steps:
                status = 3
                break
            if h < h_min:
                status = 1
                break
            if t + h > t_final:
                h = t_final - t
                if h <= 0.0:
                    h = h_min
            for i in range(n):
                ytmp[i] = y[i] + h * A21 * k1[i]
            _rhs(mode, p, ytmp, k2)
            for i in range(n):
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            _rhs(mode, p, ytmp, k3)
            for i in range(n):
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            _rhs(mode, p, ytmp, k4)
            for i in range(n):
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            _rhs(mode, p, ytmp, k5)
            for i in range(n):
                ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                      + A64 * k4[i] + A65 * k5[i])
            _rhs(mode, p, ytmp, k6)
            for i in range(n):
                ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                      + A75 * k5[i] + A76 * k6[i])
            _rhs(mode, p, ynew, k7)
            for i in range(n):
                ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                             + E6 * k6[i] + E7 * k7[i])
            err = _err_norm(n, y, ynew, ev, rtol, atol)
            if not isfinite(err):
                if h * 0.1 < h_min:
                    status = 2
                    break
                h *= 0.1
                n_rej += 1
                last_rejected = True
                continue
            if err <= 1.0:
                # dense output coefficients for the accepted step
                for i in range(n):
                    r2[i] = ynew[i] - y[i]
                    r3[i] = h * k1[i] - r2[i]
                    r4[i] = r2[i] - h * k7[i] - r3[i]
                    r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i]
                                 + D6 * k6[i] + D7 * k7[i])
                while k < n_samp:
                    ts = t0 + k * sample_dt
                    if ts - t > h * (1.0 + 1e-12):
                        break
                    th = fmin((ts - t) / h, 1.0)
                    th1 = 1.0 - th
                    for i in range(n):
                        out[k, i] = y[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])))
                    k += 1
                t += h
                for i in range(n):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                n_acc += 1
                # PI step-size controller
                fac = 0.9 * pow(fmax(err, 1e-10), -0.17) * pow(err_old, 0.04)
                fac = fmin(10.0, fmax(0.2, fac))
                if last_rejected:
                    fac = fmin(1.0, fac)
                err_old = fmax(err, 1e-4)
                h = fmin(h * fac, max_step)
                last_rejected = False
            else:
                fac = fmax(0.2, 0.9 * pow(err, -0.2))
                h *= fac
                n_rej += 1
                last_rejected = True

    return out_arr, status, t, n_acc, n_rej
