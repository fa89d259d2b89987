"""Pure-Python twin of :mod:`nrdicke._kernels`.

Same tableau, same step controller and the same dense-output formula, so the
two backends agree to integration tolerance (not bit-for-bit: the compiled
core evaluates the sums in a different order).
"""
from __future__ import annotations

import math

import numpy as np

P_WC, P_KAPPA, P_GAMMA = 0, 1, 2
P_OMEGA, P_G, P_H, P_COS, P_SIN, P_C = 3, 6, 9, 12, 15, 18
NPAR = 27

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0


def _make_rhs(mode: int, par: np.ndarray):
    par = np.asarray(par, dtype=float)
    gam = par[P_GAMMA]
    om = par[P_OMEGA:P_OMEGA + 3]
    if mode == 0:
        wc, kap = par[P_WC], par[P_KAPPA]
        g = par[P_G:P_G + 3]
        hc = par[P_H:P_H + 3] * par[P_COS:P_COS + 3]
        hs = par[P_H:P_H + 3] * par[P_SIN:P_SIN + 3]
        cg = 2.0 * par[P_COS:P_COS + 3] * g
        sg = 2.0 * par[P_SIN:P_SIN + 3] * g

        def f(y):
            s = y[:9].reshape(3, 3)
            sx, sy, sz = s[:, 0], s[:, 1], s[:, 2]
            ar, ai = y[9], y[10]
            drive = cg * ar + sg * ai
            out = np.empty(11)
            out[0:9:3] = -om * sy + gam * sx * sz
            out[1:9:3] = om * sx - drive * sz + gam * sy * sz
            out[2:9:3] = drive * sy - gam * (1.0 - sz * sz)
            out[9] = -kap * ar + wc * ai + 0.5 * (hs @ sx)
            out[10] = -wc * ar - kap * ai - 0.5 * (hc @ sx)
            return out
    else:
        cm = par[P_C:P_C + 9].reshape(3, 3)

        def f(y):
            sx, sy, sz = y[0:9:3], y[1:9:3], y[2:9:3]
            field = cm @ sx
            out = np.empty(9)
            out[0::3] = -om * sy + gam * sx * sz
            out[1::3] = om * sx + sz * field + gam * sy * sz
            out[2::3] = -field * sy - gam * (1.0 - sz * sz)
            return out
    return f


def rhs(mode: int, par, y):
    y = np.asarray(y, dtype=float)
    if len(par) != NPAR:
        raise ValueError("packed parameter vector has wrong length")
    if (mode == 0 and y.size != 11) or (mode == 1 and y.size != 9):
        raise ValueError("state length does not match mode")
    return _make_rhs(mode, par)(y)


def dopri5(mode, par, y0, t0, t_end, sample_dt, rtol, atol, max_step, h_min, max_steps):
    f = _make_rhs(mode, par)
    y = np.array(y0, dtype=float)
    n = y.size
    n_samp = int((t_end - t0) / sample_dt + 1e-9) + 1
    t_final = t0 + (n_samp - 1) * sample_dt
    out = np.full((n_samp, n), np.nan)
    out[0] = y
    k1 = f(y)

    sc = atol + rtol * np.abs(y)
    d0 = math.sqrt(np.mean((y / sc) ** 2))
    d1 = math.sqrt(np.mean((k1 / sc) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    k2 = f(y + h0 * k1)
    d2 = math.sqrt(np.mean(((k2 - k1) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1, max_step)

    t = t0
    k = 1
    n_acc = n_rej = 0
    status = 0
    err_old = 1e-4
    last_rejected = False
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
        k2 = f(y + h * A21 * k1)
        k3 = f(y + h * (A31 * k1 + A32 * k2))
        k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = f(ynew)
        ev = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = float(np.max(np.abs(ev) / sc))
        if not math.isfinite(err):
            if h * 0.1 < h_min:
                status = 2
                break
            h *= 0.1
            n_rej += 1
            last_rejected = True
            continue
        if err <= 1.0:
            r2 = ynew - y
            r3 = h * k1 - r2
            r4 = r2 - h * k7 - r3
            r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            while k < n_samp:
                ts = t0 + k * sample_dt
                if ts - t > h * (1.0 + 1e-12):
                    break
                th = min((ts - t) / h, 1.0)
                th1 = 1.0 - th
                out[k] = y + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
                k += 1
            t += h
            y = ynew
            k1 = k7
            n_acc += 1
            fac = 0.9 * max(err, 1e-10) ** -0.17 * err_old ** 0.04
            fac = min(10.0, max(0.2, fac))
            if last_rejected:
                fac = min(1.0, fac)
            err_old = max(err, 1e-4)
            h = min(h * fac, max_step)
            last_rejected = False
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            n_rej += 1
            last_rejected = True
    return out, status, t, n_acc, n_rej
