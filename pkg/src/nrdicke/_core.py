"""Backend selection for the integration kernels.

The compiled extension is used when it imports; otherwise the pure-Python
twin in :mod:`nrdicke._fallback` is used.  Set ``NRDICKE_PURE=1`` to force
the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_kernels = None
if not os.environ.get("NRDICKE_PURE"):
    try:
        from . import _kernels
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _kernels = None

FULL = 0
ADIABATIC = 1


def pack_params(p) -> np.ndarray:
    """Flatten ModelParams into the vector layout the kernels expect."""
    m = np.array([-1.0, 0.0, 1.0])
    omega = np.asarray(p.omega, dtype=float)
    lam = np.asarray(p.lam, dtype=float)
    w = np.asarray(p.weight, dtype=float)
    sw = np.sqrt(w)
    g = lam / sw  # spin-side coupling
    h = lam * sw  # cavity-side coupling
    cph = np.cos(m * p.phi)
    sph = np.sin(m * p.phi)
    denom = p.omega_c ** 2 + p.kappa ** 2
    dphi = (m[:, None] - m[None, :]) * p.phi
    d = p.omega_c * np.cos(dphi) + p.kappa * np.sin(dphi)
    cmat = g[:, None] * h[None, :] * d / denom
    return np.concatenate([[p.omega_c, p.kappa, p.gamma], omega, g, h, cph, sph, cmat.ravel()])


def _impl(backend: str | None):
    if backend is None:
        return _kernels if _kernels is not None else _fallback
    if backend == "cython":
        if _kernels is None:
            raise RuntimeError("compiled kernels are not available")
        return _kernels
    if backend == "python":
        return _fallback
    raise ValueError(f"unknown backend {backend!r}")


def rhs_packed(mode: int, par: np.ndarray, y: np.ndarray, backend: str | None = None) -> np.ndarray:
    return _impl(backend).rhs(mode, np.ascontiguousarray(par, dtype=float),
                              np.ascontiguousarray(y, dtype=float))


def dopri5(mode, par, y0, t0, t_end, sample_dt, rtol, atol, max_step, h_min=1e-12,
           max_steps=50_000_000, backend: str | None = None):
    return _impl(backend).dopri5(
        int(mode), np.ascontiguousarray(par, dtype=float), np.ascontiguousarray(y0, dtype=float),
        float(t0), float(t_end), float(sample_dt), float(rtol), float(atol), float(max_step),
        float(h_min), int(max_steps),
    )
