"""Ground states of the reciprocal (kappa = 0) limit.

Without cavity loss the adiabatic spin flow derives from an energy written
purely in ``s_x`` on the lower hemisphere.  Minimizing it from a fixed set of
seeds gives the ground-state degeneracy that the dissipative census is
contrasted with.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .model import ModelParams, energy_eff, energy_eff_grad, energy_eff_hessian
from .stationary import SIGN_PATTERNS, Phase, PhaseLabel, label_from_counts

SEED_MAGNITUDES = (0.3, 0.7, 0.95)
E_TOL = 1e-9
GRAD_TOL = 1e-10
DEDUP_TOL = 1e-6
_EDGE = 1.0 - 1e-12


@dataclass(frozen=True)
class GroundConfig:
    sx: np.ndarray
    energy: float
    hessian_positive: bool

    @property
    def is_trivial(self) -> bool:
        return float(np.max(np.abs(self.sx))) < DEDUP_TOL

    def gradient_norm(self, p: ModelParams) -> float:
        return float(np.linalg.norm(energy_eff_grad(self.sx, p)))

    def to_dict(self) -> dict:
        return {"sx": self.sx.tolist(), "energy": self.energy, "hessian_positive": self.hessian_positive}


def reciprocal(p: ModelParams) -> ModelParams:
    """The same parameters with the loss channels switched off."""
    return p.replace(kappa=0.0, gamma=0.0)


def energy_seeds() -> list[np.ndarray]:
    out = [np.zeros(3)]
    for mag in SEED_MAGNITUDES:
        out.extend(mag * np.array(s, dtype=float) for s in SIGN_PATTERNS)
    return out


def _newton_polish(x: np.ndarray, p: ModelParams, steps: int = 20) -> np.ndarray:
    """Undamped Newton on the gradient, kept only while it stays inside the box and improves."""
    for _ in range(steps):
        g = energy_eff_grad(x, p)
        gn = np.linalg.norm(g)
        if gn < 1e-14:
            break
        try:
            step = np.linalg.solve(energy_eff_hessian(x, p), g)
        except np.linalg.LinAlgError:
            break
        y = x - step
        if np.any(np.abs(y) >= 1.0) or np.linalg.norm(energy_eff_grad(y, p)) >= gn:
            break
        x = y
    return x


def _refine(x0: np.ndarray, p: ModelParams) -> np.ndarray:
    if not np.any(x0):
        # the symmetric point is stationary; the Hessian decides whether it is a minimum
        return x0.copy()
    res = minimize(energy_eff, x0, args=(p,), jac=energy_eff_grad, method="L-BFGS-B",
                   bounds=[(-_EDGE, _EDGE)] * 3, options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
    return _newton_polish(np.asarray(res.x, dtype=float), p)


def local_minima(p: ModelParams) -> list[GroundConfig]:
    """Every distinct local minimum reached from the seed set, sorted by energy."""
    p = reciprocal(p)
    found: list[GroundConfig] = []
    for x0 in energy_seeds():
        x = _refine(x0, p)
        if np.linalg.norm(energy_eff_grad(x, p)) > GRAD_TOL:
            continue
        pos = bool(np.all(np.linalg.eigvalsh(energy_eff_hessian(x, p)) > 0))
        if not pos:
            continue
        if any(np.max(np.abs(g.sx - x)) < DEDUP_TOL for g in found):
            continue
        found.append(GroundConfig(x, energy_eff(x, p), pos))
    found.sort(key=lambda g: g.energy)
    return found


def minimize_energy(p: ModelParams, e_tol: float = E_TOL) -> list[GroundConfig]:
    """Global minima: local minima within ``e_tol * Omega`` of the lowest energy."""
    mins = local_minima(p)
    if not mins:
        return []
    e0 = mins[0].energy
    tol = e_tol * min(p.omega)
    return [g for g in mins if g.energy - e0 <= tol]


def ground_label(minima: list[GroundConfig]) -> PhaseLabel:
    if len(minima) == 1 and minima[0].is_trivial:
        return PhaseLabel.of(Phase.NP)
    n = sum(1 for g in minima if not g.is_trivial)
    if n == 0:
        # no minimum at all is not a physical outcome; keep it visible
        return PhaseLabel(Phase.NP, 0, True, 0)
    if len(minima) != n:
        return PhaseLabel(label_from_counts(True, n).tag, n, True, len(minima))
    return label_from_counts(True, n)


def ground_phase(phi: float, lam: float, p: ModelParams, e_tol: float = E_TOL) -> PhaseLabel:
    """NP / SOP / pFSOP / FSOP by the number of degenerate global minima (1, 2, 4, 6)."""
    q = reciprocal(p).replace(phi=phi).with_lambda(lam)
    return ground_label(minimize_energy(q, e_tol))


def local_energy(s: float, lam: float, omega: float, omega_c: float) -> float:
    return -0.5 * omega * math.sqrt(1.0 - s * s) - lam * lam / (4.0 * omega_c) * s * s


def local_spin_minimum(lam: float, p: ModelParams) -> float:
    """Positive minimizer of the single-species part of the energy (0 below threshold).

    A bounded scalar minimization locates the well; function values alone pin
    a flat minimum only to about sqrt(machine eps), so the bracket is then
    closed on the sign change of the slope.
    """
    om = p.omega[1]
    if lam <= math.sqrt(om * p.omega_c):
        return 0.0
    res = minimize_scalar(local_energy, bounds=(0.0, 1.0), args=(lam, om, p.omega_c),
                          method="bounded", options={"xatol": 1e-12})
    x = float(res.x)

    def slope(s):
        return 0.5 * om / math.sqrt(1.0 - s * s) - lam * lam / (2.0 * p.omega_c)

    lo, hi = max(x - 1e-6, 1e-300), min(x + 1e-6, _EDGE)
    if slope(lo) < 0.0 < slope(hi):
        x = brentq(slope, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps)
    return float(x)
