"""Population and frequency compensation of species-dependent couplings.

In the spinor realization the bare couplings differ between the m = 0 and
m = +-1 sublevels.  Choosing populations so that ``lambda_m sqrt(N_m)`` is
the same for every species (the renormalized coupling ``Lambda``) and,
optionally, spin frequencies with ``Omega_m N_m`` constant makes the
stationary equations identical to the homogeneous ones at gamma = 0.
Populations are expressed as weights relative to ``N_+-1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelParams

PHI_TOL = 1e-9


@dataclass(frozen=True)
class CompensationPlan:
    phi: float
    pop_ratio: float        # N_0 / N_+-1
    coupling_ratio: float   # lambda_+-1 / lambda_0
    freq_ratio: float       # Omega_0 / Omega_+-1
    Lambda: float

    @property
    def weights(self) -> tuple[float, float, float]:
        return (1.0, self.pop_ratio, 1.0)

    @property
    def couplings(self) -> tuple[float, float, float]:
        lam0 = self.Lambda / self.coupling_ratio
        return (self.Lambda, lam0, self.Lambda)

    def renormalized(self) -> np.ndarray:
        """``lambda_m sqrt(w_m)`` per species; uniform under a valid plan."""
        return np.asarray(self.couplings) * np.sqrt(self.weights)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CompensationPlan":
        return cls(**{k: float(d[k]) for k in ("phi", "pop_ratio", "coupling_ratio", "freq_ratio", "Lambda")})

    @classmethod
    def from_json(cls, text: str) -> "CompensationPlan":
        return cls.from_dict(json.loads(text))


def pop_ratio(phi: float) -> float:
    """``sqrt(1 + tan^2 phi)``; diverges at phi = pi/2."""
    c = math.cos(phi)
    if abs(c) < PHI_TOL:
        raise ValueError("population ratio is unbounded at phi = pi/2")
    return math.sqrt(1.0 + math.tan(phi) ** 2)


def make_plan(phi: float, Lambda: float, compensate_freq: bool = True) -> CompensationPlan:
    r = pop_ratio(phi)
    # bare ratio lambda_+-1/lambda_0 = sqrt(N_+-1/N_0) * r, which with N_0/N_+-1 = r is sqrt(r)
    return CompensationPlan(float(phi), r, math.sqrt(r), 1.0 / r if compensate_freq else 1.0, float(Lambda))


def params_from_plan(plan: CompensationPlan, base: ModelParams) -> ModelParams:
    """Install per-species populations, couplings and frequencies on top of ``base``.

    ``base`` supplies the cavity, damping and the +-1 spin frequency.
    """
    om = base.omega[0]
    return base.replace(phi=plan.phi, weight=plan.weights, lam=plan.couplings,
                        omega=(om, om * plan.freq_ratio, om))


def compensated_params(phi: float, Lambda: float, base: ModelParams, compensate_freq: bool = True) -> ModelParams:
    return params_from_plan(make_plan(phi, Lambda, compensate_freq), base)


def vertex_radii(vertices: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(vertices, dtype=float), axis=1)


def distortion(vertices: np.ndarray) -> float:
    """Largest relative deviation of the vertex radii from their mean (0 for a regular polygon).

    Rows holding NaN (unvisited sectors) are skipped.
    """
    r = vertex_radii(vertices)
    r = r[np.isfinite(r)]
    if len(r) == 0:
        return math.inf
    mean = float(np.mean(r))
    return float(np.max(np.abs(r - mean)) / mean) if mean > 0 else math.inf
