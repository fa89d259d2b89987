"""Mean-field model of three spin species coupled to one damped cavity mode.

All quantities are normalized: spins ``s = S/N_m`` live on the unit Bloch
sphere and the cavity amplitude is ``a = alpha/sqrt(N)``.  Species are always
ordered ``m = -1, 0, +1``; every per-species array below follows that order.

Inhomogeneous populations enter through ``weight_m = N_m/N``.  With coupling
``lambda_m/(2 sqrt(N_m))`` per species the spin side sees ``lambda_m/sqrt(w_m)``
and the cavity is driven by ``lambda_m sqrt(w_m)``; both reduce to ``lambda``
when all weights are one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

SPECIES = (-1, 0, 1)
M = np.array(SPECIES, dtype=float)

# exact Z3 rotation constants
_COS_2PI3 = -0.5
_SIN_2PI3 = math.sqrt(3.0) / 2.0


class SpeciesIndex(enum.IntEnum):
    MINUS = -1
    ZERO = 0
    PLUS = 1

    @property
    def slot(self) -> int:
        """Row of this species in every (3, ...) array."""
        return int(self) + 1


def _triple(x, name: str) -> tuple[float, float, float]:
    arr = np.broadcast_to(np.asarray(x, dtype=float), (3,))
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants in units of the bare spin frequency.

    ``omega``, ``lam`` and ``weight`` are per species even in the homogeneous
    case; pass scalars to broadcast.
    """

    omega_c: float = 500.0
    kappa: float = 150.0
    gamma: float = 0.0
    phi: float = 0.0
    omega: tuple[float, float, float] = (1.0, 1.0, 1.0)
    lam: tuple[float, float, float] = (0.0, 0.0, 0.0)
    weight: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "omega", _triple(self.omega, "omega"))
        object.__setattr__(self, "lam", _triple(self.lam, "lam"))
        object.__setattr__(self, "weight", _triple(self.weight, "weight"))
        for name in ("omega_c", "kappa", "gamma", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega_c <= 0:
            raise ValueError("omega_c must be positive")
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("kappa and gamma must be non-negative")
        if min(self.omega) <= 0 or min(self.weight) <= 0:
            raise ValueError("omega and weight must be positive")
        if min(self.lam) < 0:
            raise ValueError("lam must be non-negative")

    @classmethod
    def homogeneous(cls, lam: float = 0.0, phi: float = 0.0, gamma: float = 0.0,
                    omega_c: float = 500.0, kappa: float = 150.0, omega: float = 1.0) -> "ModelParams":
        return cls(omega_c=omega_c, kappa=kappa, gamma=gamma, phi=phi,
                   omega=(omega,) * 3, lam=(lam,) * 3)

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.omega)) == 1 and len(set(self.lam)) == 1 and len(set(self.weight)) == 1

    def replace(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def with_lambda(self, lam: float) -> "ModelParams":
        """Scale all couplings so that the reference (m=0 renormalized) value is ``lam``.

        For homogeneous parameters this simply sets every coupling to ``lam``.
        """
        if self.is_homogeneous:
            return replace(self, lam=(lam,) * 3)
        ref = self.lam[1] * math.sqrt(self.weight[1])
        if ref == 0:
            raise ValueError("cannot rescale zero couplings")
        return replace(self, lam=tuple(v * lam / ref for v in self.lam))

    def to_dict(self) -> dict:
        return {"omega_c": self.omega_c, "kappa": self.kappa, "gamma": self.gamma, "phi": self.phi,
                "omega": list(self.omega), "lam": list(self.lam), "weight": list(self.weight)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(**{k: d[k] for k in ("omega_c", "kappa", "gamma", "phi", "omega", "lam", "weight") if k in d})

    # derived couplings
    @property
    def spin_coupling(self) -> np.ndarray:
        return np.asarray(self.lam) / np.sqrt(self.weight)

    @property
    def cavity_coupling(self) -> np.ndarray:
        return np.asarray(self.lam) * np.sqrt(self.weight)


class SpinVector(NamedTuple):
    sx: float
    sy: float
    sz: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.sx ** 2 + self.sy ** 2 + self.sz ** 2)


class CollectiveCoords(NamedTuple):
    xc: float
    xd1: float
    xd2: float


@dataclass(frozen=True, eq=False)
class SystemState:
    """Three Bloch vectors (rows m=-1,0,+1; columns x,y,z) and the cavity amplitude."""

    spins: np.ndarray
    cavity: complex = 0j

    def __post_init__(self):
        s = np.array(self.spins, dtype=float).reshape(3, 3)
        s.setflags(write=False)
        object.__setattr__(self, "spins", s)
        object.__setattr__(self, "cavity", complex(self.cavity))

    @classmethod
    def normal(cls) -> "SystemState":
        """The trivial fixed point: all spins down, empty cavity."""
        return cls(np.array([[0.0, 0.0, -1.0]] * 3), 0j)

    @classmethod
    def from_vector(cls, y: Sequence[float]) -> "SystemState":
        y = np.asarray(y, dtype=float)
        if y.size == 11:
            return cls(y[:9], complex(y[9], y[10]))
        if y.size == 9:
            return cls(y, 0j)
        raise ValueError("state vector must have 9 or 11 entries")

    def to_vector(self, with_cavity: bool = True) -> np.ndarray:
        v = self.spins.ravel()
        if with_cavity:
            return np.concatenate([v, [self.cavity.real, self.cavity.imag]])
        return v.copy()

    def spin(self, m: int) -> SpinVector:
        return SpinVector(*self.spins[SpeciesIndex(m).slot])

    @property
    def sx(self) -> np.ndarray:
        return self.spins[:, 0]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.spins, axis=1)

    def is_physical(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.norms() - 1.0) < tol) and math.isfinite(abs(self.cavity)))

    def distance(self, other: "SystemState") -> float:
        return float(max(np.max(np.abs(self.spins - other.spins)), abs(self.cavity - other.cavity)))


class SymmetryOp(enum.Enum):
    Z2_PARITY = "Z2Parity"
    SPECIES_MIRROR = "SpeciesMirror"
    Z3_CYCLIC = "Z3Cyclic"


def d_coupling(Phi, p: ModelParams):
    """Cavity-mediated kernel ``omega_c cos(Phi) + kappa sin(Phi)``."""
    return p.omega_c * np.cos(Phi) + p.kappa * np.sin(Phi)


def coupling_matrix(p: ModelParams) -> np.ndarray:
    """Matrix ``C`` with ``ds_y/dt = Omega s_x + s_z (C s_x) + ...`` after eliminating the cavity."""
    dphi = (M[:, None] - M[None, :]) * p.phi
    return (p.spin_coupling[:, None] * p.cavity_coupling[None, :] * d_coupling(dphi, p)
            / (p.omega_c ** 2 + p.kappa ** 2))


def _spins_array(spins) -> np.ndarray:
    if isinstance(spins, SystemState):
        return spins.spins
    return np.asarray(spins, dtype=float).reshape(3, 3)


def rhs_full(state: SystemState, p: ModelParams) -> SystemState:
    """Time derivative of spins and cavity (returned in a SystemState container)."""
    s = state.spins
    sx, sy, sz = s[:, 0], s[:, 1], s[:, 2]
    a = state.cavity
    om = np.asarray(p.omega)
    drive = p.spin_coupling * 2.0 * np.real(np.exp(-1j * M * p.phi) * a)
    d = np.empty((3, 3))
    d[:, 0] = -om * sy + p.gamma * sx * sz
    d[:, 1] = om * sx - drive * sz + p.gamma * sy * sz
    d[:, 2] = drive * sy - p.gamma * (1.0 - sz * sz)
    da = -(1j * p.omega_c + p.kappa) * a - 0.5j * np.sum(p.cavity_coupling * np.exp(1j * M * p.phi) * sx)
    return SystemState(d, da)


def cavity_adiabatic(spins, p: ModelParams) -> complex:
    """Cavity amplitude slaved to the instantaneous spin configuration."""
    sx = _spins_array(spins)[:, 0]
    pref = -(p.omega_c + 1j * p.kappa) / (2.0 * (p.omega_c ** 2 + p.kappa ** 2))
    return complex(pref * np.sum(p.cavity_coupling * np.exp(1j * M * p.phi) * sx))


def rhs_adiabatic(spins, p: ModelParams) -> np.ndarray:
    """Spin-only time derivative, shape (3, 3)."""
    s = _spins_array(spins)
    sx, sy, sz = s[:, 0], s[:, 1], s[:, 2]
    om = np.asarray(p.omega)
    field = coupling_matrix(p) @ sx
    d = np.empty((3, 3))
    d[:, 0] = -om * sy + p.gamma * sx * sz
    d[:, 1] = om * sx + sz * field + p.gamma * sy * sz
    d[:, 2] = -field * sy - p.gamma * (1.0 - sz * sz)
    return d


def apply_symmetry(state: SystemState, op: SymmetryOp | str) -> SystemState:
    """Apply one of the model's discrete symmetries.

    ``SPECIES_MIRROR`` maps a solution at ``phi`` onto one at ``pi - phi``;
    ``Z3_CYCLIC`` is a symmetry only at ``phi = 2pi/3``.
    """
    op = SymmetryOp(op)
    s = state.spins
    a = state.cavity
    if op is SymmetryOp.Z2_PARITY:
        out = s.copy()
        out[:, :2] *= -1.0
        return SystemState(out, -a)
    if op is SymmetryOp.SPECIES_MIRROR:
        out = s[::-1].copy()
        out[[0, 2], :2] *= -1.0
        return SystemState(out, a)
    if op is SymmetryOp.Z3_CYCLIC:
        # new species m takes the old species m-1 (cyclically)
        out = s[[2, 0, 1]]
        rot = complex(a.real * _COS_2PI3 - a.imag * _SIN_2PI3, a.real * _SIN_2PI3 + a.imag * _COS_2PI3)
        return SystemState(out, rot)
    raise ValueError(f"unknown symmetry {op}")  # pragma: no cover


def mirror_params(p: ModelParams) -> ModelParams:
    """Parameters seen by a mirror-transformed state: phi -> pi - phi, species +-1 swapped."""
    return replace(p, phi=math.pi - p.phi, omega=p.omega[::-1], lam=p.lam[::-1], weight=p.weight[::-1])


def collective_coords(spins) -> CollectiveCoords:
    sx = _spins_array(spins)[:, 0]
    sm, s0, sp = sx
    return CollectiveCoords((sp + s0 + sm) / math.sqrt(3.0),
                            (sp - 2.0 * s0 + sm) / math.sqrt(6.0),
                            (-sp + sm) / math.sqrt(2.0))


def collective_series(sx: np.ndarray) -> np.ndarray:
    """Vectorized collective coordinates for an (n, 3) array of s_x; returns (n, 3)."""
    sx = np.asarray(sx, dtype=float)
    sm, s0, sp = sx[..., 0], sx[..., 1], sx[..., 2]
    return np.stack([(sp + s0 + sm) / math.sqrt(3.0),
                     (sp - 2.0 * s0 + sm) / math.sqrt(6.0),
                     (-sp + sm) / math.sqrt(2.0)], axis=-1)


def energy_eff(sx, p: ModelParams) -> float:
    """Spin-only mean-field energy per particle in the reciprocal limit (kappa ignored).

    Assumes the lower hemisphere ``s_z < 0``.
    """
    sx = np.asarray(sx, dtype=float)
    if np.any(np.abs(sx) > 1.0):
        raise ValueError("|s_x| must not exceed 1")
    lam = np.asarray(p.lam)
    om = np.asarray(p.omega)
    local = np.sum(-0.5 * om * np.sqrt(1.0 - sx ** 2) - lam ** 2 / (4.0 * p.omega_c) * sx ** 2)
    c1, c2 = math.cos(p.phi), math.cos(2.0 * p.phi)
    inter = -(1.0 / (2.0 * p.omega_c)) * (lam[0] * lam[1] * sx[0] * sx[1] * c1
                                          + lam[2] * lam[1] * sx[2] * sx[1] * c1
                                          + lam[0] * lam[2] * sx[0] * sx[2] * c2)
    return float(local + inter)


def energy_eff_grad(sx, p: ModelParams) -> np.ndarray:
    sx = np.asarray(sx, dtype=float)
    lam = np.asarray(p.lam)
    om = np.asarray(p.omega)
    c1, c2 = math.cos(p.phi), math.cos(2.0 * p.phi)
    g = 0.5 * om * sx / np.sqrt(1.0 - sx ** 2) - lam ** 2 / (2.0 * p.omega_c) * sx
    k = 1.0 / (2.0 * p.omega_c)
    g[0] -= k * (lam[0] * lam[1] * sx[1] * c1 + lam[0] * lam[2] * sx[2] * c2)
    g[1] -= k * (lam[0] * lam[1] * sx[0] * c1 + lam[2] * lam[1] * sx[2] * c1)
    g[2] -= k * (lam[2] * lam[1] * sx[1] * c1 + lam[0] * lam[2] * sx[0] * c2)
    return g


def energy_eff_hessian(sx, p: ModelParams) -> np.ndarray:
    sx = np.asarray(sx, dtype=float)
    lam = np.asarray(p.lam)
    om = np.asarray(p.omega)
    c1, c2 = math.cos(p.phi), math.cos(2.0 * p.phi)
    k = 1.0 / (2.0 * p.omega_c)
    h = np.diag(0.5 * om / (1.0 - sx ** 2) ** 1.5 - lam ** 2 / (2.0 * p.omega_c))
    h[0, 1] = h[1, 0] = -k * lam[0] * lam[1] * c1
    h[1, 2] = h[2, 1] = -k * lam[1] * lam[2] * c1
    h[0, 2] = h[2, 0] = -k * lam[0] * lam[2] * c2
    return h


def energy_full(state: SystemState, p: ModelParams) -> float:
    """Mean-field energy per particle of the closed system (conserved when kappa = gamma = 0)."""
    s = state.spins
    a = state.cavity
    drive = 2.0 * np.real(np.exp(-1j * M * p.phi) * a)
    return float(p.omega_c * abs(a) ** 2
                 + np.sum(0.5 * np.asarray(p.weight) * np.asarray(p.omega) * s[:, 2]
                          + 0.5 * p.cavity_coupling * drive * s[:, 0]))


def random_state(rng: np.random.Generator, with_cavity: bool = True, scale: float = 0.1) -> SystemState:
    """Uniform random point on (S^2)^3 plus a Gaussian cavity amplitude."""
    v = rng.standard_normal((3, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    a = complex(*(scale * rng.standard_normal(2))) if with_cavity else 0j
    return SystemState(v, a)


def reduced_rhs(x, sigma, p: ModelParams) -> np.ndarray:
    """Adiabatic flow in the chart (s_x, s_y) with ``s_z = sigma sqrt(1 - s_x^2 - s_y^2)``.

    ``x`` is ``(sx_-1, sx_0, sx_1, sy_-1, sy_0, sy_1)``; returns the matching
    six time derivatives.
    """
    x = np.asarray(x, dtype=float)
    sx, sy = x[:3], x[3:]
    sz = np.asarray(sigma, dtype=float) * np.sqrt(np.maximum(1.0 - sx ** 2 - sy ** 2, 0.0))
    om = np.asarray(p.omega)
    field = coupling_matrix(p) @ sx
    return np.concatenate([-om * sy + p.gamma * sx * sz,
                           om * sx + sz * field + p.gamma * sy * sz])


def reduced_jacobian(x, sigma, p: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`reduced_rhs` (same coordinate order)."""
    x = np.asarray(x, dtype=float)
    sx, sy = x[:3], x[3:]
    sz = np.asarray(sigma, dtype=float) * np.sqrt(1.0 - sx ** 2 - sy ** 2)
    if np.any(np.abs(sz) < 1e-14):
        raise ValueError("chart is singular on the equator")
    om = np.asarray(p.omega)
    g = p.gamma
    cm = coupling_matrix(p)
    field = cm @ sx
    dzx = -sx / sz
    dzy = -sy / sz
    j = np.zeros((6, 6))
    j[:3, :3] = np.diag(g * (sz + sx * dzx))
    j[:3, 3:] = np.diag(-om + g * sx * dzy)
    j[3:, :3] = sz[:, None] * cm + np.diag(om + dzx * field + g * sy * dzx)
    j[3:, 3:] = np.diag(dzy * field + g * (sz + sy * dzy))
    return j
