"""Trajectory integration on a uniform output grid."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .model import SPECIES, ModelParams, SystemState


class Mode(enum.Enum):
    FULL = "full"
    ADIABATIC = "adiabatic"


class IntegrationError(RuntimeError):
    """Raised when the stepper cannot continue; carries the last good time."""

    def __init__(self, message: str, t_last: float, partial: "Trajectory | None" = None):
        super().__init__(f"{message} (last good t={t_last:.6g})")
        self.t_last = t_last
        self.partial = partial


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 2000.0
    sample_dt: float = 0.1
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 1.0
    mode: Mode = Mode.ADIABATIC
    h_min: float = 1e-12
    max_steps: int = 200_000_000

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.sample_dt <= self.t_end):
            raise ValueError("need 0 < sample_dt <= t_end")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled states.

    ``y`` holds one row per sample: nine spin components (species -1, 0, +1,
    each x, y, z) followed by Re a and Im a.  In adiabatic runs the cavity
    columns are filled from the slaved amplitude.
    """

    times: np.ndarray
    y: np.ndarray
    params: ModelParams
    mode: Mode = Mode.ADIABATIC
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.y) or len(self.times) < 2:
            raise ValueError("trajectory needs at least two aligned samples")

    def __len__(self):
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def spins(self) -> np.ndarray:
        """Array of shape (n, 3, 3)."""
        return self.y[:, :9].reshape(-1, 3, 3)

    @property
    def sx(self) -> np.ndarray:
        return self.y[:, 0:9:3]

    @property
    def sy(self) -> np.ndarray:
        return self.y[:, 1:9:3]

    @property
    def sz(self) -> np.ndarray:
        return self.y[:, 2:9:3]

    @property
    def cavity(self) -> np.ndarray:
        return self.y[:, 9] + 1j * self.y[:, 10]

    def state(self, i: int) -> SystemState:
        return SystemState.from_vector(self.y[i])

    @property
    def final(self) -> SystemState:
        return self.state(-1)

    def window(self, start: int, stop: int | None = None) -> "Trajectory":
        return Trajectory(self.times[start:stop], self.y[start:stop], self.params, self.mode, self.stats)

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.spins, axis=2) - 1.0)))

    def to_csv(self, fh) -> None:
        w = csv.writer(fh)
        w.writerow(csv_header())
        for t, row in zip(self.times, self.y):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def csv_header() -> list[str]:
    cols = ["t"]
    for m in SPECIES:
        cols += [f"sx_{m}", f"sy_{m}", f"sz_{m}"]
    return cols + ["a_re", "a_im"]


def read_csv(fh, params: ModelParams, mode: Mode = Mode.ADIABATIC) -> Trajectory:
    """Inverse of :meth:`Trajectory.to_csv`; leading ``#`` comment lines are skipped."""
    r = csv.reader(line for line in fh if not line.startswith("#"))
    header = next(r)
    if header != csv_header():
        raise ValueError("unexpected trajectory header")
    data = np.array([[float(v) for v in row] for row in r])
    return Trajectory(data[:, 0], data[:, 1:], params, mode)


def _slaved_cavity(y9: np.ndarray, p: ModelParams) -> np.ndarray:
    m = np.array(SPECIES, dtype=float)
    pref = -(p.omega_c + 1j * p.kappa) / (2.0 * (p.omega_c ** 2 + p.kappa ** 2))
    return pref * (y9[:, 0:9:3] * (p.cavity_coupling * np.exp(1j * m * p.phi))).sum(axis=1)


def integrate(state0: SystemState, p: ModelParams, cfg: IntegratorConfig = IntegratorConfig(),
              t0: float = 0.0, backend: str | None = None) -> Trajectory:
    """Integrate from ``state0`` and sample every ``cfg.sample_dt`` up to ``t0 + cfg.t_end``.

    Adiabatic mode ignores ``state0.cavity`` and reconstructs the cavity from
    the spins.  Raises :class:`IntegrationError` on step underflow or a
    non-finite right-hand side.
    """
    if not state0.is_physical(1e-6):
        raise ValueError("initial spins must lie on the unit sphere")
    par = _core.pack_params(p)
    if cfg.mode is Mode.FULL:
        mode, y0 = _core.FULL, state0.to_vector(True)
    else:
        mode, y0 = _core.ADIABATIC, state0.to_vector(False)
    out, status, t_last, n_acc, n_rej = _core.dopri5(
        mode, par, y0, t0, t0 + cfg.t_end, cfg.sample_dt, cfg.rel_tol, cfg.abs_tol,
        cfg.max_step, cfg.h_min, cfg.max_steps, backend=backend)
    n = out.shape[0]
    times = t0 + cfg.sample_dt * np.arange(n)
    if mode == _core.ADIABATIC:
        a = _slaved_cavity(out, p)
        out = np.column_stack([out, a.real, a.imag])
    stats = {"accepted": int(n_acc), "rejected": int(n_rej), "status": int(status)}
    if status != 0:
        good = np.isfinite(out).all(axis=1)
        k = int(np.argmin(good)) if not good.all() else n
        partial = Trajectory(times[:k], out[:k], p, cfg.mode, stats) if k >= 2 else None
        reason = {1: "step size underflow", 2: "non-finite right-hand side", 3: "step budget exhausted"}[status]
        raise IntegrationError(reason, float(t_last), partial)
    return Trajectory(times, out, p, cfg.mode, stats)


def perturb(state: SystemState, magnitude: float, seed: int) -> SystemState:
    """Deterministic random kick of size ``magnitude``.

    Each spin gets a tangent displacement of norm ``magnitude`` and is pulled
    back onto the sphere; the cavity is shifted by ``magnitude`` in a random
    phase.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    if magnitude == 0:
        return SystemState(state.spins.copy(), state.cavity)
    rng = np.random.default_rng(seed)
    s = state.spins.copy()
    for i in range(3):
        v = rng.standard_normal(3)
        v -= np.dot(v, s[i]) * s[i]
        nv = np.linalg.norm(v)
        if nv > 0:
            s[i] = s[i] + magnitude * v / nv
        s[i] /= np.linalg.norm(s[i])
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return SystemState(s, state.cavity + magnitude * complex(math.cos(theta), math.sin(theta)))


def np_seed_state(magnitude: float = 1e-6, seed: int = 0) -> SystemState:
    """Normal state with a tiny kick, the default start for attractor studies."""
    return perturb(SystemState.normal(), magnitude, seed)


def continue_from(traj: Trajectory, cfg: IntegratorConfig, backend: str | None = None) -> Trajectory:
    """Extend a trajectory from its last sample."""
    return integrate(traj.final, traj.params, cfg, t0=float(traj.times[-1]), backend=backend)
