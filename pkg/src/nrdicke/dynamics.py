"""Attractor classification: chiral rotation, swap cycles, chaos, stationary states."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import _core
from .integrate import IntegrationError, IntegratorConfig, Mode, Trajectory, integrate, np_seed_state
from .model import ModelParams, SystemState, collective_series
from .stationary import FixedPoint, residual

TWO_PI = 2.0 * math.pi


class Kind(enum.Enum):
    STATIONARY = "Stationary"
    CHIRAL = "Chiral"
    SWAP = "Swap"
    CHAOTIC = "Chaotic"
    UNRESOLVED = "Unresolved"


class Chirality(enum.Enum):
    CCW = "CCW"
    CW = "CW"
    MIXED = "mixed"


# tolerance for the Lyapunov pair and for settling checks
LYAP_RTOL, LYAP_ATOL = 1e-12, 1e-14


@dataclass(frozen=True)
class ClassifyConfig:
    transient_fraction: float = 0.5
    stationary_residual: float = 1e-8
    stationary_displacement: float = 1e-6
    chiral_spread: float = 0.01
    chiral_lock: float = 0.05
    swap_period_tol: float = 0.05
    min_cycles: int = 2
    lyap_thresh: float = 1e-3
    lyap_horizon: float = 2000.0    # in units of 1 / Omega
    lyap_renorm: float = 1.0
    settle_time: float = 100.0     # in units of 1 / Omega
    lyap_offset: float = 1e-8
    # a positive exponent must also clear this many standard errors
    lyap_sigmas: float = 2.0
    # thickened chiral circles: common rotation, locked mean phases, loose lock
    family_phase: float = 0.1
    # smoothing window for vertex detection, in units of 2 pi / Omega
    smooth_periods: float = 1.0
    radius_factor: float = 0.25


# ---------------------------------------------------------------------------
# basic trajectory utilities


def trim_transient(traj: Trajectory, fraction: float = 0.5) -> Trajectory:
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    start = int(round(fraction * len(traj)))
    if len(traj) - start < 64:
        raise ValueError(f"only {len(traj) - start} samples left after trimming (need 64)")
    return traj.window(start)


def phase_angles(traj: Trajectory) -> np.ndarray:
    """Unwrapped azimuths ``theta_m = atan2(s_y, s_x)``, shape (n, 3)."""
    sx, sy = traj.sx, traj.sy
    bad = (np.abs(sx) + np.abs(sy)) <= 1e-6
    if bad.any():
        i = int(np.argmax(bad.any(axis=1)))
        raise ValueError(f"phase angle undefined at t={traj.times[i]:.6g}")
    return np.unwrap(np.arctan2(sy, sx), axis=0)


def _wrap(x):
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


def _smooth(x: np.ndarray, n: int) -> np.ndarray:
    """Centered moving average along axis 0 (valid part only)."""
    if n <= 1:
        return x.copy()
    c = np.cumsum(np.vstack([np.zeros((1,) + x.shape[1:]), x]), axis=0)
    return (c[n:] - c[:-n]) / n


# ---------------------------------------------------------------------------
# chiral metrics


@dataclass(frozen=True)
class ChiralMetrics:
    velocities: tuple[float, float, float]
    velocity_spread: float
    velocity_error: float
    relative_phases: tuple[float, float, float]
    lock_residual: float
    phase_error: float
    cavity_radius: float
    cavity_cv: float

    def passes(self, cfg: ClassifyConfig) -> bool:
        return self.velocity_spread < cfg.chiral_spread and self.lock_residual < cfg.chiral_lock

    def family(self, cfg: ClassifyConfig) -> bool:
        """Same rotation rate for all species and mean phases near 2 pi / 3 apart."""
        return self.velocity_spread < cfg.chiral_spread and self.phase_error < cfg.family_phase


def chiral_metrics(traj: Trajectory) -> ChiralMetrics:
    """Rotation rates, relative-phase locking and cavity-radius spread."""
    th = phase_angles(traj)
    t = traj.times - traj.times[0]
    vel = np.array([np.polyfit(t, th[:, k], 1)[0] for k in range(3)])
    mean_v = float(np.mean(vel))
    spread = float((vel.max() - vel.min()) / abs(mean_v)) if mean_v != 0 else math.inf
    om = np.asarray(traj.params.omega)
    verr = float(np.max(np.abs(np.abs(vel) - om) / om))
    # pairs (-1,0), (0,+1), (+1,-1)
    rel = np.column_stack([th[:, 1] - th[:, 0], th[:, 2] - th[:, 1], th[:, 0] - th[:, 2]])
    centre = np.angle(np.mean(np.exp(1j * rel), axis=0))
    lock = float(np.max(np.abs(_wrap(rel - centre))))
    perr = float(np.max(np.abs(np.abs(centre) - TWO_PI / 3.0)))
    r = np.abs(traj.cavity)
    cv = float(np.std(r) / np.mean(r)) if np.mean(r) > 0 else math.inf
    return ChiralMetrics(tuple(vel.tolist()), spread, verr, tuple(centre.tolist()), lock, perr,
                         float(np.mean(r)), cv)


# ---------------------------------------------------------------------------
# dwell segmentation


@dataclass(frozen=True)
class Visit:
    vertex: int
    entry: float
    exit: float


@dataclass(frozen=True)
class DwellRecord:
    vertices: np.ndarray          # (k, 2) positions in the (X_d1, X_d2) plane
    radius: float
    visits: tuple[Visit, ...]
    chirality: Chirality

    @property
    def sequence(self) -> list[int]:
        return [v.vertex for v in self.visits]

    def cycle(self) -> list[int] | None:
        """Shortest repeating vertex order, if the sequence is periodic and covers every vertex."""
        seq = self.sequence
        k = len(self.vertices)
        if k < 2 or len(seq) < 2 * k:
            return None
        # the order may only be read off visits to distinct vertices
        for n in range(2, k + 1):
            if all(seq[i] == seq[i + n] for i in range(len(seq) - n)):
                base = seq[:n]
                return base if len(set(base)) == k else None
        return None

    def cycle_periods(self) -> np.ndarray:
        """Times between successive entries into the same vertex, one per completed cycle."""
        cyc = self.cycle()
        if cyc is None:
            return np.array([])
        n = len(cyc)
        entries = np.array([v.entry for v in self.visits])
        return entries[n:] - entries[:-n]

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "radius": self.radius,
                "visits": [[v.vertex, v.entry, v.exit] for v in self.visits],
                "chirality": self.chirality.value}


def xd_plane(sx: np.ndarray) -> np.ndarray:
    return collective_series(sx)[..., 1:]


def find_vertices(traj: Trajectory, cfg: ClassifyConfig = ClassifyConfig(), min_share: float = 0.02) -> np.ndarray:
    """Dwell centres read off the trajectory itself, in the (X_d1, X_d2) plane.

    The s_x components are averaged over one precession period; slow samples
    of the averaged path are grouped by leader clustering and groups holding
    at least ``min_share`` of the window become vertices.
    """
    n = max(1, int(round(cfg.smooth_periods * TWO_PI / min(traj.params.omega) / traj.dt)))
    sm = _smooth(traj.sx, n)
    if len(sm) < 3:
        return np.zeros((0, 2))
    xd = xd_plane(sm)
    speed = np.linalg.norm(np.diff(xd, axis=0), axis=1) / traj.dt
    slow = xd[:-1][speed <= np.median(speed)]
    scale = float(np.max(np.linalg.norm(xd - xd.mean(axis=0), axis=1)))
    if scale < 1e-6:
        return xd[:1].copy()
    radius = 0.25 * scale
    centres: list[np.ndarray] = []
    members: list[list[int]] = []
    for i, pt in enumerate(slow):
        for c, m in zip(centres, members):
            if np.linalg.norm(pt - c) < radius:
                m.append(i)
                break
        else:
            centres.append(pt.copy())
            members.append([i])
    # one Lloyd step for stable centres
    centres = [slow[m].mean(axis=0) for m in members]
    counts = np.array([len(m) for m in members])
    keep = counts >= min_share * len(sm)
    out = np.array([c for c, k in zip(centres, keep) if k])
    if len(out) == 0:
        return np.zeros((0, 2))
    # merge centres that ended up close
    merged: list[np.ndarray] = []
    for c in out[np.argsort(-counts[keep])]:
        if all(np.linalg.norm(c - m) >= radius for m in merged):
            merged.append(c)
    return np.array(merged)


# directions of the six frustrated sign patterns in the (X_d1, X_d2) plane
HEX_PATTERNS = np.array([[1, 1, -1], [1, -1, 1], [-1, 1, 1], [-1, -1, 1], [-1, 1, -1], [1, -1, -1]], dtype=float)


def hexagon_vertices(traj: Trajectory, cfg: ClassifyConfig = ClassifyConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Per-sector dwell centres of an orbit around the six frustrated directions.

    Slow samples of the period-averaged path are assigned to the nearest of
    the six pattern directions by angle; each sector's vertex is the mean of
    its samples.  Returns ``(vertices (6, 2), share of slow samples per
    sector)``; an empty sector has a NaN vertex and share 0.
    """
    n = max(1, int(round(cfg.smooth_periods * TWO_PI / min(traj.params.omega) / traj.dt)))
    xd = xd_plane(_smooth(traj.sx, n))
    if len(xd) < 3:
        raise ValueError("trajectory too short for vertex analysis")
    speed = np.linalg.norm(np.diff(xd, axis=0), axis=1)
    slow = xd[:-1][speed <= np.median(speed)]
    ref = np.angle(xd_plane(HEX_PATTERNS) @ np.array([1.0, 1.0j]))
    ang = np.angle(slow @ np.array([1.0, 1.0j]))
    sector = np.argmin(np.abs(_wrap(ang[:, None] - ref[None, :])), axis=1)
    verts = np.full((6, 2), np.nan)
    share = np.zeros(6)
    for k in range(6):
        pts = slow[sector == k]
        share[k] = len(pts) / len(slow)
        if len(pts):
            verts[k] = pts.mean(axis=0)
    return verts, share


def vertices_from_fixed_points(fps: list[FixedPoint]) -> np.ndarray:
    nontrivial = [f for f in fps if not f.is_trivial]
    if not nontrivial:
        return np.zeros((0, 2))
    return xd_plane(np.array([f.sx for f in nontrivial]))


def dwell_record(traj: Trajectory, vertices: np.ndarray, cfg: ClassifyConfig = ClassifyConfig()) -> DwellRecord:
    """Segment the trajectory into visits of the given vertices.

    Membership radius is ``cfg.radius_factor`` times the smallest
    inter-vertex distance.  A visit starts when the smoothed path enters a
    vertex disc and ends when it leaves; a return to the same vertex without
    another vertex in between extends the visit (hysteresis).
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
    k = len(vertices)
    if k < 2:
        return DwellRecord(vertices, math.inf, (), Chirality.MIXED)
    d = np.linalg.norm(vertices[:, None] - vertices[None, :], axis=2)
    d[np.diag_indices(k)] = np.inf
    radius = cfg.radius_factor * float(d.min())
    n = max(1, int(round(cfg.smooth_periods * TWO_PI / min(traj.params.omega) / traj.dt)))
    sm = _smooth(traj.sx, n)
    t = _smooth(traj.times[:, None], n)[:, 0]
    xd = xd_plane(sm)
    dist = np.linalg.norm(xd[:, None, :] - vertices[None, :, :], axis=2)
    inside = dist < radius
    visits: list[list] = []
    cur = -1
    for i in range(len(t)):
        hit = np.nonzero(inside[i])[0]
        if cur >= 0 and not inside[i, cur]:
            visits[-1][2] = t[i]
            cur = -1
        if cur < 0 and hit.size:
            v = int(hit[np.argmin(dist[i, hit])])
            if visits and visits[-1][0] == v:
                visits[-1][2] = math.nan
            else:
                visits.append([v, t[i], math.nan])
            cur = v
    # a visit still open at the window end is incomplete
    if visits and math.isnan(visits[-1][2]):
        visits.pop()
    out = tuple(Visit(v, float(a), float(b)) for v, a, b in visits)
    return DwellRecord(vertices, radius, out, _chirality(vertices, [v.vertex for v in out], xd))


def _chirality(vertices, seq, xd) -> Chirality:
    if len(seq) < 2:
        return Chirality.MIXED
    centre = vertices.mean(axis=0)
    ang = np.arctan2(vertices[:, 1] - centre[1], vertices[:, 0] - centre[0])
    steps = _wrap(np.diff(ang[np.asarray(seq)]))
    if np.all(np.abs(np.abs(steps) - math.pi) < 0.1):
        # two antipodal vertices: use the winding of the path itself
        a = np.unwrap(np.arctan2(xd[:, 1] - centre[1], xd[:, 0] - centre[0]))
        turns = (a[-1] - a[0]) / TWO_PI
        if turns > 0.5 * (len(seq) - 1) / 2:
            return Chirality.CCW
        if turns < -0.5 * (len(seq) - 1) / 2:
            return Chirality.CW
        return Chirality.MIXED
    if np.all(steps > 0):
        return Chirality.CCW
    if np.all(steps < 0):
        return Chirality.CW
    return Chirality.MIXED


@dataclass(frozen=True)
class SwapMetrics:
    n_vertices: int
    cycle: tuple[int, ...] | None
    period: float | None
    period_spread: float | None
    chirality: Chirality

    def passes(self, cfg: ClassifyConfig) -> bool:
        return (self.cycle is not None and self.n_vertices >= 2 and self.period_spread is not None
                and self.period_spread < cfg.swap_period_tol)


def swap_metrics(rec: DwellRecord, cfg: ClassifyConfig = ClassifyConfig()) -> SwapMetrics:
    cyc = rec.cycle()
    periods = rec.cycle_periods()
    if cyc is None or len(periods) < cfg.min_cycles:
        return SwapMetrics(len(rec.vertices), tuple(cyc) if cyc else None, None, None, rec.chirality)
    mean = float(periods.mean())
    spread = float((periods.max() - periods.min()) / mean)
    return SwapMetrics(len(rec.vertices), tuple(cyc), mean, spread, rec.chirality)


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectrumReport:
    freqs: np.ndarray
    power: np.ndarray
    resolution: float
    peaks: list[tuple[float, float]]
    dominant: list[tuple[float, float]]
    omega0: float | None
    odd_harmonic_score: float | None
    noise_floor: float

    def to_csv(self, fh) -> None:
        fh.write("freq,power\n")
        for f, p in zip(self.freqs, self.power):
            fh.write(f"{f!r},{p!r}\n")


def _interp_peak(freqs, power, k, res) -> tuple[float, float]:
    """Parabolic refinement on log power (exact for a Gaussian-shaped line)."""
    if 0 < k < len(power) - 1 and min(power[k - 1], power[k], power[k + 1]) > 0:
        a, b, c = np.log(power[k - 1]), np.log(power[k]), np.log(power[k + 1])
        den = a - 2 * b + c
        if den < 0:
            off = 0.5 * (a - c) / den
            return float(freqs[k] + off * res), float(np.exp(b - 0.25 * (a - c) * off))
    return float(freqs[k]), float(power[k])


def _odd_fraction(w0: float, others: list[float], tol: float) -> float:
    if not others:
        return 1.0
    hits = 0
    for f in others:
        n = round((f / w0 - 1.0) / 2.0)
        if n >= 0 and abs(f - (2 * n + 1) * w0) <= tol:
            hits += 1
    return hits / len(others)


def fourier_spectrum(series, dt: float, peak_snr: float = 100.0, dominance: float = 1e-3,
                     max_peaks: int = 12, explain: float = 0.8) -> SpectrumReport:
    """Hann-windowed periodogram on angular frequency with peak and harmonic analysis.

    Peaks are local maxima above ``peak_snr`` times the median power.  The
    dominant set keeps the ``max_peaks`` strongest peaks within ``dominance``
    of the maximum.  ``omega0`` is the lowest dominant peak whose odd
    multiples explain at least ``explain`` of the other dominant peaks, to
    within one frequency bin.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 1024:
        raise ValueError("need at least 1024 samples")
    res = TWO_PI / (n * dt)
    x = x - x.mean()
    w = np.hanning(n)
    spec = np.fft.rfft(x * w)
    power = (np.abs(spec) ** 2) / np.sum(w ** 2)
    freqs = TWO_PI * np.fft.rfftfreq(n, dt)
    floor = float(np.median(power))
    scale = float(np.max(np.abs(x))) if n else 0.0
    if scale <= 1e-12 or power.max() <= 0:
        return SpectrumReport(freqs, power, res, [], [], None, None, floor)
    idx, _ = find_peaks(power[1:], height=max(floor * peak_snr, 1e-300))
    idx = idx + 1
    peaks = [_interp_peak(freqs, power, k, res) for k in idx]
    if not peaks:
        return SpectrumReport(freqs, power, res, [], [], None, None, floor)
    pmax = max(p for _, p in peaks)
    dom = sorted([pk for pk in peaks if pk[1] >= dominance * pmax], key=lambda pk: -pk[1])[:max_peaks]
    dom.sort()
    omega0 = None
    score = None
    for i, (f0, _) in enumerate(dom):
        others = [f for j, (f, _) in enumerate(dom) if j != i]
        if _odd_fraction(f0, others, res) >= explain:
            omega0 = f0
            score = _odd_fraction(f0, [f for f, _ in dom], res)
            break
    return SpectrumReport(freqs, power, res, peaks, dom, omega0, score, floor)


# ---------------------------------------------------------------------------
# Lyapunov exponent


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    n_segments: int

    def __float__(self):
        return self.value


def lyapunov_max(state0: SystemState, p: ModelParams, cfg: IntegratorConfig = IntegratorConfig(),
                 renorm: float = 1.0, offset: float = 1e-8, transient: float = 0.0,
                 n_blocks: int = 10, seed: int = 0) -> LyapunovEstimate:
    """Largest Lyapunov exponent from two nearby trajectories (Benettin renormalization).

    The pair is re-separated to ``offset`` every ``renorm / Omega`` time
    units over ``cfg.t_end``; the estimate is the mean log growth rate with a
    block standard error.  ``transient`` time is integrated first and
    discarded.  The pair is integrated at no looser than ``LYAP_RTOL`` /
    ``LYAP_ATOL``: at the default trajectory tolerance the local error is
    comparable to the offset and shows up as spurious positive growth.
    """
    if cfg.t_end < 2000.0 / min(p.omega) - 1e-9:
        raise ValueError("Lyapunov horizon must be at least 2000 / Omega")
    par = _core.pack_params(p)
    mode = _core.FULL if cfg.mode is Mode.FULL else _core.ADIABATIC
    tau = renorm / min(p.omega)
    rtol, atol = min(cfg.rel_tol, LYAP_RTOL), min(cfg.abs_tol, LYAP_ATOL)

    def advance(y, t0, dt):
        out, status, t_last, _, _ = _core.dopri5(mode, par, y, t0, t0 + dt, dt, rtol, atol,
                                                 cfg.max_step, cfg.h_min, cfg.max_steps)
        if status != 0:
            raise IntegrationError("Lyapunov integration failed", float(t_last))
        return out[-1]

    y = state0.to_vector(mode == _core.FULL)
    t = 0.0
    if transient > 0:
        y = advance(y, t, transient)
        t += transient
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(y.size)
    z = _renormalize(y, d, offset)
    sep = float(np.linalg.norm(z - y))
    n_seg = int(round(cfg.t_end / tau))
    logs = np.empty(n_seg)
    for k in range(n_seg):
        y1 = advance(y, t, tau)
        z1 = advance(z, t, tau)
        t += tau
        diff = z1 - y1
        dist = float(np.linalg.norm(diff))
        logs[k] = math.log(dist / sep) if dist > 0 else -math.inf
        y = y1
        z = _renormalize(y1, diff, offset)
        sep = float(np.linalg.norm(z - y))
    rates = logs / tau
    value = float(np.mean(rates))
    nb = max(2, min(n_blocks, n_seg))
    blocks = np.array([b.mean() for b in np.array_split(rates, nb)])
    err = float(np.std(blocks, ddof=1) / math.sqrt(nb))
    return LyapunovEstimate(value, err, n_seg)


def _renormalize(y: np.ndarray, d: np.ndarray, offset: float) -> np.ndarray:
    nd = np.linalg.norm(d)
    if nd == 0:
        d = np.ones_like(y)
        nd = np.linalg.norm(d)
    z = y + offset * d / nd
    s = z[:9].reshape(3, 3)
    z[:9] = (s / np.linalg.norm(s, axis=1)[:, None]).ravel()
    return z


# ---------------------------------------------------------------------------
# symmetry restoration


@dataclass(frozen=True)
class Restoration:
    sx_mean: np.ndarray
    sy_mean: np.ndarray
    cavity_mean: complex
    cavity_max: float
    period: float | None
    n_periods: int
    caveat: bool

    @property
    def ratio(self) -> float:
        return abs(self.cavity_mean) / self.cavity_max if self.cavity_max > 0 else 0.0


def detect_period(traj: Trajectory) -> float | None:
    """Period of the cavity motion from its autocorrelation, or None."""
    a = traj.cavity - traj.cavity.mean()
    n = len(a)
    if np.max(np.abs(a)) < 1e-12:
        return None
    f = np.fft.fft(a, 2 * n)
    ac = np.real(np.fft.ifft(f * np.conj(f))[:n])
    ac /= ac[0]
    neg = np.nonzero(ac < 0)[0]
    if neg.size == 0:
        return None
    start = int(neg[0])
    if start >= n // 2:
        return None
    seg = ac[start:n // 2 + start // 2]
    if seg.size < 3:
        return None
    k = int(np.argmax(seg)) + start
    if ac[k] < 0.5 or k >= n - 1:
        return None
    a0, b0, c0 = ac[k - 1], ac[k], ac[k + 1]
    den = a0 - 2 * b0 + c0
    off = 0.5 * (a0 - c0) / den if den < 0 else 0.0
    return float((k + off) * traj.dt)


def symmetry_restoration(traj: Trajectory, p: ModelParams | None = None,
                         period: float | None = None) -> Restoration:
    """Time averages over an integer number of periods (full window if none is found)."""
    if period is None:
        period = detect_period(traj)
    amax = float(np.max(np.abs(traj.cavity)))
    span = traj.times[-1] - traj.times[0]
    if period is None or period <= 0 or span < period:
        return Restoration(traj.sx.mean(axis=0), traj.sy.mean(axis=0), complex(traj.cavity.mean()), amax,
                           period, 0, True)
    n_per = int(span // period)
    m = int(round(n_per * period / traj.dt))
    w = traj.window(len(traj) - m - 1) if m + 1 < len(traj) else traj
    # trapezoid rule over exactly n_per periods
    def avg(x):
        return (np.sum(x[1:-1], axis=0) + 0.5 * (x[0] + x[-1])) / (len(x) - 1)
    return Restoration(avg(w.sx), avg(w.sy), complex(avg(w.cavity)), amax, period, n_per, n_per < 3)


# ---------------------------------------------------------------------------
# classification cascade


@dataclass
class AttractorVerdict:
    kind: Kind
    metrics: dict = field(default_factory=dict)
    dwell: DwellRecord | None = None
    spectrum: SpectrumReport | None = None
    lyapunov: LyapunovEstimate | None = None

    @property
    def chiral_family(self) -> bool:
        """Chiral, or a non-chaotic attractor that still rotates like one."""
        if self.kind is Kind.CHIRAL:
            return True
        cm = self.metrics.get("chiral")
        return (self.kind is Kind.UNRESOLVED and isinstance(cm, ChiralMetrics)
                and bool(self.metrics.get("chiral_family", False)))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "chiral_family": self.chiral_family,
               "metrics": _jsonable(self.metrics)}
        if self.dwell is not None:
            out["dwell"] = self.dwell.to_dict()
        if self.spectrum is not None:
            out["omega0"] = self.spectrum.omega0
            out["odd_harmonic_score"] = self.spectrum.odd_harmonic_score
            out["resolution"] = self.spectrum.resolution
        if self.lyapunov is not None:
            out["lyapunov"] = {"value": self.lyapunov.value, "stderr": self.lyapunov.stderr}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if hasattr(x, "__dataclass_fields__"):
        return _jsonable(asdict(x))
    return x


def classify_attractor(traj: Trajectory, fps: list[FixedPoint] | None, p: ModelParams,
                       cfg: ClassifyConfig = ClassifyConfig(),
                       integ: IntegratorConfig | None = None) -> AttractorVerdict:
    """Decision cascade on a transient-free trajectory.

    Stationary, then chiral, then swap (vertices from the supplied fixed
    points when any are nontrivial, otherwise read off the path), then
    chaotic by the largest Lyapunov exponent; Unresolved otherwise.
    """
    metrics: dict = {}
    end = traj.spins[-1]
    tail = traj.window(int(0.9 * len(traj)))
    disp = float(np.max(np.abs(tail.y[:, :9] - tail.y[-1, :9])))
    res = residual(end, p)
    if disp < cfg.stationary_displacement and res >= cfg.stationary_residual:
        # a settled path can sit at the integrator's error floor near a stiff sink;
        # re-measure after a short continuation at tight tolerance
        settle = IntegratorConfig(t_end=cfg.settle_time / min(p.omega), sample_dt=1.0 / min(p.omega),
                                  rel_tol=LYAP_RTOL, abs_tol=LYAP_ATOL, mode=traj.mode)
        try:
            res = residual(integrate(traj.final, p, settle).spins[-1], p)
            metrics["settled"] = True
        except IntegrationError:
            pass
    metrics["end_residual"] = res
    metrics["tail_displacement"] = disp
    if res < cfg.stationary_residual and disp < cfg.stationary_displacement:
        return AttractorVerdict(Kind.STATIONARY, metrics)

    try:
        cm = chiral_metrics(traj)
        metrics["chiral"] = cm
        metrics["chiral_family"] = cm.family(cfg)
        if cm.passes(cfg):
            return AttractorVerdict(Kind.CHIRAL, metrics)
    except ValueError as exc:
        metrics["chiral"] = str(exc)

    verts = vertices_from_fixed_points(fps or [])
    source = "fixed_points"
    if len(verts) < 2:
        verts = find_vertices(traj, cfg)
        source = "trajectory"
    rec = dwell_record(traj, verts, cfg)
    sm = swap_metrics(rec, cfg)
    metrics["swap"] = sm
    metrics["vertex_source"] = source
    spec = None
    if len(traj) >= 1024:
        spec = fourier_spectrum(traj.sx[:, 2], traj.dt)
        metrics["omega0"] = spec.omega0
        metrics["odd_harmonic_score"] = spec.odd_harmonic_score
    if sm.passes(cfg):
        return AttractorVerdict(Kind.SWAP, metrics, rec, spec)

    horizon = cfg.lyap_horizon / min(p.omega)
    if integ is None:
        integ = IntegratorConfig(t_end=horizon)
    else:
        integ = IntegratorConfig(t_end=horizon, rel_tol=integ.rel_tol, abs_tol=integ.abs_tol,
                                 max_step=integ.max_step, mode=integ.mode)
    ly = lyapunov_max(traj.final, p, integ, renorm=cfg.lyap_renorm, offset=cfg.lyap_offset)
    metrics["lyapunov"] = ly.value
    metrics["lyapunov_stderr"] = ly.stderr
    chaotic = ly.value > cfg.lyap_thresh * min(p.omega) and ly.value > cfg.lyap_sigmas * ly.stderr
    kind = Kind.CHAOTIC if chaotic else Kind.UNRESOLVED
    return AttractorVerdict(kind, metrics, rec, spec, ly)


def run_and_classify(p: ModelParams, t_end: float = 12000.0, seed: int = 0, fps=None,
                     cfg: ClassifyConfig = ClassifyConfig(), sample_dt: float = 0.5,
                     mode: Mode = Mode.ADIABATIC, state0: SystemState | None = None):
    """Integrate from the kicked normal state, trim and classify."""
    integ = IntegratorConfig(t_end=t_end, sample_dt=sample_dt, mode=mode)
    traj = integrate(state0 if state0 is not None else np_seed_state(1e-6, seed), p, integ)
    window = trim_transient(traj, cfg.transient_fraction)
    return classify_attractor(window, fps, p, cfg, integ), window


# ---------------------------------------------------------------------------
# emergent-frequency scaling


@dataclass(frozen=True)
class ScalingFit:
    lambda_star: float
    beta: float
    amplitude: float
    lambdas: np.ndarray
    omega0: np.ndarray
    excluded: tuple[float, ...] = ()


def fit_power_law(lambdas, omega0, lambda_star: float) -> tuple[float, float]:
    """Least-squares fit of ``log w0 = log A + beta log|lam - lam*|``; returns (beta, A)."""
    x = np.log(np.abs(np.asarray(lambdas, dtype=float) - lambda_star))
    y = np.log(np.asarray(omega0, dtype=float))
    beta, c = np.polyfit(x, y, 1)
    return float(beta), float(math.exp(c))


def measure_omega0(p: ModelParams, t_end: float, seed: int = 0, sample_dt: float = 0.5,
                   transient_fraction: float = 0.25) -> float | None:
    traj = integrate(np_seed_state(1e-6, seed), p, IntegratorConfig(t_end=t_end, sample_dt=sample_dt))
    w = trim_transient(traj, transient_fraction)
    return fourier_spectrum(w.sx[:, 2], w.dt).omega0


def approach_lambdas(lambda_star: float, n: int = 7, closest: float = 7e-4, farthest: float = 0.04) -> np.ndarray:
    """Couplings below ``lambda_star`` at geometrically spaced distances (farthest first)."""
    return lambda_star - np.geomspace(farthest, closest, n)


def omega0_scaling(phi: float, lambdas, p: ModelParams, lambda_star: float | None = None,
                   t_end: float = 2e5, sample_dt: float = 0.5, seed: int = 0,
                   omega0_fn=None) -> ScalingFit:
    """Fit the critical scaling of the emergent frequency on approach to ``lambda_star``.

    ``lambda_star`` defaults to the exceptional point of the FSOP branch
    found by :func:`nrdicke.stability.fsop_exceptional_point`.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if len(lambdas) < 6:
        raise ValueError("need at least 6 coupling values")
    base = p.replace(phi=phi)
    if lambda_star is None:
        from .stability import fsop_exceptional_point
        lambda_star = fsop_exceptional_point(base)
    if omega0_fn is None:
        omega0_fn = lambda q: measure_omega0(q, t_end, seed, sample_dt)
    keep_l, keep_w, dropped = [], [], []
    for lam in lambdas:
        w0 = omega0_fn(base.with_lambda(float(lam)))
        if w0 is None or not w0 > 0:
            dropped.append(float(lam))
            continue
        keep_l.append(float(lam))
        keep_w.append(float(w0))
    if len(keep_l) < 4:
        raise ValueError(f"only {len(keep_l)} points with a resolved omega0 (need 4)")
    beta, amp = fit_power_law(keep_l, keep_w, lambda_star)
    return ScalingFit(float(lambda_star), beta, amp, np.array(keep_l), np.array(keep_w), tuple(dropped))
