"""Linear stability of fixed points, closed-form normal-phase boundaries, exceptional points.

Dynamical matrices use the coordinate order
``(ds_x,+1, ds_x,0, ds_x,-1, ds_y,+1, ds_y,0, ds_y,-1)``.
"""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import ModelParams, coupling_matrix, reduced_jacobian, reduced_rhs

STAB_TOL = 1e-8
EP_TOL = 1e-4
COND_THRESH = 1e6

# internal species order (-1, 0, +1) -> matrix order (+1, 0, -1)
_PERM = np.array([2, 1, 0, 5, 4, 3])


def _to_matrix_order(j: np.ndarray) -> np.ndarray:
    return j[np.ix_(_PERM, _PERM)]


def dyn_matrix_np(p: ModelParams) -> np.ndarray:
    """Dynamical matrix of the normal phase, ``[[-g I, -W], [B + W, -g I]]``.

    ``B`` is minus the cavity-mediated coupling matrix; for homogeneous
    parameters ``B_mm' = -lam^2 D[(m-m')phi] / (omega_c^2 + kappa^2)``.
    """
    om = np.diag(np.asarray(p.omega)[::-1])
    b = -coupling_matrix(p)[::-1, ::-1]
    g = p.gamma * np.eye(3)
    return np.block([[-g, -om], [b + om, -g]])


def np_coupling_block(p: ModelParams) -> np.ndarray:
    """The submatrix ``B`` in matrix order (+1, 0, -1)."""
    return -coupling_matrix(p)[::-1, ::-1]


def dyn_matrix_at(fp, p: ModelParams, check: bool = False) -> np.ndarray:
    """Jacobian of the adiabatic spin flow at a fixed point, in the chart fixed by ``fp.sigma``."""
    spins = fp.spins
    if np.any(np.abs(np.linalg.norm(spins, axis=1) - 1.0) > 1e-8):
        raise ValueError("fixed point is off the unit sphere")
    x = np.concatenate([spins[:, 0], spins[:, 1]])
    sigma = np.sign(spins[:, 2])
    j = reduced_jacobian(x, sigma, p)
    if check:
        jf = jacobian_fd(x, sigma, p)
        scale = max(np.max(np.abs(j)), 1.0)
        if np.max(np.abs(j - jf)) > 1e-5 * scale:
            raise AssertionError("analytic Jacobian disagrees with finite differences")
    return _to_matrix_order(j)


def jacobian_fd(x, sigma, p: ModelParams, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the reduced flow (internal order)."""
    x = np.asarray(x, dtype=float)
    j = np.empty((6, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = step
        j[:, k] = (reduced_rhs(x + e, sigma, p) - reduced_rhs(x - e, sigma, p)) / (2 * step)
    return j


def sort_spectrum(ev: np.ndarray) -> np.ndarray:
    ev = np.asarray(ev, dtype=complex)
    return ev[np.lexsort((ev.imag, ev.real))]


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    max_re: float
    stable: bool
    marginal: bool
    ep_flag: bool
    min_gap: float
    eigvec_cond: float

    @property
    def unstable(self) -> bool:
        return self.max_re > STAB_TOL

    @property
    def linearly_stable(self) -> bool:
        """Not unstable: strictly stable or marginal within the dead band."""
        return not self.unstable


def _min_gap(ev: np.ndarray) -> float:
    d = np.abs(ev[:, None] - ev[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def analyze_matrix(m: np.ndarray, stab_tol: float = STAB_TOL, ep_tol: float = EP_TOL,
                   cond_thresh: float = COND_THRESH) -> StabilityReport:
    ev, vec = np.linalg.eig(m)
    vec = vec / np.linalg.norm(vec, axis=0)
    cond = float(np.linalg.cond(vec))
    ev = sort_spectrum(ev)
    max_re = float(ev.real.max())
    gap = _min_gap(ev)
    return StabilityReport(ev, max_re, max_re < -stab_tol, abs(max_re) <= stab_tol,
                           gap < ep_tol and cond > cond_thresh, gap, cond)


def analyze(fp, p: ModelParams, **kw) -> StabilityReport:
    return analyze_matrix(dyn_matrix_at(fp, p), **kw)


def p_function(phi, p: ModelParams):
    """Discriminant whose sign separates the normal-phase bands from the dynamical bands."""
    wc, k = p.omega_c, p.kappa
    return wc ** 2 * (2 * np.cos(2 * phi) + 1) ** 2 - 8 * k ** 2 * np.sin(phi) ** 2 * (np.cos(2 * phi) + 2)


def _lam_om(p: ModelParams) -> tuple[float, float]:
    if not p.is_homogeneous:
        raise ValueError("closed forms need homogeneous parameters")
    return p.lam[0], p.omega[0]


def mu_nu_np_analytic(p: ModelParams) -> np.ndarray:
    """Closed-form spectrum of :func:`dyn_matrix_np`, sorted by (Re, Im)."""
    lam, om = _lam_om(p)
    wc, k, g = p.omega_c, p.kappa, p.gamma
    sp = cmath.sqrt(complex(p_function(p.phi, p)))
    out = [-g + 1j * om, -g - 1j * om]
    for s_in in (1.0, -1.0):
        inner = cmath.sqrt(om ** 2 - lam ** 2 * om * (3 * wc + s_in * sp) / (2 * (wc ** 2 + k ** 2)))
        out += [-g + 1j * inner, -g - 1j * inner]
    return sort_spectrum(np.array(out))


def phi_c(p: ModelParams) -> list[float]:
    """Phases in [0, pi] where the normal phase meets the dynamical phase (zeros of P).

    Empty for ``kappa = 0``: P then only touches zero and no dynamical band opens.
    """
    if p.kappa == 0:
        return []
    r = 3 * p.kappa / math.hypot(p.kappa, p.omega_c)
    out = []
    for inner in (1 + r, 1 - r):
        if inner < 0:
            continue
        c = 0.5 * math.sqrt(inner)
        if c > 1:
            continue
        out += [math.acos(c), math.acos(-c)]
    return sorted(out)


def lambda_c(phi: float, p: ModelParams) -> float | None:
    """Coupling where Z2-broken stationary solutions appear out of the normal phase.

    Uses the rationalized form ``2 Omega (wc^2 + k^2) / (3 wc + sqrt(P))`` which
    equals the textbook ratio and stays regular at phi = 0, pi.  Returns None
    inside a dynamical band (P < 0).
    """
    if not p.is_homogeneous:
        raise ValueError("closed forms need homogeneous parameters")
    pv = float(p_function(phi, p))
    if pv < 0:
        return None
    om = p.omega[0]
    return math.sqrt(2 * om * (p.omega_c ** 2 + p.kappa ** 2) / (3 * p.omega_c + math.sqrt(pv)))


def lambda_c_textbook(phi: float, p: ModelParams) -> float | None:
    """Literal ratio form; singular (0/0) at phi = 0 and pi."""
    pv = float(p_function(phi, p))
    if pv < 0:
        return None
    den = 2 * math.cos(2 * phi) + math.cos(4 * phi) - 3
    return math.sqrt(p.omega[0] * (-3 * p.omega_c + math.sqrt(pv)) / den)


def np_max_re(p: ModelParams) -> float:
    return float(np.linalg.eigvals(dyn_matrix_np(p)).real.max())


# ---------------------------------------------------------------------------
# exceptional points


@dataclass
class EPLocation:
    param: float
    eigenvalue: complex
    gap: float
    cond: float
    max_re: float


@dataclass
class EPScan:
    locations: list[EPLocation]
    params: np.ndarray
    spectra: np.ndarray
    break_at: float | None = None

    def to_csv(self, fh, name: str = "param") -> None:
        write_spectrum_flow(fh, self.params, self.spectra, name)


def _match(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Reorder ``cur`` to follow ``prev`` by nearest-neighbour assignment."""
    cost = np.abs(prev[:, None] - cur[None, :])
    _, col = linear_sum_assignment(cost)
    return cur[col]


def _pair_disc(a: complex, b: complex, tol: float) -> float | None:
    """``|dIm| - |dRe|`` for a pair that can coalesce, else None.

    Two eigenvalues of a real matrix can meet either off the real axis (both
    in the same half plane) or on it (a conjugate pair turning into two real
    eigenvalues).  The sign of the returned number flips at such a meeting.
    """
    same_half = (a.imag >= -tol and b.imag >= -tol)
    conjugate = abs(a - b.conjugate()) <= tol * max(1.0, abs(a))
    if not (same_half or conjugate):
        return None
    return abs(a.imag - b.imag) - abs(a.real - b.real)


def _spectrum(m: np.ndarray, ref: np.ndarray | None) -> np.ndarray:
    ev = sort_spectrum(np.linalg.eigvals(m))
    return ev if ref is None else _match(ref, ev)


def detect_ep(params: Sequence[float], matrix_at: Callable[[float], np.ndarray | None],
              ep_tol: float = EP_TOL, cond_thresh: float = COND_THRESH,
              resolution: float = 1e-6) -> EPScan:
    """Scan a one-parameter family of dynamical matrices for exceptional points.

    ``matrix_at(x)`` returns the matrix at parameter ``x`` or None if the
    tracked fixed point was lost, which ends the scan (``break_at``, refined
    by bisection).  Eigenvalues are followed by continuity; every pair whose
    ``|dIm| - |dRe|`` changes sign between grid points is bisected to
    rounding level and accepted only if the pair coalesces (gap <
    ``ep_tol``) with a near-singular eigenvector matrix (cond >
    ``cond_thresh``).
    """
    params = np.asarray(params, dtype=float)
    spectra: list[np.ndarray] = []
    used: list[float] = []
    break_at = None

    def push(x, m):
        spectra.append(_spectrum(m, spectra[-1] if spectra else None))
        used.append(x)

    for x in params:
        m = matrix_at(float(x))
        if m is None:
            break_at = float(x)
            break
        push(float(x), m)
    if break_at is not None and used:
        # pin down where tracking is lost; folds often sit right behind an EP
        good, bad = used[-1], break_at
        for _ in range(200):
            mid = 0.5 * (good + bad)
            if mid in (good, bad):
                break
            if matrix_at(mid) is None:
                bad = mid
            else:
                good = mid
        if good != used[-1]:
            push(good, matrix_at(good))
        break_at = bad
    spec = np.array(spectra) if spectra else np.zeros((0, 6), dtype=complex)
    locs: list[EPLocation] = []
    n = spec.shape[1] if len(spec) else 0
    ptol = 1e-9
    for k in range(len(used) - 1):
        for i in range(n):
            for j in range(i + 1, n):
                d0 = _pair_disc(spec[k, i], spec[k, j], ptol)
                d1 = _pair_disc(spec[k + 1, i], spec[k + 1, j], ptol)
                if d0 is None or d1 is None or d0 == 0 or d1 == 0 or (d0 > 0) == (d1 > 0):
                    continue
                loc = _refine(matrix_at, used[k], used[k + 1], spec[k], (i, j), d0 > 0,
                              ep_tol, cond_thresh, resolution, ptol)
                if loc is not None and not any(abs(loc.param - o.param) <= resolution
                                               and abs(loc.eigenvalue - o.eigenvalue) < 10 * ep_tol
                                               for o in locs):
                    locs.append(loc)
    locs.sort(key=lambda l: l.param)
    return EPScan(locs, np.array(used), spec, break_at)


def _refine(matrix_at, lo, hi, ev_lo, pair, lo_positive, ep_tol, cond_thresh, resolution, ptol):
    """Bisect one sign change of the pair discriminant down to the EP.

    The parameter is bisected until the bracket is 1e-9 wide (fixed points
    along the path are still well separated from rounding noise there), then
    the bisection continues on the straight line between the two bracketing
    matrices.  Over such a short bracket the family is linear to ~1e-18, and
    the interpolation reaches the coalescence far below the parameter's own
    floating-point spacing, which the square-root splitting of an EP would
    otherwise turn into a gap of ~1e-5.
    """
    i, j = pair
    ref = ev_lo

    def side(m, ref):
        ev = _spectrum(m, ref)
        d = _pair_disc(ev[i], ev[j], ptol)
        return ev, d

    width = 1e-9 * max(1.0, abs(lo))
    while abs(hi - lo) > width:
        mid = 0.5 * (lo + hi)
        m = matrix_at(mid)
        if m is None:
            return None
        ev, d = side(m, ref)
        if d is None:
            return None
        if (d > 0) == lo_positive:
            lo, ref = mid, ev
        else:
            hi = mid
    m_lo, m_hi = matrix_at(lo), matrix_at(hi)
    if m_lo is None or m_hi is None:
        return None
    t_lo, t_hi = 0.0, 1.0
    for _ in range(200):
        t = 0.5 * (t_lo + t_hi)
        if t in (t_lo, t_hi):
            break
        ev, d = side(m_lo + t * (m_hi - m_lo), ref)
        if d is None:
            break
        if (d > 0) == lo_positive:
            t_lo, ref = t, ev
        else:
            t_hi = t
    best = None
    for t in (t_lo, t_hi):
        m = m_lo + t * (m_hi - m_lo)
        ev = _spectrum(m, ref)
        gap = abs(ev[i] - ev[j])
        if best is None or gap < best[1]:
            best = (lo + t * (hi - lo), gap, 0.5 * (ev[i] + ev[j]), m)
    x, gap, centre, m = best
    rep = analyze_matrix(m, ep_tol=ep_tol, cond_thresh=cond_thresh)
    if gap < ep_tol and rep.eigvec_cond > cond_thresh:
        return EPLocation(float(x), complex(centre), float(gap), rep.eigvec_cond, rep.max_re)
    return None


def np_matrix_family(p: ModelParams, which: str) -> Callable[[float], np.ndarray]:
    """Normal-phase matrix as a function of ``phi`` or ``lam``."""
    if which == "phi":
        return lambda x: dyn_matrix_np(p.replace(phi=x))
    if which in ("lam", "lambda"):
        return lambda x: dyn_matrix_np(p.with_lambda(x))
    raise ValueError("which must be 'phi' or 'lam'")


def write_spectrum_flow(fh, params, spectra, name: str = "param") -> None:
    w = csv.writer(fh)
    n = spectra.shape[1] if len(spectra) else 6
    w.writerow([name] + [f"re_{i + 1}" for i in range(n)] + [f"im_{i + 1}" for i in range(n)])
    for x, ev in zip(params, spectra):
        w.writerow([repr(float(x))] + [repr(float(v)) for v in ev.real] + [repr(float(v)) for v in ev.imag])


class TrackedPath:
    """Dynamical matrix along a parameter path, following one fixed point by continuation.

    Each evaluation warm-starts Newton from the already solved parameter
    closest to the request, so bisection can jump around freely.  Returns
    None once the root cannot be continued (for instance past a fold).
    """

    def __init__(self, fp, p: ModelParams, which: str, x0: float, max_jump: float = 0.05):
        from .stationary import newton_solve
        self._solve = newton_solve
        self.p = p
        self.which = which
        self.max_jump = max_jump
        self.solved: dict[float, object] = {float(x0): self._solve(fp, self.params_at(x0), polish=True)}

    def params_at(self, x: float) -> ModelParams:
        if self.which == "phi":
            return self.p.replace(phi=x)
        if self.which in ("lam", "lambda"):
            return self.p.with_lambda(x)
        raise ValueError("which must be 'phi' or 'lam'")

    def fixed_point(self, x: float):
        from .stationary import NewtonFailure
        x = float(x)
        if x in self.solved:
            return self.solved[x]
        near = min(self.solved, key=lambda k: abs(k - x))
        fp = self.solved[near]
        n = max(1, int(math.ceil(abs(x - near) / self.max_jump)))
        try:
            for xi in np.linspace(near, x, n + 1)[1:]:
                fp = self._solve(fp, self.params_at(float(xi)), polish=True)
        except (NewtonFailure, ValueError):
            return None
        self.solved[x] = fp
        return fp

    def __call__(self, x: float):
        fp = self.fixed_point(x)
        if fp is None:
            return None
        return dyn_matrix_at(fp, self.params_at(x))


def branch_scans(p: ModelParams, start: float, stop: float, n: int = 241, which: str = "lam",
                 roots=None) -> list[EPScan]:
    """EP scans along ``which`` for every stable nontrivial root present at ``start``."""
    from .stationary import find_all_stationary, stable_nontrivial
    p0 = p.with_lambda(start) if which != "phi" else p.replace(phi=start)
    if roots is None:
        roots = stable_nontrivial(find_all_stationary(p0))
    grid = np.linspace(start, stop, n)
    return [detect_ep(grid, TrackedPath(fp, p, which, start)) for fp in roots]


def fsop_exceptional_point(p: ModelParams, start: float = 54.0, stop: float = 45.0) -> float:
    """Coupling of the EP shared by the stable branches at ``p.phi`` (median over branches)."""
    scans = branch_scans(p, start, stop)
    found = [s.locations[0].param for s in scans if s.locations]
    if not found:
        raise ValueError("no exceptional point on the tracked branches")
    return float(np.median(found))
