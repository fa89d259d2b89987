"""Stationary solutions of the adiabatic spin flow and the phase they define."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace

import numpy as np

from .model import (ModelParams, SymmetryOp, SystemState, apply_symmetry, cavity_adiabatic,
                    coupling_matrix, rhs_adiabatic)

NEWTON_TOL = 1e-11
DEDUP_TOL = 1e-6
# Newton iterations allowed without halving the best residual
STAGNATION = 15
SIGN_PATTERNS = tuple((a, b, c) for a in (1, -1) for b in (1, -1) for c in (1, -1))


@dataclass(frozen=True, eq=False)
class FixedPoint:
    spins: np.ndarray
    cavity: complex
    residual: float
    stable: bool | None = None
    max_re: float | None = None

    def __post_init__(self):
        s = np.array(self.spins, dtype=float).reshape(3, 3)
        s.setflags(write=False)
        object.__setattr__(self, "spins", s)

    @property
    def sx(self) -> np.ndarray:
        return self.spins[:, 0]

    @property
    def sigma(self) -> np.ndarray:
        return np.where(self.spins[:, 2] < 0, -1.0, 1.0)

    @property
    def is_trivial(self) -> bool:
        return bool(np.max(np.abs(self.spins[:, :2])) < DEDUP_TOL)

    def state(self) -> SystemState:
        return SystemState(self.spins, self.cavity)

    def distance(self, other: "FixedPoint") -> float:
        return float(np.max(np.abs(self.spins - other.spins)))

    def to_dict(self) -> dict:
        return {"sx": self.spins[:, 0].tolist(), "sy": self.spins[:, 1].tolist(),
                "sz": self.spins[:, 2].tolist(), "cavity": [self.cavity.real, self.cavity.imag],
                "residual": self.residual, "stable": self.stable}

    @classmethod
    def from_dict(cls, d: dict) -> "FixedPoint":
        spins = np.column_stack([d["sx"], d["sy"], d["sz"]])
        return cls(spins, complex(*d["cavity"]), float(d["residual"]), d.get("stable"))


class Phase(enum.Enum):
    NP = "NP"
    SOP = "SOP"
    PFSOP = "pFSOP"
    FSOP = "FSOP"
    DP = "DP"


_DEGENERACY = {Phase.NP: 1, Phase.SOP: 2, Phase.PFSOP: 4, Phase.FSOP: 6, Phase.DP: 0}


@dataclass(frozen=True)
class PhaseLabel:
    """Phase tag and its degeneracy.

    ``flagged`` marks a stable-root count outside {2, 4, 6}; the tag is then
    the nearest self-organized family and ``count`` holds the raw number.
    """

    tag: Phase
    degeneracy: int
    flagged: bool = False
    count: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "tag", Phase(self.tag))
        if not self.flagged and self.degeneracy != _DEGENERACY[self.tag]:
            raise ValueError(f"degeneracy {self.degeneracy} inconsistent with {self.tag.value}")

    @classmethod
    def of(cls, tag: Phase | str) -> "PhaseLabel":
        tag = Phase(tag)
        return cls(tag, _DEGENERACY[tag], False, _DEGENERACY[tag])

    def __str__(self) -> str:
        return self.tag.value + ("?" if self.flagged else "")

    def to_dict(self) -> dict:
        return {"tag": self.tag.value, "degeneracy": self.degeneracy, "flagged": self.flagged,
                "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseLabel":
        return cls(Phase(d["tag"]), int(d["degeneracy"]), bool(d.get("flagged", False)), d.get("count"))


def residual(spins, p: ModelParams) -> float:
    return float(np.max(np.abs(rhs_adiabatic(spins, p))))


class _Reduced:
    """Reduced flow with the coupling matrix cached (hot loop of the census)."""

    def __init__(self, p: ModelParams):
        self.p = p
        self.om = np.asarray(p.omega)
        self.g = p.gamma
        self.cm = coupling_matrix(p)

    def spins(self, x, sigma) -> np.ndarray:
        sx, sy = x[:3], x[3:]
        sz = sigma * np.sqrt(np.maximum(1.0 - sx * sx - sy * sy, 0.0))
        return np.column_stack([sx, sy, sz])

    def full_residual(self, x, sigma) -> float:
        sx, sy = x[:3], x[3:]
        sz = sigma * np.sqrt(np.maximum(1.0 - sx * sx - sy * sy, 0.0))
        field = self.cm @ sx
        r1 = -self.om * sy + self.g * sx * sz
        r2 = self.om * sx + sz * field + self.g * sy * sz
        r3 = -field * sy - self.g * (1.0 - sz * sz)
        return float(max(np.max(np.abs(r1)), np.max(np.abs(r2)), np.max(np.abs(r3))))

    def f_and_j(self, x, sigma):
        sx, sy = x[:3], x[3:]
        sz = sigma * np.sqrt(1.0 - sx * sx - sy * sy)
        om, g, cm = self.om, self.g, self.cm
        field = cm @ sx
        f = np.concatenate([-om * sy + g * sx * sz, om * sx + sz * field + g * sy * sz])
        dzx = -sx / sz
        dzy = -sy / sz
        j = np.zeros((6, 6))
        j[:3, :3] = np.diag(g * (sz + sx * dzx))
        j[:3, 3:] = np.diag(-om + g * sx * dzy)
        j[3:, :3] = sz[:, None] * cm + np.diag(om + dzx * field + g * sy * dzx)
        j[3:, 3:] = np.diag(dzy * field + g * (sz + sy * dzy))
        return f, j


class NewtonFailure(Exception):
    pass


def _polish(red: _Reduced, x: np.ndarray, sigma: np.ndarray, steps: int = 3) -> np.ndarray:
    """Plain Newton steps past the tolerance, kept while the residual drops."""
    best = red.full_residual(x, sigma)
    for _ in range(steps):
        f, j = red.f_and_j(x, sigma)
        try:
            xn = x + np.linalg.solve(j, -f)
        except np.linalg.LinAlgError:
            break
        if not np.max(xn[:3] ** 2 + xn[3:] ** 2) < 1.0:
            break
        r = red.full_residual(xn, sigma)
        if not r < best:
            break
        x, best = xn, r
    return x


def _newton(red: _Reduced, x: np.ndarray, sigma: np.ndarray, tol: float, max_iter: int,
            polish: bool = False) -> np.ndarray:
    best = np.inf
    since_best = 0
    for _ in range(max_iter):
        r = red.full_residual(x, sigma)
        if r < tol:
            return _polish(red, x, sigma) if polish else x
        # give up early on a seed that wanders without making progress
        if r < 0.5 * best:
            best, since_best = r, 0
        else:
            since_best += 1
            if since_best > STAGNATION:
                raise NewtonFailure("stagnated")
        if np.max(x[:3] ** 2 + x[3:] ** 2) >= 1.0:
            raise NewtonFailure("iterate reached the equator")
        f, j = red.f_and_j(x, sigma)
        try:
            dx = np.linalg.solve(j, -f)
        except np.linalg.LinAlgError:
            raise NewtonFailure("singular Jacobian") from None
        if not np.all(np.isfinite(dx)):
            raise NewtonFailure("singular Jacobian")
        f0 = float(np.dot(f, f))
        t = 1.0
        while t > 1e-6:
            xn = x + t * dx
            if np.max(xn[:3] ** 2 + xn[3:] ** 2) < 1.0:
                fn, _ = red.f_and_j(xn, sigma)
                if float(np.dot(fn, fn)) < (1.0 - 1e-4 * t) * f0 or t < 1e-3:
                    break
            t *= 0.5
        else:
            raise NewtonFailure("line search failed")
        if np.max(xn[:3] ** 2 + xn[3:] ** 2) >= 1.0:
            raise NewtonFailure("step left the chart")
        x = xn
    if red.full_residual(x, sigma) < tol:
        return _polish(red, x, sigma) if polish else x
    raise NewtonFailure(f"no convergence in {max_iter} iterations")


def _batch_f_and_j(red: _Reduced, x: np.ndarray, sigma: np.ndarray, with_j: bool = True):
    """Rows of :meth:`_Reduced.f_and_j` for k seeds at once; also returns the full max-norm residual."""
    sx, sy = x[:, :3], x[:, 3:]
    sz = sigma * np.sqrt(np.maximum(1.0 - sx * sx - sy * sy, 0.0))
    om, g, cm = red.om, red.g, red.cm
    field = sx @ cm.T
    f = np.concatenate([-om * sy + g * sx * sz, om * sx + sz * field + g * sy * sz], axis=1)
    r3 = -field * sy - g * (1.0 - sz * sz)
    res = np.maximum(np.max(np.abs(f), axis=1), np.max(np.abs(r3), axis=1))
    if not with_j:
        return f, None, res
    with np.errstate(divide="ignore", invalid="ignore"):
        dzx = -sx / sz
        dzy = -sy / sz
    k = len(x)
    j = np.zeros((k, 6, 6))
    i3 = np.arange(3)
    j[:, i3, i3] = g * (sz + sx * dzx)
    j[:, i3, 3 + i3] = -om + g * sx * dzy
    j[:, 3:, :3] = sz[:, :, None] * cm[None, :, :]
    j[:, 3 + i3, i3] += om + dzx * field + g * sy * dzx
    j[:, 3 + i3, 3 + i3] = dzy * field + g * (sz + sy * dzy)
    return f, j, res


def _solve_rows(j: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(j, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.full_like(rhs, np.nan)
        for i in range(len(rhs)):
            try:
                out[i] = np.linalg.solve(j[i], rhs[i])
            except np.linalg.LinAlgError:
                pass
        return out


def _newton_batch(red: _Reduced, x: np.ndarray, sigma: np.ndarray, tol: float,
                  max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`_newton` over many seeds; returns (iterates, converged mask).

    Each row follows the same damped step, line search and stagnation rule
    as the scalar solver.
    """
    x = np.array(x, dtype=float)
    k = len(x)
    done = np.zeros(k, dtype=bool)
    alive = np.ones(k, dtype=bool)
    best = np.full(k, np.inf)
    since = np.zeros(k, dtype=int)
    for _ in range(max_iter + 1):
        act = np.flatnonzero(alive & ~done)
        if len(act) == 0:
            break
        xa, sa = x[act], sigma[act]
        inside = np.max(xa[:, :3] ** 2 + xa[:, 3:] ** 2, axis=1) < 1.0
        f, j, res = _batch_f_and_j(red, xa, sa)
        conv = inside & (res < tol)
        done[act[conv]] = True
        improved = res < 0.5 * best[act]
        best[act] = np.where(improved, res, best[act])
        since[act] = np.where(improved, 0, since[act] + 1)
        bad = ~inside | (since[act] > STAGNATION)
        alive[act[bad & ~conv]] = False
        keep = ~conv & ~bad
        if _ == max_iter or not np.any(keep):
            continue
        act, xa, sa, f, j = act[keep], xa[keep], sa[keep], f[keep], j[keep]
        dx = _solve_rows(j, -f)
        ok = np.all(np.isfinite(dx), axis=1)
        alive[act[~ok]] = False
        act, xa, sa, f, dx = act[ok], xa[ok], sa[ok], f[ok], dx[ok]
        f0 = np.einsum("ij,ij->i", f, f)
        t = np.ones(len(act))
        accepted = np.zeros(len(act), dtype=bool)
        xn = xa.copy()
        while True:
            todo = ~accepted & (t > 1e-6)
            if not np.any(todo):
                break
            cand = xa[todo] + t[todo, None] * dx[todo]
            inside = np.max(cand[:, :3] ** 2 + cand[:, 3:] ** 2, axis=1) < 1.0
            fn, _j, _r = _batch_f_and_j(red, cand, sa[todo], with_j=False)
            good = inside & ((np.einsum("ij,ij->i", fn, fn) < (1.0 - 1e-4 * t[todo]) * f0[todo])
                             | (t[todo] < 1e-3))
            idx = np.flatnonzero(todo)
            xn[idx[good]] = cand[good]
            accepted[idx[good]] = True
            t[idx[~good]] *= 0.5
        alive[act[~accepted]] = False
        x[act[accepted]] = xn[accepted]
    return x, done


def _make_fp(red: _Reduced, x, sigma) -> FixedPoint:
    spins = red.spins(x, sigma)
    return FixedPoint(spins, cavity_adiabatic(spins, red.p), residual(spins, red.p))


def newton_solve(seed, p: ModelParams, tol: float = NEWTON_TOL, max_iter: int = 200,
                 polish: bool = False) -> FixedPoint:
    """Damped Newton on ``(s_x, s_y)`` with each ``s_z`` sign carried from the seed.

    ``polish`` adds a few undamped steps after convergence, pushing the root
    to rounding level (used for path tracking near exceptional points).
    Raises :class:`NewtonFailure` on non-convergence or a singular Jacobian.
    """
    s = seed.spins if isinstance(seed, (SystemState, FixedPoint)) else np.asarray(seed, dtype=float).reshape(3, 3)
    if np.any(np.abs(np.linalg.norm(s, axis=1) - 1.0) > 1e-6):
        raise ValueError("seed must lie on the unit sphere")
    sigma = np.where(s[:, 2] > 0, 1.0, -1.0)
    x = np.concatenate([s[:, 0], s[:, 1]])
    red = _Reduced(p)
    if np.any(np.abs(s[:, 2]) < 1e-12):
        raise NewtonFailure("seed on the equator")
    x = _newton(red, x, sigma, tol, max_iter, polish)
    return _make_fp(red, x, sigma)


@dataclass(frozen=True)
class SeedStrategy:
    magnitudes: tuple[float, ...] = (0.5, 0.9, 0.99)
    # per-component |s_x| values combined over species; only s_x,-1 > 0 (Z2 closes the rest)
    grid: tuple[float, ...] = (0.4, 0.9, 0.995)
    n_random: int = 64
    seed: int = 12345
    include_np: bool = True
    tol: float = NEWTON_TOL
    max_iter: int = 60
    dedup_tol: float = DEDUP_TOL


def _pattern_seed(signs, mag: float) -> np.ndarray:
    sx = mag * np.asarray(signs, dtype=float)
    return np.column_stack([sx, np.zeros(3), -np.sqrt(1.0 - sx ** 2)])


def seeds(strategy: SeedStrategy = SeedStrategy()) -> list[np.ndarray]:
    out = []
    if strategy.include_np:
        out.append(SystemState.normal().spins.copy())
    for mag in strategy.magnitudes:
        for sg in SIGN_PATTERNS:
            out.append(_pattern_seed(sg, mag))
    signed = [v for g in strategy.grid for v in (g, -g)]
    for a in strategy.grid:
        for b in signed:
            for c in signed:
                out.append(_pattern_seed((a, b, c), 1.0))
    rng = np.random.default_rng(strategy.seed)
    for _ in range(strategy.n_random):
        v = rng.standard_normal((3, 3))
        v /= np.linalg.norm(v, axis=1)[:, None]
        v[:, 2] = -np.abs(v[:, 2])
        out.append(v)
    return out


def _dedup_add(roots: list[FixedPoint], fp: FixedPoint, tol: float) -> bool:
    for r in roots:
        if r.distance(fp) < tol:
            return False
    roots.append(fp)
    return True


def find_all_stationary(p: ModelParams, strategy: SeedStrategy = SeedStrategy(),
                        with_stability: bool = True) -> list[FixedPoint]:
    """All roots reachable from the seed set, deduplicated and closed under Z2 parity.

    With ``with_stability`` every root carries its linear-stability verdict.
    """
    red = _Reduced(p)
    roots: list[FixedPoint] = []
    ss = np.array(seeds(strategy))
    sigma = np.where(ss[:, :, 2] > 0, 1.0, -1.0)
    x0 = np.concatenate([ss[:, :, 0], ss[:, :, 1]], axis=1)
    x, ok = _newton_batch(red, x0, sigma, strategy.tol, strategy.max_iter)
    for i in np.flatnonzero(ok):
        _dedup_add(roots, _make_fp(red, x[i], sigma[i]), strategy.dedup_tol)
    for r in list(roots):
        img = apply_symmetry(r.state(), SymmetryOp.Z2_PARITY)
        _dedup_add(roots, FixedPoint(img.spins, img.cavity, residual(img.spins, p)), strategy.dedup_tol)
    if not any(r.is_trivial for r in roots):
        raise RuntimeError("normal state missing from the census")
    if with_stability:
        roots = [attach_stability(r, p) for r in roots]
    return roots


def attach_stability(fp: FixedPoint, p: ModelParams) -> FixedPoint:
    from .stability import analyze
    rep = analyze(fp, p)
    return replace(fp, stable=rep.linearly_stable, max_re=rep.max_re)


def count_stable(roots: list[FixedPoint]) -> tuple[bool, int]:
    """(trivial root stable, number of stable nontrivial roots)."""
    if any(r.stable is None for r in roots):
        raise ValueError("roots need stability verdicts")
    triv = any(r.is_trivial and r.stable for r in roots)
    n = sum(1 for r in roots if r.stable and not r.is_trivial)
    return triv, n


def label_from_counts(np_stable: bool, n: int) -> PhaseLabel:
    if n == 0:
        return PhaseLabel.of(Phase.NP if np_stable else Phase.DP)
    exact = {2: Phase.SOP, 4: Phase.PFSOP, 6: Phase.FSOP}
    if n in exact:
        return PhaseLabel(exact[n], n, False, n)
    tag = Phase.SOP if n <= 2 else Phase.PFSOP if n <= 4 else Phase.FSOP
    return PhaseLabel(tag, n, True, n)


def classify_phase(roots: list[FixedPoint], p: ModelParams | None = None) -> PhaseLabel:
    """Label from the stable-root census (stable nontrivial roots take precedence over NP)."""
    return label_from_counts(*count_stable(roots))


def stationary_phase(p: ModelParams, strategy: SeedStrategy = SeedStrategy()) -> tuple[PhaseLabel, list[FixedPoint]]:
    roots = find_all_stationary(p, strategy)
    return classify_phase(roots, p), roots


def stable_nontrivial(roots: list[FixedPoint]) -> list[FixedPoint]:
    return [r for r in roots if r.stable and not r.is_trivial]


def write_census(fh, roots: list[FixedPoint]) -> None:
    for r in roots:
        fh.write(json.dumps(r.to_dict()) + "\n")


def read_census(fh) -> list[FixedPoint]:
    return [FixedPoint.from_dict(json.loads(line)) for line in fh if line.strip()]
