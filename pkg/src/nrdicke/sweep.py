"""Resumable (phi, lambda) grid sweeps.

Each grid point is an independent job.  Results are buffered and emitted in
grid order (phi outer, lambda inner) whatever order the workers finish in,
so the output file does not depend on the worker count.  A phase-map file
is a JSON header line (spec, hash, version) followed by one JSON record per
grid point; a companion CSV holds ``phi, lambda, label, degeneracy``.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import __version__
from .model import ModelParams
from .stationary import Phase, PhaseLabel, SeedStrategy, stable_nontrivial, stationary_phase

WORKERS_ENV = "NRDICKE_WORKERS"
PLANS = ("none", "populations", "full")


class SweepMode(enum.Enum):
    STEADY_STATE = "SteadyState"
    GROUND_STATE = "GroundState"


class DPResolution(enum.Enum):
    STABILITY_ONLY = "StabilityOnly"
    INTEGRATE_DP = "IntegrateDP"


def _range(r, name: str) -> tuple[float, float, int]:
    lo, hi, n = r
    if int(n) != n or n < 2:
        raise ValueError(f"{name} needs at least 2 points")
    return float(lo), float(hi), int(n)


@dataclass(frozen=True)
class SweepSpec:
    phi_range: tuple[float, float, int]
    lambda_range: tuple[float, float, int]
    params: ModelParams = field(default_factory=ModelParams)
    mode: SweepMode = SweepMode.STEADY_STATE
    dp_resolution: DPResolution = DPResolution.STABILITY_ONLY
    dp_t_end: float = 12000.0
    seed: int = 0
    plan: str = "none"      # compensation applied per point: none, populations or full

    def __post_init__(self):
        object.__setattr__(self, "phi_range", _range(self.phi_range, "phi_range"))
        object.__setattr__(self, "lambda_range", _range(self.lambda_range, "lambda_range"))
        object.__setattr__(self, "mode", SweepMode(self.mode))
        object.__setattr__(self, "dp_resolution", DPResolution(self.dp_resolution))
        if self.plan not in PLANS:
            raise ValueError(f"plan must be one of {PLANS}")
        plo, phi_hi, _ = self.phi_range
        llo, lhi, _ = self.lambda_range
        if not (0.0 <= min(plo, phi_hi) and max(plo, phi_hi) <= math.pi + 1e-12):
            raise ValueError("phi range must lie within [0, pi]")
        if min(llo, lhi) < 0.0:
            raise ValueError("lambda range must be non-negative")

    @property
    def phis(self) -> np.ndarray:
        return np.linspace(*self.phi_range)

    @property
    def lambdas(self) -> np.ndarray:
        return np.linspace(*self.lambda_range)

    @property
    def size(self) -> int:
        return self.phi_range[2] * self.lambda_range[2]

    def point(self, index: int) -> tuple[float, float]:
        n_lam = self.lambda_range[2]
        return float(self.phis[index // n_lam]), float(self.lambdas[index % n_lam])

    def to_dict(self) -> dict:
        return {"phi_range": list(self.phi_range), "lambda_range": list(self.lambda_range),
                "params": self.params.to_dict(), "mode": self.mode.value,
                "dp_resolution": self.dp_resolution.value, "dp_t_end": self.dp_t_end, "seed": self.seed,
                "plan": self.plan}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        return cls(tuple(d["phi_range"]), tuple(d["lambda_range"]), ModelParams.from_dict(d["params"]),
                   SweepMode(d["mode"]), DPResolution(d["dp_resolution"]), float(d.get("dp_t_end", 12000.0)),
                   int(d.get("seed", 0)), d.get("plan", "none"))

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


@dataclass(frozen=True)
class PhaseRecord:
    index: int
    phi: float
    lam: float
    label: PhaseLabel | None
    attractor: dict | None = None
    roots: tuple = ()
    status: str = "ok"
    timing: float = 0.0

    def to_dict(self) -> dict:
        # timing stays out of the file so that reruns are byte-identical
        return {"index": self.index, "phi": self.phi, "lambda": self.lam,
                "label": None if self.label is None else self.label.to_dict(),
                "attractor": self.attractor, "roots": [list(r) for r in self.roots], "status": self.status}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseRecord":
        lab = d.get("label")
        return cls(int(d["index"]), float(d["phi"]), float(d["lambda"]),
                   None if lab is None else PhaseLabel.from_dict(lab), d.get("attractor"),
                   tuple(tuple(r) for r in d.get("roots", [])), d.get("status", "ok"))


def point_params(spec: SweepSpec, phi: float, lam: float) -> ModelParams:
    if spec.plan != "none":
        from .compensate import compensated_params
        return compensated_params(phi, lam, spec.params, compensate_freq=spec.plan == "full")
    return spec.params.replace(phi=phi).with_lambda(lam)


def evaluate_point(spec: SweepSpec, index: int) -> PhaseRecord:
    """Full per-point pipeline; failures are recorded, never raised."""
    phi, lam = spec.point(index)
    t0 = time.perf_counter()
    try:
        p = point_params(spec, phi, lam)
        attractor = None
        if spec.mode is SweepMode.GROUND_STATE:
            from .landscape import ground_label, minimize_energy
            mins = minimize_energy(p)
            label = ground_label(mins)
            roots = tuple(tuple(float(v) for v in g.sx) for g in mins if not g.is_trivial)
        else:
            label, fps = stationary_phase(p, SeedStrategy(seed=12345 + spec.seed))
            stable = stable_nontrivial(fps)
            roots = tuple(tuple(float(v) for v in f.sx) for f in stable)
            if label.tag is Phase.DP and spec.dp_resolution is DPResolution.INTEGRATE_DP:
                from .dynamics import run_and_classify
                verdict, _ = run_and_classify(p, t_end=spec.dp_t_end, seed=spec.seed, fps=fps)
                attractor = verdict.to_dict()
        status = "ok"
    except Exception as exc:  # a failed point must not stop the sweep
        label, roots, attractor = None, (), None
        status = f"error: {type(exc).__name__}: {exc}"
    return PhaseRecord(index, phi, lam, label, attractor, roots, status, time.perf_counter() - t0)


def _evaluate(args) -> PhaseRecord:
    spec_dict, index = args
    return evaluate_point(SweepSpec.from_dict(spec_dict), index)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def sweep(spec: SweepSpec, workers: int | None = None, indices: Iterable[int] | None = None,
          processes: bool = False) -> Iterator[PhaseRecord]:
    """Yield one record per grid point in index order.

    Completed jobs are buffered until every lower index is done, so the order
    of the stream never depends on scheduling.
    """
    todo = list(range(spec.size)) if indices is None else sorted(set(indices))
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(todo) <= 1:
        for i in todo:
            yield evaluate_point(spec, i)
        return
    pool_cls = ProcessPoolExecutor if processes else ThreadPoolExecutor
    spec_dict = spec.to_dict()
    with pool_cls(max_workers=workers) as pool:
        # map() hands results back in submission order
        yield from pool.map(_evaluate, [(spec_dict, i) for i in todo], chunksize=1)


def header_line(spec: SweepSpec) -> str:
    return json.dumps({"spec": spec.to_dict(), "hash": spec.digest(), "version": __version__},
                      sort_keys=True, separators=(",", ":"))


def write_phase_map(path: str, spec: SweepSpec, records: Iterable[PhaseRecord]) -> int:
    """Write header and records; returns the number of records written."""
    n = 0
    with open(path, "w") as fh:
        fh.write(header_line(spec) + "\n")
        for rec in records:
            fh.write(rec.to_json() + "\n")
            fh.flush()
            n += 1
    return n


def read_phase_map(path: str) -> tuple[dict, list[PhaseRecord]]:
    """Header and every complete record; a truncated last line is ignored."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0].strip():
        raise ValueError("phase-map file has no header")
    header = json.loads(lines[0])
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        try:
            records.append(PhaseRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError):
            break
    return header, records


class SpecMismatch(ValueError):
    pass


def resume(spec: SweepSpec, path: str, workers: int | None = None) -> list[PhaseRecord]:
    """Complete a partial phase-map file in place; only missing indices are computed.

    A missing or empty file means a full run.  A header for a different spec
    is refused.
    """
    have: dict[int, PhaseRecord] = {}
    if os.path.exists(path) and os.path.getsize(path) > 0:
        header, records = read_phase_map(path)
        if header.get("hash") != spec.digest():
            raise SpecMismatch("existing file was written for a different sweep spec")
        have = {r.index: r for r in records if 0 <= r.index < spec.size}
    missing = [i for i in range(spec.size) if i not in have]
    for rec in sweep(spec, workers, missing):
        have[rec.index] = rec
    merged = [have[i] for i in range(spec.size)]
    tmp = path + ".tmp"
    write_phase_map(tmp, spec, merged)
    os.replace(tmp, path)
    return merged


def write_label_csv(path_or_fh, records: Iterable[PhaseRecord]) -> None:
    own = isinstance(path_or_fh, str)
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh)
        w.writerow(["phi", "lambda", "label", "degeneracy"])
        for r in records:
            if r.label is None:
                w.writerow([repr(r.phi), repr(r.lam), "error", ""])
            else:
                w.writerow([repr(r.phi), repr(r.lam), str(r.label), r.label.degeneracy])
    finally:
        if own:
            fh.close()


def label_grid(spec: SweepSpec, records: Iterable[PhaseRecord]) -> np.ndarray:
    """Tags as an (n_phi, n_lambda) array of strings."""
    grid = np.full((spec.phi_range[2], spec.lambda_range[2]), "", dtype=object)
    n_lam = spec.lambda_range[2]
    for r in records:
        grid[r.index // n_lam, r.index % n_lam] = "error" if r.label is None else r.label.tag.value
    return grid


def mirror_violations(spec: SweepSpec, records: Iterable[PhaseRecord]) -> list[tuple[int, int]]:
    """Grid points whose tag differs from the mirror point ``pi - phi`` (same lambda).

    Only meaningful for homogeneous parameters on a phi grid symmetric about pi/2.
    """
    grid = label_grid(spec, records)
    phis = spec.phis
    out = []
    for i, phi in enumerate(phis):
        j = int(np.argmin(np.abs(phis - (math.pi - phi))))
        if abs(phis[j] - (math.pi - phi)) > 1e-9 or j <= i:
            continue
        for k in range(grid.shape[1]):
            if grid[i, k] != grid[j, k]:
                out.append((i * grid.shape[1] + k, j * grid.shape[1] + k))
    return out
