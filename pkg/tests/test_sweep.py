import math

import pytest

from nrdicke.model import ModelParams
from nrdicke.sweep import (
    SpecMismatch, SweepMode, SweepSpec, label_grid, mirror_violations, read_phase_map, resume, sweep,
    write_label_csv, write_phase_map,
)


@pytest.fixture
def spec():
    return SweepSpec((0.0, math.pi, 5), (10.0, 60.0, 3), ModelParams.homogeneous(gamma=0.05))


def test_order_and_workers(spec):
    a = list(sweep(spec, workers=1))
    b = list(sweep(spec, workers=3))
    assert [r.index for r in a] == list(range(spec.size))
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    assert all(r.status == "ok" for r in a)
    assert spec.point(5) == (pytest.approx(math.pi / 4), 60.0)
    assert mirror_violations(spec, a) == []
    assert label_grid(spec, a).shape == (5, 3)


def test_resume_truncated(tmp_path, spec):
    full = tmp_path / "full.jsonl"
    write_phase_map(str(full), spec, sweep(spec, workers=1))
    ref = full.read_text()
    part = tmp_path / "part.jsonl"
    lines = ref.split("\n")
    part.write_text("\n".join(lines[:6]) + "\n" + lines[6][:10])
    resume(spec, str(part), workers=1)
    assert part.read_text() == ref
    resume(spec, str(part), workers=1)
    assert part.read_text() == ref


def test_resume_rejects_other_spec(tmp_path, spec):
    path = tmp_path / "m.jsonl"
    write_phase_map(str(path), spec, sweep(spec, workers=1, indices=[0]))
    other = SweepSpec(spec.phi_range, spec.lambda_range, spec.params, plan="populations")
    assert other.digest() != spec.digest()
    with pytest.raises(SpecMismatch):
        resume(other, str(path))
    header, recs = read_phase_map(str(path))
    assert SweepSpec.from_dict(header["spec"]) == spec and len(recs) == 1


def test_groundstate_mode_and_csv(tmp_path):
    spec = SweepSpec((0.0, math.pi / 2, 3), (10.0, 50.0, 2), mode=SweepMode.GROUND_STATE)
    recs = list(sweep(spec, workers=1))
    path = tmp_path / "g.csv"
    write_label_csv(str(path), recs)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "phi,lambda,label,degeneracy" and len(rows) == 7


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec((0.0, 4.0, 5), (0.0, 1.0, 2))
    with pytest.raises(ValueError):
        SweepSpec((0.0, 1.0, 1), (0.0, 1.0, 2))
    with pytest.raises(ValueError):
        SweepSpec((0.0, 1.0, 2), (0.0, 1.0, 2), plan="magic")
