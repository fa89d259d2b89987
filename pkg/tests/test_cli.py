import json
import math

import pytest

from nrdicke.cli import UsageError, parse_angle, parse_range, parse_scalar, parse_values, run


@pytest.mark.parametrize("text,value", [
    ("pi", math.pi), ("2pi/3", 2 * math.pi / 3), ("-pi/2", -math.pi / 2), ("0.5*pi", 0.5 * math.pi),
    ("1.25", 1.25), (" PI / 4 ", math.pi / 4),
])
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value, rel=1e-15)


def test_parse_errors():
    with pytest.raises(UsageError):
        parse_angle("tau")
    with pytest.raises(UsageError):
        parse_range("0:1")
    with pytest.raises(UsageError):
        parse_range("0:1:1")
    with pytest.raises(UsageError):
        parse_scalar("1,2")
    assert parse_range("0:pi:3") == (0.0, math.pi, 3)
    assert list(parse_values("1,2,pi")) == [1.0, 2.0, math.pi]


def test_trajectory_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert run(["trajectory", "--lambda", "20", "--t-end", "2", "-o", str(out)]) == 0
    lines = out.read_text().split("\n")
    header = json.loads(lines[0][2:])
    assert header["tool"] == "nrdicke" and "trajectory" in header["command"]
    assert lines[1].startswith("t,sx_-1")


def test_stationary_jsonl(tmp_path, capsys):
    out = tmp_path / "s.jsonl"
    assert run(["stationary", "--phi", "0", "--lambda", "40", "-o", str(out)]) == 0
    rows = [json.loads(x) for x in out.read_text().strip().split("\n")]
    assert rows[0]["label"]["tag"] == "SOP"
    assert len(rows) - 1 == 3


def test_exit_codes(tmp_path):
    assert run(["nonsense"]) == 1
    assert run(["stationary", "--phi", "abc"]) == 1
    assert run(["compensate", "--phi", "pi/2"]) == 1
    assert run(["trajectory", "--kick", "-1"]) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lam": "40", "phi": "0"}))
    out = tmp_path / "s.jsonl"
    assert run(["stationary", "--config", str(cfg), "-o", str(out)]) == 0
    assert json.loads(out.read_text().split("\n")[0])["label"]["tag"] == "SOP"
    # explicit flags win
    assert run(["stationary", "--config", str(cfg), "--lambda", "5", "-o", str(out)]) == 0
    assert json.loads(out.read_text().split("\n")[0])["label"]["tag"] == "NP"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["stationary", "--config", str(cfg)]) == 1


def test_sweep_resume_and_mismatch(tmp_path):
    out = tmp_path / "m.jsonl"
    args = ["sweep", "--phi", "0:pi:3", "--lambda", "10:50:2", "--workers", "1", "-o", str(out)]
    assert run(args) == 0
    ref = out.read_text()
    assert run(args + ["--resume"]) == 0
    assert out.read_text() == ref
    assert run(["sweep", "--phi", "0:pi:4", "--lambda", "10:50:2", "-o", str(out), "--resume"]) == 1


def test_compensate_plan(capsys):
    assert run(["compensate", "--phi", "pi/3", "--lambda", "46"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["plan"]["pop_ratio"] == pytest.approx(2.0)
