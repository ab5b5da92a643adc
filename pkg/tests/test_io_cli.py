import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from lswsim import io
from lswsim.cli import main
from lswsim.measures import make_measure
from lswsim.ordering import make_ordering
from oracles import coupling_enumeration

TWO = {"atoms": [[2.0, 0.5], [0.5, 0.5]]}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def sim_config(tmp_path, **over):
    cfg = {"schema_version": 1, "initial": TWO, "law": {"type": "volume"}, "horizon": 3.0}
    cfg.update(over)
    return write(tmp_path / "run.json", cfg)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --- io ------------------------------------------------------------------

def test_ordering_json_roundtrip(tmp_path):
    v = make_ordering([(2.0, 0.5), (0.1 + 0.2, 1 / 3)])
    io.save_ordering(tmp_path / "v.json", v, t=0.25)
    assert io.load_ordering(tmp_path / "v.json") == v
    assert json.loads((tmp_path / "v.json").read_text())["t"] == 0.25


def test_ordering_from_samples():
    v = io.ordering_from_dict({"samples": [1.0, 0.5, 0.5, 0.0]})
    assert v.values.tolist() == [1.0, 0.5]


@pytest.mark.parametrize(
    "obj",
    [[1, 2], {"atoms": [[1.0, 0.5]], "extra": 1}, {"nothing": 1}, {"atoms": [[-1.0, 0.5]]},
     {"samples": [0.0, 1.0]}],
)
def test_ordering_from_dict_rejects(obj):
    with pytest.raises(io.ConfigError):
        io.ordering_from_dict(obj)


def test_measure_files(tmp_path):
    nu = make_measure([(0.0, 0.25), (1.5, 0.75)])
    io.save_measure(tmp_path / "m.json", nu)
    assert io.load_measure(tmp_path / "m.json") == nu
    write(tmp_path / "bad.json", {"atoms": [[1.0, 0.5]]})
    with pytest.raises(io.ConfigError, match="total mass"):
        io.load_measure(tmp_path / "bad.json")
    write(tmp_path / "near.json", {"atoms": [[1.0, 0.5], [2.0, 0.5 + 1e-10]]})
    assert io.load_measure(tmp_path / "near.json").masses.sum() == pytest.approx(1.0, abs=1e-15)


def test_parse_law():
    assert io.parse_law(None).name == "volume"
    q = io.parse_law({"type": "q", "a": 2, "Q": 1.5})
    assert (q.a, q.Q) == (2.0, 1.5)
    for bad in ({"type": "q", "a": 1}, {"type": "x"}, {"type": "volume", "a": 1}, {"type": "q", "a": -1, "Q": 0}):
        with pytest.raises(io.ConfigError):
            io.parse_law(bad)


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"horizon": -1.0}, "horizon"),
        ({"horizon": "10"}, "horizon"),
        ({"schema_version": 2}, "schema_version"),
        ({"colour": "red"}, "colour"),
        ({"rtol": 0}, "rtol"),
        ({"law": {"type": "q", "a": 1}}, "law.Q"),
    ],
)
def test_parse_sim_config_names_field(patch, field):
    d = {"schema_version": 1, "initial": TWO, "horizon": 1.0, **patch}
    with pytest.raises(io.ConfigError, match=field.replace(".", r"\.")):
        io.parse_sim_config(d)


# --- simulate ------------------------------------------------------------

def test_simulate_single_particle(tmp_path, capsys):
    cfg = sim_config(tmp_path, initial={"atoms": [[1.0, 1.0]]}, horizon=10.0)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert list(rows[0]) == ["t", "theta", "total_volume", "n_components", "v_max", "phi_bar"]
    assert {r["v_max"] for r in rows} == {"1.0"}
    assert read_csv(tmp_path / "out" / "events.csv") == []
    assert "PASS" in capsys.readouterr().out


def test_simulate_two_particles(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", sim_config(tmp_path), "--out", str(out)]) == 0
    events = read_csv(out / "events.csv")
    assert len(events) == 1
    assert float(events[0]["t_event"]) == pytest.approx(1.4356355584890346, abs=1e-8)
    assert events[0]["components_before"] == "2" and events[0]["components_after"] == "1"
    snaps = sorted((out / "snapshots").glob("snapshot_*.json"))
    assert len(snaps) >= 101
    last = json.loads(snaps[-1].read_text())
    assert last["atoms"][0][0] == pytest.approx(2.5, abs=1e-9)
    report = json.loads((out / "report.json").read_text())
    assert report["passed"]


def test_simulate_negative_horizon(tmp_path, capsys):
    cfg = sim_config(tmp_path, horizon=-1.0)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")]) == 1
    assert "horizon" in capsys.readouterr().err


def test_simulate_bad_inputs(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    (tmp_path / "broken.json").write_text("{")
    assert main(["simulate", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 1
    assert main(["simulate", "--config", sim_config(tmp_path, initial={"atoms": []}), "--out", str(tmp_path)]) == 1


def test_simulate_deterministic(tmp_path):
    cfg = sim_config(tmp_path)
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["simulate", "--config", cfg, "--out", str(o)]) == 0
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_simulate_q_law_empty_continuation(tmp_path):
    cfg = sim_config(tmp_path, initial={"atoms": [[1.0, 1.0]]}, law={"type": "q", "a": 1, "Q": 0}, horizon=2.0)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert rows[-1]["n_components"] == "0" and float(rows[-1]["theta"]) == 0.0


# --- distance --------------------------------------------------------------

def test_distance(tmp_path, capsys):
    a = write(tmp_path / "a.json", {"atoms": [[2.0, 1.0]]})
    b = write(tmp_path / "b.json", {"atoms": [[1.0, 1.0]]})
    assert main(["distance", a, a]) == 0
    assert capsys.readouterr().out.strip() == "0"
    assert main(["distance", a, b, "--p", "inf"]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_distance_against_enumeration(tmp_path, capsys):
    x, ma = [0.0, 1.0, 2.5, 4.0], [1 / 6, 2 / 6, 2 / 6, 1 / 6]
    y, mb = [0.5, 2.0, 3.0, 3.5], [3 / 6, 1 / 6, 1 / 6, 1 / 6]
    a = write(tmp_path / "a.json", {"atoms": list(map(list, zip(x, ma)))})
    b = write(tmp_path / "b.json", {"atoms": list(map(list, zip(y, mb)))})
    assert main(["distance", a, b, "--p", "1"]) == 0
    got = float(capsys.readouterr().out)
    assert got == pytest.approx(coupling_enumeration(x, ma, y, mb, 1), abs=1e-9)


def test_distance_errors(tmp_path):
    a = write(tmp_path / "a.json", {"atoms": [[2.0, 1.0]]})
    bad = write(tmp_path / "bad.json", {"atoms": [[2.0, 0.3]]})
    assert main(["distance", a, bad]) == 1
    assert main(["distance", a, a, "--p", "0.5"]) == 1
    assert main(["distance", a, str(tmp_path / "nope.json")]) == 1


# --- quantize -------------------------------------------------------------

def test_quantize(tmp_path, capsys):
    n = 1000
    src = write(tmp_path / "s.json", {"samples": list(1 - np.arange(n) / n)})
    out = tmp_path / "q.json"
    assert main(["quantize", src, "--eps", "0.2", "--out", str(out)]) == 0
    assert float(capsys.readouterr().out) < 0.2
    assert io.load_ordering(out).n_components == 10
    fixed = write(tmp_path / "f.json", TWO)
    assert main(["quantize", fixed, "--eps", "1.0", "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "0"
    assert io.load_ordering(out) == io.ordering_from_dict(TWO)


@pytest.mark.parametrize("eps", ["0", "-0.1"])
def test_quantize_rejects_eps(tmp_path, eps):
    src = write(tmp_path / "s.json", TWO)
    assert main(["quantize", src, "--eps", eps, "--out", str(tmp_path / "q.json")]) == 1


# --- study -----------------------------------------------------------------

def study(tmp_path, **cfg):
    d = {"schema_version": 1, "initial": TWO, **cfg}
    return ["study", "--config", write(tmp_path / "study.json", d), "--out", str(tmp_path / "study")]


def test_study_convergence_fixed_point(tmp_path):
    args = study(tmp_path, study="convergence", horizon=1.0, eps=[1.0, 0.5, 0.25],
                 initial={"atoms": [[2.0, 0.5], [1.0, 0.5]]})
    assert main(args) == 0
    rows = read_csv(tmp_path / "study" / "convergence.csv")
    assert [float(r["distance"]) for r in rows] == [0.0, 0.0]
    assert json.loads((tmp_path / "study" / "summary.json").read_text())["passed"]


def test_study_lipschitz_with_zero_delta(tmp_path):
    assert main(study(tmp_path, study="lipschitz", horizon=0.5, deltas=[0, 1e-3])) == 0
    rows = read_csv(tmp_path / "study" / "lipschitz.csv")
    assert float(rows[0]["delta"]) == 0 and float(rows[0]["max_distance"]) == 0


def test_study_lipschitz_default(tmp_path):
    assert main(study(tmp_path, study="lipschitz", horizon=3.0)) == 0
    summary = json.loads((tmp_path / "study" / "summary.json").read_text())
    assert summary["passed"] and np.isfinite(summary["max_ratio"])
    assert len(read_csv(tmp_path / "study" / "lipschitz.csv")) == 3


@pytest.mark.parametrize(
    "cfg",
    [
        {"study": "other", "horizon": 1.0},
        {"study": "lipschitz", "horizon": 1.0, "family": "twist"},
        {"study": "lipschitz", "horizon": 0.0},
        {"study": "convergence", "horizon": 1.0, "eps": [0.1]},
        {"study": "convergence", "horizon": 1.0, "bogus": 1},
    ],
)
def test_study_bad_config(tmp_path, cfg):
    assert main(study(tmp_path, **cfg)) == 1


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["simulate"]) == 1
    assert main(["--help"]) == 0


def test_module_entry_point(tmp_path):
    a = write(tmp_path / "a.json", {"atoms": [[2.0, 1.0]]})
    b = write(tmp_path / "b.json", {"atoms": [[1.0, 0.5], [3.0, 0.5]]})
    res = subprocess.run([sys.executable, "-m", "lswsim", "distance", a, b, "--p", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "1"
