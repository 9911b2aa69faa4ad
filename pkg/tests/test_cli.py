import json

import numpy as np
import pytest

from conftest import chain_model
from qfreduce.cli import main
from qfreduce.condexp import build_factors
from qfreduce.errors import ParseError
from qfreduce.io import (load_model, model_from_dict, model_to_dict, read_trajectory_csv,
                         reduced_from_dict, reduced_to_dict, save_json, write_trajectory_csv)
from qfreduce.linops import SX, SZ, QuantumModel, random_density
from qfreduce.models import chain_wedderburn
from qfreduce.reduction import reduce_model
from qfreduce.sde import SimConfig, generate_truth


@pytest.fixture
def qnd_file(tmp_path):
    path = tmp_path / "qnd.json"
    assert main(["demo", "qnd", "--K", "2", "--block-dim", "2", "--out", str(path)]) == 0
    return path


def test_model_round_trip(tmp_path):
    model = chain_model(2)
    path = tmp_path / "m.json"
    save_json(model_to_dict(model), path)
    back = load_model(path)
    for a, b in zip((model.H, *model.D, *model.C, *model.O), (back.H, *back.D, *back.C, *back.O)):
        assert np.array_equal(a, b)


def test_reduced_round_trip():
    red = reduce_model(chain_model(2), build_factors(chain_wedderburn(2)))
    back = reduced_from_dict(json.loads(json.dumps(reduced_to_dict(red))))
    assert np.array_equal(back.H, red.H)
    assert [len(g) for g in back.C] == [len(g) for g in red.C]
    r = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    assert np.allclose(back.operator_set().lindblad(r), red.operator_set().lindblad(r), atol=1e-15)


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        model_from_dict({"H": []})
    with pytest.raises(ParseError):
        model_from_dict({"n": 2, "H": [[1, 2], [3, 4]]})
    with pytest.raises(ParseError):
        reduced_from_dict({"m": 1})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_model(bad)


def test_csv_round_trip_full_precision(tmp_path):
    model = QuantumModel(SX, D=(0.5 * SZ,), O=(SZ,))
    traj, rec = generate_truth(model, random_density(2, np.random.default_rng(0)), SimConfig(T=0.05, dt=1e-3))
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj, rec)
    cols = read_trajectory_csv(path)
    assert list(cols) == ["t", "theta_1", "trace", "y_1"]
    assert np.array_equal(cols["theta_1"], traj.theta[0])
    assert np.array_equal(cols["y_1"][1:], np.cumsum(rec.dY[0]))


def test_reduce_command(qnd_file, capsys):
    assert main(["reduce", str(qnd_file), "--linear"]) == 0
    out = capsys.readouterr().out
    assert "kappa=2" in out and "reduced Lindbladian is zero" in out
    red = json.loads((qnd_file.parent / "qnd.reduced.json").read_text())
    assert red["m"] == 2 and red["blocks"] == [[1, 2], [1, 2]]
    lin = json.loads((qnd_file.parent / "qnd.reduced.linear.json").read_text())
    assert lin["kappa"] == 2


def test_reduce_command_chain(tmp_path, capsys):
    path = tmp_path / "chain.json"
    assert main(["demo", "chain", "--N", "3", "--out", str(path)]) == 0
    out = tmp_path / "r.json"
    assert main(["reduce", str(path), "--algebra", "chain", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "alg_dim=32" in text and "reduced Lindbladian is zero" not in text
    assert json.loads(out.read_text())["blocks"] == [[4, 1], [4, 1]]


def test_simulate_command(qnd_file, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["simulate", str(qnd_file), "--T", "0.05", "--out", str(out), "--store-states"]) == 0
    cols = read_trajectory_csv(out)
    assert len(cols["t"]) == 51
    assert np.allclose(cols["theta_1"] + cols["theta_2"], 1.0)
    assert np.load(tmp_path / "traj.states.npy").shape == (51, 4, 4)


def test_compare_report_is_reproducible(qnd_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["compare", str(qnd_file), "--T", "0.2", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["passed"] and "runtime_s" not in rep and rep["scheme"] == "euler"


def test_stability_command(tmp_path):
    path = tmp_path / "chain.json"
    assert main(["demo", "chain", "--N", "2", "--out", str(path)]) == 0
    out = tmp_path / "s.json"
    assert main(["stability", str(path), "--T", "0.2", "--runs", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and len(rep["min_difference"]) == 2


def test_exit_codes(tmp_path, qnd_file, monkeypatch):
    assert main(["reduce", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    assert main(["reduce", str(bad)]) == 2
    assert main(["reduce", str(qnd_file), "--algebra", "chain"]) == 4
    import qfreduce.algebra as alg
    monkeypatch.setattr(alg, "BLOCK_FORM_TOL", -1.0)
    assert main(["reduce", str(qnd_file)]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["reduce"])
    assert exc.value.code == 2
