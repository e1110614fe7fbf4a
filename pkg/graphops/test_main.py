import json
import logging

import pytest

from main import EXIT_CONFIG, EXIT_DOMAIN, EXIT_NORMALIZATION, EXIT_OK, main
from report_encoder import decode_bound_reports_csv

HYPERCUBE = """
resolutions = [4, 8]
k_max = 1
seed = 3

[operator]
kind = "hypercube"
N = 3

[profile]
num_tuples = 2
Q = 16
"""


def _write(tmp_path, text: str, name: str = "experiment.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_bound_command(capsys):
    code = main(["bound", "--theorem", "approximation", "--C-A", "1", "--C-v", "1", "-n", "100"])
    assert code == EXIT_OK
    name, value = capsys.readouterr().out.strip().split(" bound=")
    assert name == "approximation"
    assert float(value) == pytest.approx(0.22)


def test_bound_command_bad_input():
    assert main(["bound", "--theorem", "approximation", "--C-A", "-1", "-n", "4"]) == EXIT_DOMAIN


def test_missing_config(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_malformed_config_names_the_key(tmp_path, caplog):
    path = _write(tmp_path, HYPERCUBE.replace('N = 3', 'N = 3\nwidth = 2'))
    with caplog.at_level(logging.ERROR, logger="main"):
        assert main(["sweep", "--config", str(path)]) == EXIT_CONFIG
    assert "operator.width" in caplog.text


def test_unparsable_config(tmp_path):
    path = _write(tmp_path, "[operator\nkind = 1")
    assert main(["check", "--config", str(path)]) == EXIT_CONFIG


def test_distance_of_identical_specs(tmp_path, capsys):
    out = tmp_path / "distance.json"
    path = _write(tmp_path, HYPERCUBE)
    assert main(["distance", "--config", str(path), "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["total"] == 0.0
    assert report["remainder_bound"] == 0.5
    assert "total=0.0" in capsys.readouterr().out


def test_distance_against_discretization(tmp_path):
    text = HYPERCUBE + '\n[other]\nkind = "hypercube"\nN = 3\ndiscretize = 4\n'
    out = tmp_path / "d.json"
    assert main(["distance", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["estimator"] == "paired" and report["seed"] == 3
    assert 0.0 <= report["total"] <= 1.0


def test_distance_unrelated_operators_cannot_pair(tmp_path):
    text = HYPERCUBE + '\n[other]\nkind = "hypercube"\nN = 4\n'
    assert main(["distance", "--config", str(_write(tmp_path, text))]) == EXIT_DOMAIN


def test_sweep_writes_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(_write(tmp_path, HYPERCUBE)), "--out", str(out)]) == EXIT_OK
    rows = decode_bound_reports_csv(out.read_text())
    assert [r["n"] for r in rows] == ["4", "8"]
    assert all(r["hypothesis_violated"] == "false" for r in rows)


def test_sweep_to_stdout_as_json(tmp_path, capsys):
    path = _write(tmp_path, HYPERCUBE)
    assert main(["sweep", "--config", str(path), "--format", "json"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert [row["n"] for row in payload] == [4, 8]


def test_strict_violation(tmp_path):
    path = _write(tmp_path, HYPERCUBE.replace("[4, 8]", "[4, 5]"))
    assert main(["sweep", "--config", str(path), "--strict"]) == EXIT_DOMAIN
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "ok.csv")]) == EXIT_OK


def test_unnormalised_filters(tmp_path):
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"L": 1, "widths": [1, 1], "K": 2, "h": [[[1.5, 0.0]]]}))
    text = HYPERCUBE.replace('seed = 3', 'seed = 3\ntheorem = "gnn-approximation"') + '\n[gnn]\nparams_file = "params.json"\n'
    assert main(["sweep", "--config", str(_write(tmp_path, text))]) == EXIT_NORMALIZATION


def test_gnn_command_without_gnn_section(tmp_path):
    assert main(["gnn-compare", "--config", str(_write(tmp_path, HYPERCUBE))]) == EXIT_CONFIG


def test_gnn_compare(tmp_path):
    text = HYPERCUBE + '\n[gnn.random]\nL = 1\nwidths = [1, 1]\nK = 2\nseed = 4\n'
    out = tmp_path / "gnn.csv"
    assert main(["gnn-compare", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == EXIT_OK
    rows = decode_bound_reports_csv(out.read_text())
    assert [r["theorem"] for r in rows] == ["gnn-signal-gap"] * 2 + ["gnn-approximation"] * 2
    assert rows[0]["pass"] == "true"


def test_check_command(tmp_path):
    out = tmp_path / "check.json"
    assert main(["check", "--config", str(_write(tmp_path, HYPERCUBE)), "--out", str(out)]) == EXIT_OK
    reports = json.loads(out.read_text())
    checks = [r["check"] for r in reports]
    assert checks[:2] == ["self-adjoint", "lipschitz-map"]
    assert checks.count("constant-to-constant") == 2
    assert all(r["passed"] for r in reports), reports


def test_seed_override(tmp_path):
    path = _write(tmp_path, HYPERCUBE + '\n[other]\nkind = "hypercube"\nN = 3\ndiscretize = 4\n')
    out = tmp_path / "d.json"
    assert main(["distance", "--config", str(path), "--out", str(out), "--seed", "11"]) == EXIT_OK
    assert json.loads(out.read_text())["seed"] == 11
    assert main(["distance", "--config", str(path), "--seed", "-1"]) == EXIT_CONFIG
