import json

import numpy as np
import pytest

from conoma.cli import main
from conoma.conic import dumps
from conoma.conic.randprog import random_program
from conoma.scenario import NetworkParams, make_scenario


def test_unknown_experiment_lists_names(tmp_path, capsys):
    assert main(["run", "--experiment", "bogus", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "bogus" in err and "fading" in err and "runtime" in err


def test_missing_experiment(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)]) == 2


def test_bad_choice_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--experiment", "fading", "--out", str(tmp_path), "--mode", "hybrid"])


def test_run_with_yaml_and_manifest_rerun(tmp_path, capsys):
    cfg = tmp_path / "small.yaml"
    cfg.write_text("network:\n  num_ec: 0\n  num_devices: 4\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["run", "--experiment", "fading", "--scenario", str(cfg), "--out", str(out1), "--drops", "1",
            "--scheme", "sdma", "--mode", "crm", "--points", "0", "9"]
    assert main(args) == 0
    text = capsys.readouterr().out
    assert "fading: 2 rows (0 failed)" in text and "sdma/crm" in text
    man = json.loads((out1 / "manifest.json").read_text())
    assert man["config"]["params"]["num_devices"] == 4
    assert main(["run", "--manifest", str(out1 / "manifest.json"), "--out", str(out2)]) == 0
    assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()


def test_run_with_scenario_document(tmp_path):
    doc = tmp_path / "scenario.json"
    make_scenario(NetworkParams(num_ec=0, num_devices=4), 9).save(doc)
    out = tmp_path / "o"
    assert main(["run", "--experiment", "fading", "--scenario", str(doc), "--out", str(out), "--drops", "1",
                 "--scheme", "sdma", "--mode", "crm", "--points", "0"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["scenario_path"] == str(doc.resolve())
    assert "9" == (out / "results.csv").read_text().splitlines()[1].split(",")[4]  # seed of the document


def test_solve_file_both_backends(tmp_path, capsys):
    prog = tmp_path / "prog.txt"
    prog.write_text(dumps(random_program(np.random.default_rng(2))))
    res = tmp_path / "res.json"
    assert main(["solve-file", str(prog), "--tol", "1e-8", "--json", str(res)]) == 0
    out = json.loads(res.read_text())
    assert out["native"]["status"] == out["clarabel"]["status"] == "optimal"
    assert out["relative_gap"] <= 1e-6
    assert "relative objective gap" in capsys.readouterr().out
