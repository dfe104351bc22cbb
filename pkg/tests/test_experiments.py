import csv
import io
import json

import numpy as np
import pytest

from conoma import experiments as ex
from conoma.scenario import NetworkParams

SMALL = NetworkParams(num_ec=0, num_devices=4)


def test_result_schema_pinned():
    assert ex.SCHEMA_VERSION == 1
    assert ex.RESULT_COLUMNS == (
        "experiment", "point_name", "point_value", "drop", "seed", "scheme", "mode", "status",
        "additional_fading", "num_devices", "p_ec_max_dbm", "compute_scale", "nu",
        "log_rate", "log_rate_claimed", "jain", "direct_served", "relay_served", "sum_rate_mbps",
        "avg_delay", "avg_delay_computation", "avg_delay_fronthaul", "avg_delay_transmission",
        "worst_delay", "iterations_relaxed", "iterations_fixed", "accepted", "max_residual",
        "restoration_slack_ms", "error",
    )
    assert ex.TIMING_COLUMNS == (
        "experiment", "point_name", "point_value", "drop", "scheme", "mode", "num_devices",
        "wall_time", "critical_path_time", "solve_time", "search_time",
    )
    assert ex.CONVERGENCE_COLUMNS == (
        "experiment", "drop", "seed", "scheme", "mode", "nu", "platform", "iteration", "phase",
        "objective", "max_residual", "relay_lean",
    )


def test_experiment_registry():
    assert set(ex.EXPERIMENTS) == {"fading", "nu", "uav-power", "comp-capacity", "scale", "runtime",
                                   "convergence"}
    assert ex.EXPERIMENTS["fading"].default_points == (0.0, 3.0, 6.0, 9.0, 12.0, 15.0)
    assert ex.EXPERIMENTS["scale"].default_points == tuple(range(6, 21, 2))
    with pytest.raises(KeyError) as exc:
        ex.experiment("bogus")
    assert "fading" in str(exc.value) and "convergence" in str(exc.value)


def test_fading_grid_covers_six_combos():
    tasks = ex._tasks("fading", ex.ExperimentConfig(drops=2))
    assert len(tasks) == 6 * 2 * 3 * 2
    assert {(t["scheme"], t["mode"]) for t in tasks} == {(s, m) for s in ex.SCHEMES for m in ex.MODES}


def test_nu_and_convergence_run_conoma_only():
    cfg = ex.ExperimentConfig(drops=1)
    assert {t["scheme"] for t in ex._tasks("nu", cfg)} == {"conoma"}
    assert {t["fading"] for t in ex._tasks("nu", cfg)} == {0.0, 15.0}
    assert {t["scheme"] for t in ex._tasks("convergence", cfg)} == {"conoma"}


def test_point_scenarios():
    cfg = ex.ExperimentConfig(params=SMALL)
    a = ex.point_scenario(cfg, "fading", 12.0, 3)
    assert a.params.additional_fading == 12.0 and a.seed == 3
    b = ex.point_scenario(cfg, "fading", 0.0, 3)
    np.testing.assert_array_equal(a.topology.device_positions, b.topology.device_positions)
    assert ex.point_scenario(cfg, "scale", 6, 0).K == 6
    c = ex.point_scenario(cfg, "comp-capacity", 0.5, 0)
    assert c.params.f_cc_max == SMALL.f_cc_max / 2 and c.params.f_ec_max == SMALL.f_ec_max / 2


def test_csv_quoting_and_formats():
    text = ex.csv_text([{"a": 1.5, "b": True, "c": 'x,"y"'}], ("a", "b", "c"))
    assert text == 'a,b,c\r\n1.5,true,"x,""y"""\r\n'
    assert list(csv.reader(io.StringIO(text)))[1] == ["1.5", "true", 'x,"y"']


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fading")
    cfg = ex.ExperimentConfig(params=SMALL, drops=1, schemes=("sdma", "noma"), modes=("crm",),
                              points=(0.0, 15.0))
    res = ex.experiment("fading", cfg, out)
    return out, res


def test_tiny_run_files_and_manifest(tiny_run):
    out, res = tiny_run
    assert len(res.rows) == 4 and all(r["status"] == "ok" for r in res.rows)
    man = json.loads((out / "manifest.json").read_text())
    assert man["format"] == "conoma-experiment-manifest" and man["schema_version"] == 1
    assert man["log_rate_normalization"] == "sum of ln(rate / (1 Mbit/s))"
    assert man["columns"]["results"] == list(ex.RESULT_COLUMNS)
    assert len(man["build_id"]) == 12 and man["seed"] == 0
    rows = list(csv.DictReader(io.StringIO((out / "results.csv").read_text(encoding="utf-8"))))
    assert [r["point_value"] for r in rows] == ["0.0", "0.0", "15.0", "15.0"]
    assert all(r["relay_served"] == "0" for r in rows)
    timing = list(csv.DictReader(io.StringIO((out / "timing.csv").read_text())))
    assert all(float(t["wall_time"]) > 0 for t in timing)


def test_manifest_rerun_byte_identical(tiny_run, tmp_path):
    out, _ = tiny_run
    name, cfg = ex.config_from_manifest(out / "manifest.json")
    ex.experiment(name, cfg, tmp_path)
    assert (tmp_path / "results.csv").read_bytes() == (out / "results.csv").read_bytes()


def test_summary_over_drops():
    rows = [dict(status="ok", point_value=1.0, experiment="fading", scheme="sdma", mode="crm", log_rate=v)
            for v in (1.0, 2.0, 3.0)]
    rows.append(dict(status="failed", point_value=1.0, experiment="fading", scheme="sdma", mode="crm"))
    (mean, std, n), = ex.summarize(rows).values()
    assert (mean, std, n) == (2.0, 1.0, 3)


def test_convergence_experiment_rows(tmp_path):
    cfg = ex.ExperimentConfig(params=SMALL, drops=1, modes=("crm",), nu=0.7)
    res = ex.experiment("convergence", cfg, tmp_path)
    assert (tmp_path / "convergence.csv").exists()
    iters = [r["iteration"] for r in res.convergence]
    assert iters == sorted(iters) and len(iters) == res.rows[0]["iterations_relaxed"] + res.rows[0]["iterations_fixed"]
    assert {r["phase"] for r in res.convergence} == {"relaxed", "fixed"}


def test_halving_capacity_does_not_speed_up_computation():
    cfg = ex.ExperimentConfig(params=SMALL, drops=2, schemes=("sdma",), modes=("crm",), points=(0.5, 1.0))
    res = ex.experiment("comp-capacity", cfg)
    by = {(r["point_value"], r["drop"]): r["avg_delay_computation"] for r in res.rows}
    for d in range(2):
        assert by[(0.5, d)] >= by[(1.0, d)] * (1 - 1e-6)
