"""Experiment drivers: parameter sweeps written as CSV plus a JSON manifest.

Every experiment produces ``results.csv`` (one row per sweep point, drop,
scheme and mode; deterministic for a fixed manifest), ``timing.csv`` (wall
times, which are not reproducible) and ``manifest.json``.  The
``convergence`` experiment writes one row per outer iteration instead.

Co-NOMA rows report the best time split of the grid search; the baselines
run at time split one.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .orchestrator import RunFailure, RunOptions, baseline_run, nu_search, run_mode
from .scenario import NetworkParams, Scenario, make_scenario

SCHEMA_VERSION = 1
RESULT_COLUMNS = (
    "experiment", "point_name", "point_value", "drop", "seed", "scheme", "mode", "status",
    "additional_fading", "num_devices", "p_ec_max_dbm", "compute_scale", "nu",
    "log_rate", "log_rate_claimed", "jain", "direct_served", "relay_served", "sum_rate_mbps",
    "avg_delay", "avg_delay_computation", "avg_delay_fronthaul", "avg_delay_transmission",
    "worst_delay", "iterations_relaxed", "iterations_fixed", "accepted", "max_residual",
    "restoration_slack_ms", "error",
)
TIMING_COLUMNS = (
    "experiment", "point_name", "point_value", "drop", "scheme", "mode", "num_devices",
    "wall_time", "critical_path_time", "solve_time", "search_time",
)
CONVERGENCE_COLUMNS = (
    "experiment", "drop", "seed", "scheme", "mode", "nu", "platform", "iteration", "phase",
    "objective", "max_residual", "relay_lean",
)
SCHEMES = ("conoma", "noma", "sdma")
MODES = ("crm", "drm")


@dataclass
class ExperimentConfig:
    params: NetworkParams = field(default_factory=NetworkParams)
    drops: int = 20
    seed: int = 0
    schemes: tuple = SCHEMES
    modes: tuple = MODES
    backend: str = "clarabel"
    transport: str = "inprocess"
    jobs: int = 1
    points: tuple | None = None  # overrides the experiment's default sweep
    nu: float = 0.8  # fixed time split of the runtime and convergence experiments
    nu_fading: tuple = (0.0, 15.0)  # fading levels of the time-split sweep
    scenario_path: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = self.params.to_dict()
        for k in ("schemes", "modes", "points", "nu_fading"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["params"] = NetworkParams.from_dict(d["params"])
        for k in ("schemes", "modes", "points", "nu_fading"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True)
class Experiment:
    name: str
    point_name: str
    default_points: tuple
    description: str


EXPERIMENTS = {
    e.name: e for e in (
        Experiment("fading", "additional_fading", (0.0, 3.0, 6.0, 9.0, 12.0, 15.0),
                   "log-rate, fairness and link selection over the weak devices' additional fading"),
        Experiment("nu", "nu", (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
                   "Co-NOMA log-rate over fixed time-split factors"),
        Experiment("uav-power", "p_ec_max_dbm", (16.0, 19.0, 22.0, 25.0, 28.0),
                   "log-rate over the residual UAV power budget"),
        Experiment("comp-capacity", "compute_scale", (0.25, 0.5, 1.0, 2.0, 4.0),
                   "delay over the sum computation capacity (both caps scaled)"),
        Experiment("scale", "num_devices", (6, 8, 10, 12, 14, 16, 18, 20),
                   "log-rate and direct-served devices over the number of devices"),
        Experiment("runtime", "num_devices", (8, 14, 20),
                   "wall time of centralized and distributed runs over the number of devices"),
        Experiment("convergence", "iteration", (0.0,),
                   "objective per outer iteration"),
    )
}


class UnknownExperiment(KeyError):
    def __init__(self, name: str):
        super().__init__(f"unknown experiment {name!r}; available: {', '.join(sorted(EXPERIMENTS))}")


# ---------------------------------------------------------------------------
# scenarios of a sweep point
# ---------------------------------------------------------------------------


def _base_scenario(cfg: ExperimentConfig) -> Scenario | None:
    if cfg.scenario_path is None:
        return None
    text = Path(cfg.scenario_path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        return None
    if isinstance(doc, dict) and doc.get("format") == "conoma-scenario":
        return Scenario.from_json(doc)
    return None


def point_scenario(cfg: ExperimentConfig, name: str, value, drop: int) -> Scenario:
    """Scenario of one (sweep point, drop); drops of a sweep share geometry and fading."""
    prm = cfg.params
    changes: dict = {}
    if name == "fading":
        changes["additional_fading"] = float(value)
    elif name == "uav-power":
        changes["p_ec_max"] = float(value)
    elif name == "comp-capacity":
        changes["f_cc_max"] = prm.f_cc_max * float(value)
        changes["f_ec_max"] = prm.f_ec_max * float(value)
    elif name in ("scale", "runtime"):
        changes["num_devices"] = int(value)
    seed = cfg.seed + drop
    base = _base_scenario(cfg) if drop == 0 else None
    if base is not None and "num_devices" not in changes:
        fading = changes.pop("additional_fading", None)
        sc = base.with_params(**changes) if changes else base
        return sc.with_fading(fading) if fading is not None else sc
    if base is not None:
        seed = base.seed
    return make_scenario(prm.replace(**changes), seed)


# ---------------------------------------------------------------------------
# one cell
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _run_cell(task: dict) -> dict:
    """Worker entry point: run one (point, drop, scheme, mode) cell."""
    cfg = ExperimentConfig.from_dict(task["cfg"])
    name, value, drop = task["experiment"], task["value"], task["drop"]
    scheme, mode = task["scheme"], task["mode"]
    sc = point_scenario(cfg, name, value, drop)
    opts = RunOptions(scheme=scheme, backend=cfg.backend)
    prm = sc.params
    row = dict(experiment=name, point_name=EXPERIMENTS[name].point_name, point_value=value, drop=drop,
               seed=sc.seed, scheme=scheme, mode=mode, additional_fading=prm.additional_fading,
               num_devices=prm.num_devices, p_ec_max_dbm=prm.p_ec_max,
               compute_scale=prm.f_ec_max / cfg.params.f_ec_max)
    timing = dict(experiment=name, point_name=row["point_name"], point_value=value, drop=drop,
                  scheme=scheme, mode=mode, num_devices=prm.num_devices)
    conv_rows = []
    t0 = time.perf_counter()
    try:
        if name == "nu":
            sc = sc.with_fading(task["fading"])
            row["additional_fading"] = task["fading"]
            st, tr = run_mode(sc, float(value), opts, mode, cfg.transport)
        elif name in ("runtime", "convergence"):
            nu = cfg.nu if scheme == "conoma" else 1.0
            st, tr = run_mode(sc, nu, opts, mode, cfg.transport)
        elif scheme == "conoma":
            res = nu_search(sc, "conoma", prm.nu_grid, opts, mode, cfg.transport)
            st, tr = res.state, res.trace
        else:
            st, tr = baseline_run(sc, scheme, mode, opts, cfg.transport)
    except RunFailure as exc:
        row.update(status="failed", error=f"iteration {exc.iteration}: {exc}")
        timing.update(search_time=time.perf_counter() - t0)
        return {"row": row, "timing": timing, "convergence": conv_rows}
    m = tr.metrics
    row.update(status="ok", error="", nu=m["nu"])
    for key in ("log_rate", "log_rate_claimed", "jain", "direct_served", "relay_served", "sum_rate_mbps",
                "avg_delay", "avg_delay_computation", "avg_delay_fronthaul", "avg_delay_transmission",
                "worst_delay", "iterations_relaxed", "iterations_fixed", "accepted", "max_residual",
                "restoration_slack_ms"):
        row[key] = m[key]
    timing.update(wall_time=m["wall_time"], critical_path_time=m["critical_path_time"],
                  solve_time=m["solve_time"], search_time=time.perf_counter() - t0)
    if name == "convergence":
        for rec in tr.records:
            conv_rows.append(dict(experiment=name, drop=drop, seed=sc.seed, scheme=scheme, mode=mode,
                                  nu=m["nu"], platform="all" if rec.platform is None else rec.platform,
                                  iteration=rec.iteration, phase=rec.phase, objective=rec.objective,
                                  max_residual=rec.max_residual,
                                  relay_lean=" ".join(str(k) for k in rec.relay_lean)))
    return {"row": row, "timing": timing, "convergence": conv_rows}


def _tasks(name: str, cfg: ExperimentConfig) -> list:
    exp = EXPERIMENTS[name]
    points = tuple(cfg.points) if cfg.points is not None else exp.default_points
    schemes = cfg.schemes
    if name in ("nu", "convergence"):
        schemes = tuple(s for s in schemes if s == "conoma") or ("conoma",)
    base = cfg.to_dict()
    tasks = []
    fadings = cfg.nu_fading if name == "nu" else (None,)
    for fading in fadings:
        for value in points:
            for drop in range(cfg.drops):
                for scheme in schemes:
                    for mode in cfg.modes:
                        tasks.append(dict(cfg=base, experiment=name, value=value, drop=drop,
                                          scheme=scheme, mode=mode, fading=fading))
    return tasks


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def csv_text(rows: list, columns: tuple) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def build_id() -> str:
    """Content hash of the package sources (stable across checkouts of the same code)."""
    h = hashlib.sha1()
    root = Path(__file__).resolve().parent
    for p in sorted(root.rglob("*.py")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


@dataclass
class ExperimentResult:
    name: str
    rows: list
    timing: list
    convergence: list
    files: dict


def experiment(name: str, config: ExperimentConfig | None = None, out: str | Path | None = None,
               progress=None) -> ExperimentResult:
    """Run a named experiment; writes its files to ``out`` when given."""
    if name not in EXPERIMENTS:
        raise UnknownExperiment(name)
    cfg = config or ExperimentConfig()
    tasks = _tasks(name, cfg)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = []
        for i, t in enumerate(tasks):
            results.append(_run_cell(t))
            if progress is not None:
                progress(i + 1, len(tasks), results[-1]["row"])
    rows = [r["row"] for r in results]
    timing = [r["timing"] for r in results]
    conv = [c for r in results for c in r["convergence"]]
    files = {}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        # single writer: files are written here, after the pool is done
        if name == "convergence":
            (out / "convergence.csv").write_bytes(csv_text(conv, CONVERGENCE_COLUMNS).encode("utf-8"))
            files["convergence"] = "convergence.csv"
        (out / "results.csv").write_bytes(csv_text(rows, RESULT_COLUMNS).encode("utf-8"))
        (out / "timing.csv").write_bytes(csv_text(timing, TIMING_COLUMNS).encode("utf-8"))
        files.update(results="results.csv", timing="timing.csv")
        manifest = {
            "format": "conoma-experiment-manifest",
            "schema_version": SCHEMA_VERSION,
            "experiment": name,
            "description": EXPERIMENTS[name].description,
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "build_id": build_id(),
            "log_rate_normalization": metrics.LOG_RATE_UNIT,
            "columns": {"results": list(RESULT_COLUMNS), "timing": list(TIMING_COLUMNS),
                        "convergence": list(CONVERGENCE_COLUMNS)},
            "files": files,
            "environment": {"python": sys.version.split()[0], "numpy": np.__version__,
                            "platform": platform.platform()},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
        files["manifest"] = "manifest.json"
    return ExperimentResult(name, rows, timing, conv, files)


def config_from_manifest(path: str | Path) -> tuple[str, ExperimentConfig]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "conoma-experiment-manifest":
        raise ValueError("not an experiment manifest")
    return doc["experiment"], ExperimentConfig.from_dict(doc["config"])


def summarize(rows: list, key: str = "log_rate") -> dict:
    """Mean and sample standard deviation per (point, scheme, mode) over successful drops."""
    groups: dict = {}
    for r in rows:
        if r.get("status") != "ok":
            continue
        k = (r["point_value"], r.get("additional_fading") if r["experiment"] == "nu" else None,
             r["scheme"], r["mode"])
        groups.setdefault(k, []).append(float(r[key]))
    out = {}
    for k, vals in groups.items():
        arr = np.array(vals)
        out[k] = (float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0, len(arr))
    return out
