"""Command-line interface.

``conoma run`` runs one experiment and writes CSV data plus a manifest;
``conoma solve-file`` solves a serialized cone program with both backends.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .conic import BACKENDS, SolverOptions, loads, solve
from .orchestrator.transport import TRANSPORTS
from .scenario import NetworkParams, Scenario, ScenarioError, load_params

log = logging.getLogger("conoma")


def _params_from_scenario(path: str, paper_scale: bool) -> tuple[NetworkParams, str | None]:
    """A YAML parameter file or a scenario JSON document."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        return load_params(path, paper_scale=paper_scale), None
    if isinstance(doc, dict) and doc.get("format") == "conoma-scenario":
        return Scenario.from_json(doc).params, path
    raise ScenarioError(f"{path}: neither a parameter file nor a scenario document")


def _cmd_run(args) -> int:
    if args.manifest:
        name, cfg = ex.config_from_manifest(args.manifest)
        cfg.jobs = args.jobs
    else:
        name = args.experiment
        if name is None:
            print("error: --experiment or --manifest is required", file=sys.stderr)
            return 2
        if args.scenario:
            params, doc = _params_from_scenario(args.scenario, args.paper_scale)
        else:
            params, doc = (NetworkParams.paper_scale() if args.paper_scale else NetworkParams()), None
        cfg = ex.ExperimentConfig(
            params=params,
            drops=args.drops if args.drops is not None else params.num_drops,
            seed=args.seed if args.seed is not None else params.seed,
            schemes=tuple(args.scheme) if args.scheme else ex.SCHEMES,
            modes=tuple(args.mode) if args.mode else ex.MODES,
            backend=args.backend,
            transport=args.transport,
            jobs=args.jobs,
            points=tuple(args.points) if args.points else None,
            nu=args.nu,
            scenario_path=str(Path(doc).resolve()) if doc else None,
        )
    if name not in ex.EXPERIMENTS:
        print(f"error: {ex.UnknownExperiment(name).args[0]}", file=sys.stderr)
        return 2

    def progress(i, n, row):
        log.info("[%d/%d] %s=%s drop %s %s/%s: %s log-rate %s", i, n, row["point_name"], row["point_value"],
                 row["drop"], row["scheme"], row["mode"], row.get("status"), row.get("log_rate"))

    res = ex.experiment(name, cfg, args.out, progress)
    failed = sum(r.get("status") != "ok" for r in res.rows)
    print(f"{name}: {len(res.rows)} rows ({failed} failed) written to {args.out}")
    for (point, fading, scheme, mode), (mean, std, n) in sorted(ex.summarize(res.rows).items(),
                                                                key=lambda kv: tuple(map(str, kv[0]))):
        tag = f"{point}" if fading is None else f"{point} @ {fading} dB"
        print(f"  {tag:>14}  {scheme:>6}/{mode}  log-rate {mean:9.4f} +- {std:.4f}  (n={n})")
    return 0


def _cmd_solve_file(args) -> int:
    prog = loads(Path(args.program).read_text())
    backends = BACKENDS if args.backend == "both" else (args.backend,)
    out = {}
    for b in backends:
        sol = solve(prog, SolverOptions(tol=args.tol), b)
        out[b] = {"status": sol.status, "objective": sol.objective, "iterations": sol.iterations,
                  "solve_time": sol.solve_time,
                  "max_violation": float(max(prog.violations(sol.x), default=0.0))}
        print(f"{b:>9}: {sol.status:<18} objective {sol.objective:.10g}  iterations {sol.iterations}"
              f"  time {sol.solve_time:.3f}s")
    if len(backends) == 2 and all(out[b]["status"] == "optimal" for b in backends):
        o1, o2 = out["native"]["objective"], out["clarabel"]["objective"]
        rel = abs(o1 - o2) / max(1.0, abs(o2))
        print(f"relative objective gap {rel:.3e}")
        out["relative_gap"] = rel
    if args.json:
        Path(args.json).write_text(json.dumps(out, indent=2) + "\n")
    return 0 if all(out[b]["status"] == "optimal" for b in backends) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conoma", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV/JSON data")
    run.add_argument("--experiment", help=f"one of: {', '.join(ex.EXPERIMENTS)}")
    run.add_argument("--scenario", help="YAML parameter file or scenario JSON document")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int)
    run.add_argument("--drops", type=int)
    run.add_argument("--mode", choices=ex.MODES, action="append", help="repeatable; default both")
    run.add_argument("--scheme", choices=ex.SCHEMES, action="append", help="repeatable; default all")
    run.add_argument("--paper-scale", action="store_true", help="full-size network parameters")
    run.add_argument("--backend", choices=BACKENDS, default="clarabel", help="cone solver of the subproblems")
    run.add_argument("--transport", choices=sorted(TRANSPORTS), default="inprocess")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--points", type=float, nargs="+", help="override the sweep points")
    run.add_argument("--nu", type=float, default=0.8, help="time split of runtime/convergence runs")
    run.add_argument("--manifest", help="re-run the experiment recorded in a manifest.json")
    run.set_defaults(func=_cmd_run)

    sf = sub.add_parser("solve-file", help="solve a serialized cone program")
    sf.add_argument("program")
    sf.add_argument("--backend", choices=BACKENDS + ("both",), default="both")
    sf.add_argument("--tol", type=float, default=1e-6)
    sf.add_argument("--json", help="write the results to this file")
    sf.set_defaults(func=_cmd_solve_file)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
