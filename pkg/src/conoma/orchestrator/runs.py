"""Centralized runs, the time-split search and the baselines.

Schedule of one run: the relaxed loop (weighted-l1 link selection and
clustering) iterates until the objective improves by less than ``omega``
or ``max_relaxed`` iterations have run.  The links and clusters are then
fixed by hard selection and the reduced loop iterates to convergence.
The final state is certified against the original model
(:mod:`conoma.orchestrator.certify`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import metrics
from ..phy import ResourceState
from ..scenario import Scenario
from .agent import IterationRecord, PlatformAgent, RunFailure, RunOptions
from .certify import certify
from .initial import init_state

CONTINUE, NEXT_PHASE, STOP = 0, 1, 2


@dataclass
class RunTrace:
    scheme: str
    mode: str
    nu: float
    records: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    accepted: bool = False
    residuals: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, rec: IterationRecord) -> None:
        if self.records and rec.iteration < self.records[-1].iteration:
            raise ValueError("iteration indices must not decrease")
        self.records.append(rec)

    def objectives(self, phase: str | None = None, platform="all") -> np.ndarray:
        recs = [r for r in self.records if (phase is None or r.phase == phase)
                and (platform == "all" or r.platform == platform)]
        return np.array([r.objective for r in recs])

    def rounds(self, phase: str | None = None) -> int:
        return len({r.iteration for r in self.records if phase is None or r.phase == phase})

    def max_decrease(self, phase: str, platform="all") -> float:
        """Largest drop of the objective between consecutive iterations of a phase."""
        obj = self.objectives(phase, platform)
        return float(np.max(obj[:-1] - obj[1:], initial=0.0)) if len(obj) > 1 else 0.0

    def critical_path_time(self) -> float:
        """Sum over rounds of the slowest platform's iteration time."""
        per_round: dict[int, float] = {}
        for r in self.records:
            per_round[r.iteration] = max(per_round.get(r.iteration, 0.0), r.wall_time)
        return float(sum(per_round.values()))


def decide(phase: str, converged: list, phase_rounds: int, opts: RunOptions) -> int:
    """Schedule decision after a round, shared by the centralized and distributed runs."""
    cap = opts.max_relaxed if phase == "relaxed" else opts.max_fixed
    if all(converged) or phase_rounds >= cap:
        if phase == "relaxed" and opts.two_loop:
            return NEXT_PHASE
        return STOP
    return CONTINUE


def initial_state(scenario: Scenario, nu: float, opts: RunOptions) -> ResourceState:
    seed = scenario.seed if opts.init_seed is None else opts.init_seed
    return init_state(scenario, nu, np.random.default_rng(seed), opts.scheme)


def finalize(state: ResourceState, scenario: Scenario, trace: RunTrace, opts: RunOptions,
             wall: float) -> ResourceState:
    """Certify the final state and fill the trace's metric bundle."""
    claimed = metrics.log_rate(state) if np.all(state.r > 0) else float("-inf")
    cert = certify(state, scenario, opts.scheme)
    st = cert.state
    last = {}
    for r in trace.records:
        last[r.platform] = r
    slack = sum(r.slack for r in last.values())
    accepted = cert.accepted and slack <= 1e-9
    trace.accepted = bool(accepted)
    trace.residuals = dict(cert.residuals)
    if cert.repaired:
        trace.notes.append("repaired: " + ",".join(cert.repaired))
    if slack > 1e-9:
        trace.notes.append(f"final iterate uses {slack:.3e} ms of delay slack")
    dr = metrics.delay_report(st, scenario)
    trace.metrics = {
        "log_rate": metrics.log_rate(st) if np.all(st.r > 0) else float("-inf"),
        "log_rate_claimed": claimed,
        "jain": metrics.jain_index(st) if np.any(st.r > 0) else float("nan"),
        "direct_served": metrics.direct_served(st, scenario),
        "relay_served": int(np.count_nonzero(st.relay_selected)) if st.relay_selected is not None else 0,
        "nu": float(trace.nu),
        "iterations_relaxed": trace.rounds("relaxed"),
        "iterations_fixed": trace.rounds("fixed"),
        "wall_time": float(wall),
        "critical_path_time": trace.critical_path_time(),
        "solve_time": float(sum(r.solve_time for r in trace.records)),
        "accepted": bool(accepted),
        "max_residual": cert.max_residual,
        "restoration_slack_ms": float(slack),
        "avg_delay_computation": dr["avg_computation"],
        "avg_delay_fronthaul": dr["avg_fronthaul"],
        "avg_delay_transmission": dr["avg_transmission"],
        "avg_delay": dr["avg_total"],
        "worst_delay": dr["worst_total"],
        "sum_rate_mbps": float(np.sum(st.r) / 1e6),
    }
    return st


def crm_run(scenario: Scenario, nu: float, opts: RunOptions | None = None):
    """Centralized resource management; returns ``(state, trace)``."""
    opts = opts or RunOptions()
    t0 = time.perf_counter()
    agent = PlatformAgent(scenario, None, nu, opts, initial_state(scenario, nu, opts))
    trace = RunTrace(opts.scheme, "crm", float(nu))
    it = 0
    phase_rounds = 0
    while True:
        trace.add(agent.iterate(it))
        it += 1
        phase_rounds += 1
        action = decide(agent.phase, [agent.converged], phase_rounds, opts)
        if action == CONTINUE:
            continue
        if action == NEXT_PHASE:
            agent.start_fixed_phase()
            phase_rounds = 0
            continue
        break
    state = agent.state
    if agent.phase == "relaxed":  # single-loop variant: decide the links now
        agent.start_fixed_phase()
        state = agent.state
    final = finalize(state, scenario, trace, opts, time.perf_counter() - t0)
    return final, trace


def run_mode(scenario: Scenario, nu: float, opts: RunOptions, mode: str = "crm", transport=None):
    if mode == "crm":
        return crm_run(scenario, nu, opts)
    if mode == "drm":
        from .drm import drm_run

        return drm_run(scenario, nu, opts, transport)
    raise ValueError(f"unknown mode {mode}; choose crm or drm")


@dataclass
class SearchResult:
    nu: float
    state: ResourceState
    trace: RunTrace
    per_point: dict  # nu -> log-rate (or the failure message)


def nu_search(scenario: Scenario, scheme: str = "conoma", grid=None, opts: RunOptions | None = None,
              mode: str = "crm", transport=None) -> SearchResult:
    """Run the scheme on every time split of ``grid`` and keep the best.

    The best point maximises the certified log-rate over accepted runs
    (over all runs when none is accepted); ties go to the larger split.
    """
    grid = tuple(scenario.params.nu_grid if grid is None else grid)
    if not grid:
        raise ValueError("empty time-split grid")
    base = opts or RunOptions()
    base = RunOptions(**{**base.__dict__, "scheme": scheme})
    results, per_point = [], {}
    for nu in sorted(grid, reverse=True):
        try:
            st, tr = run_mode(scenario, nu, base, mode, transport)
        except RunFailure as exc:
            per_point[nu] = f"failed at iteration {exc.iteration}: {exc}"
            continue
        per_point[nu] = tr.metrics["log_rate"]
        results.append((nu, st, tr))
    if not results:
        raise RunFailure("every time split failed: " + "; ".join(f"{k}: {v}" for k, v in per_point.items()), -1)
    pool = [r for r in results if r[2].accepted] or results
    best = pool[0]  # grid visited from the largest split, strict improvement needed to move
    for cand in pool[1:]:
        if cand[2].metrics["log_rate"] > best[2].metrics["log_rate"]:
            best = cand
    return SearchResult(best[0], best[1], best[2], per_point)


def baseline_run(scenario: Scenario, scheme: str, mode: str = "crm", opts: RunOptions | None = None,
                 transport=None):
    """SDMA or NOMA benchmark (time split 1, no D2D slot)."""
    if scheme not in ("sdma", "noma"):
        raise ValueError("baseline scheme must be sdma or noma")
    base = opts or RunOptions()
    return run_mode(scenario, 1.0, RunOptions(**{**base.__dict__, "scheme": scheme}), mode, transport)
