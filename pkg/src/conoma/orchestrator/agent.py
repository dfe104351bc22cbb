"""One platform's side of the outer iteration.

A :class:`PlatformAgent` owns the variables of a set of devices (all devices
for the centralized scheme, one platform's devices in the distributed one).
Each call to :meth:`PlatformAgent.iterate` performs one outer iteration:

1. refresh the l1 weights and the fractional-programming multipliers at
   the current iterate (the current iterate is also the operating point of
   the bilinear surrogates),
2. assemble and solve the convex program,
3. write the solution back and drop BS links that carry no power.

Interference from beams of other platforms enters through
:attr:`PlatformAgent.foreign`, the latest received exchange terms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..conic import SolverOptions, solve
from ..fp import update_aux
from ..phy import active_bs_links, decode_flags_hard, decode_flags_relaxed, ResourceState
from ..scenario import Scenario
from ..sparsity import hard_selection, update_bs_weights, update_link_weights
from ..subproblem import RATE_UNIT, Assembly, ForeignTerms, InfeasibleAssembly, assemble, platform_devices


@dataclass
class RunOptions:
    """Knobs of one run of the outer loop."""

    scheme: str = "conoma"
    backend: str = "clarabel"
    solver: SolverOptions = field(default_factory=SolverOptions)
    omega: float | None = None  # convergence threshold; None uses the scenario's
    max_relaxed: int = 30
    max_fixed: int = 30
    two_loop: bool = True
    restoration: bool = True
    init_seed: int | None = None  # None uses the scenario seed
    warm_start: bool = True
    timeout: float = 120.0  # transport receive timeout per round, s
    keep_programs: bool = False
    # relative safety margin on the interference received from other
    # platforms (distributed runs only; the terms are zero otherwise)
    foreign_margin: float = 0.05


@dataclass
class IterationRecord:
    iteration: int  # round index, strictly increasing over the run
    phase: str
    platform: int | None
    objective: float  # sum of ln(rate / Mbit/s) over the agent's devices
    program_objective: float  # includes the restoration penalty
    max_residual: float  # largest cone violation of the solution in its program
    relay_lean: tuple  # weak devices leaning to the relay link
    wall_time: float
    solve_time: float
    solver_iterations: int
    status: str
    slack: float = 0.0  # total delay slack (ms) if restoration was used


class RunFailure(RuntimeError):
    """A run could not continue; ``program`` is the failing iteration's program."""

    def __init__(self, message: str, iteration: int, program=None, platform=None):
        super().__init__(message)
        self.iteration = iteration
        self.program = program
        self.platform = platform


def scheme_decode_flags(state: ResourceState, scenario: Scenario, scheme: str, phase: str) -> np.ndarray:
    if scheme == "noma":
        return scenario.topology.is_strong.copy()
    if scheme == "sdma":
        return np.zeros(scenario.K, dtype=bool)
    if phase == "relaxed":
        return decode_flags_relaxed(state, scenario)
    return decode_flags_hard(state.relay_selected, scenario)


class PlatformAgent:
    def __init__(self, scenario: Scenario, platform: int | None, nu: float, opts: RunOptions,
                 state: ResourceState):
        self.scenario = scenario
        self.platform = platform
        self.nu = float(nu)
        self.opts = opts
        self.devices = platform_devices(scenario, platform)
        self.own = np.zeros(scenario.K, dtype=bool)
        self.own[self.devices] = True
        self.state = self._localize(state)
        self.foreign = ForeignTerms.zeros(scenario.K)
        self.phase = "relaxed"
        self.last_objective: float | None = None
        self.improvement = np.inf
        self.phase_iterations = 0
        self.warm = None
        self.last_assembly: Assembly | None = None
        self.sic_source = "direct" if opts.scheme == "noma" else "relay"

    def _localize(self, state: ResourceState) -> ResourceState:
        """Keep only this agent's beams; other platforms' beams are unknown here."""
        st = state.copy()
        st.q_direct[~self.own] = 0.0
        st.q_relay[~self.own] = 0.0
        return st

    @property
    def effective_foreign(self) -> ForeignTerms:
        m = 1.0 + self.opts.foreign_margin
        return ForeignTerms(self.foreign.interference * m, self.foreign.d2d * m)

    @property
    def converged(self) -> bool:
        return self.phase_iterations >= 2 and self.improvement < self.omega

    @property
    def omega(self) -> float:
        return self.opts.omega if self.opts.omega is not None else self.scenario.params.conv_threshold

    def refresh(self) -> np.ndarray:
        """Update weights and multipliers at the current iterate; returns the decode flags."""
        sc, st = self.scenario, self.state
        delta = sc.params.l1_delta
        bd, br = update_link_weights(st, delta)
        bb = update_bs_weights(st, sc, delta)
        own = self.own
        if st.beta_direct is None:
            st.beta_direct, st.beta_relay, st.beta_bs = bd, br, bb
        st.beta_direct = np.where(own, bd, st.beta_direct)
        st.beta_relay = np.where(own, br, st.beta_relay)
        st.beta_bs = np.where(own[None, :], bb, st.beta_bs)
        dec = scheme_decode_flags(st, sc, self.opts.scheme, self.phase)
        fr = self.effective_foreign
        extra = (fr.interference * sc.sigma2, fr.d2d * sc.sigma2)
        a = update_aux(st, sc, dec, self.sic_source, extra)
        for fam, vals in a.items():
            old = st.a.get(fam)
            st.a[fam] = vals if old is None else np.where(own, vals, old)
        return dec

    def _solve(self, asm: Assembly):
        std = asm.program.to_standard()
        warm = self.warm if self.opts.warm_start else None
        return solve(asm.program, self.opts.solver, self.opts.backend, warm, std)

    def iterate(self, iteration: int) -> IterationRecord:
        t0 = time.perf_counter()
        sc = self.scenario
        dec = self.refresh()
        kw = dict(phase=self.phase, scheme=self.opts.scheme, platform=self.platform,
                  decode_flags=dec, foreign=self.effective_foreign)
        try:
            asm = assemble(sc, self.state, self.nu, **kw)
        except InfeasibleAssembly as exc:
            raise RunFailure(str(exc), iteration, None, self.platform) from exc
        sol = self._solve(asm)
        solve_time = sol.solve_time
        if sol.status != "optimal" and self.opts.restoration:
            asm = assemble(sc, self.state, self.nu, restoration=True, **kw)
            sol = self._solve(asm)
            solve_time += sol.solve_time
        if sol.status != "optimal":
            raise RunFailure(f"subproblem {sol.status} in the {self.phase} phase", iteration,
                             asm.program, self.platform)
        self.warm = sol.warm()
        self.last_assembly = asm if self.opts.keep_programs else None
        new = asm.extract(sol.x, self.state)
        slack = 0.0
        if asm.restoration:
            idx = asm.names["slack"]
            slack = float(np.sum(sol.x[idx[idx >= 0]]))
        if self.phase == "relaxed" and new.clusters is not None:
            keep = active_bs_links(new, sc) & new.clusters
            # every CC device keeps at least one BS
            for k in self.devices:
                if sc.topology.platform[k] == 0 and not keep[:, k].any():
                    keep[:, k] = new.clusters[:, k]
            new.clusters = np.where(self.own[None, :], keep, new.clusters)
        self.state = new
        r_own = new.r[self.devices] / RATE_UNIT
        objective = float(np.sum(np.log(np.maximum(r_own, 1e-300))))
        self.improvement = np.inf if self.last_objective is None else objective - self.last_objective
        self.last_objective = objective
        self.phase_iterations += 1
        viol = asm.program.violations(sol.x)
        max_res = float(max((v for v in viol), default=0.0)) if viol else 0.0
        weak_own = self.devices[~sc.topology.is_strong[self.devices]]
        lean = tuple(int(k) for k in weak_own if new.z_relay[k] > new.z_direct[k])
        return IterationRecord(iteration, self.phase, self.platform, objective, float(sol.objective),
                               max_res, lean, time.perf_counter() - t0, solve_time,
                               int(sol.iterations), sol.status, slack)

    def start_fixed_phase(self) -> None:
        """Hard link selection and clustering on this agent's devices."""
        sc = self.scenario
        st = self.state
        relay, clusters = hard_selection(st, sc, allow_relay=self.opts.scheme == "conoma" and self.nu < 1)
        if st.relay_selected is None:
            st.relay_selected = np.zeros(sc.K, dtype=bool)
        st.relay_selected = np.where(self.own, relay, st.relay_selected)
        if st.clusters is None:
            st.clusters = clusters
        st.clusters = np.where(self.own[None, :], clusters, st.clusters)
        # remove the beams the hard decision switches off so the first fixed
        # iteration starts from a point of the reduced problem
        for k in self.devices:
            if sc.topology.is_strong[k]:
                continue
            if st.relay_selected[k]:
                st.q_direct[k] = 0.0
            else:
                st.q_relay[k] = 0.0
                st.p[sc.topology.partner[k]] = 0.0
            if sc.topology.platform[k] == 0:
                for b in range(sc.B):
                    if not st.clusters[b, k]:
                        st.q_direct[k, sc.bs_slice(b)] = 0.0
                        st.q_relay[k, sc.bs_slice(b)] = 0.0
        for k in self.devices:
            if sc.topology.is_strong[k] and sc.topology.platform[k] == 0:
                for b in range(sc.B):
                    if not st.clusters[b, k]:
                        st.q_direct[k, sc.bs_slice(b)] = 0.0
        self.phase = "fixed"
        self.last_objective = None
        self.improvement = np.inf
        self.phase_iterations = 0
        self.warm = None
