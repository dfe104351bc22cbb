"""Distributed resource management.

Every platform (the cloud with its BSs, each edge computer) runs the outer
loop on its own devices in its own worker thread.  A round is

1. local iteration (weights, multipliers, convex program) on the latest
   received foreign terms,
2. exchange: every platform sends each other platform the received powers
   its beams (and D2D transmitters) cause at the recipient's devices,
3. coordination: each platform reports whether its local objective improved
   by less than ``omega``; the coordinator (the cloud) broadcasts
   continue, switch to the fixed-selection phase, or stop.

Before the first round one exchange of the initial beams takes place.
With a single platform no message is sent and the run performs exactly the
centralized computation.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..phy import ResourceState
from ..scenario import Scenario
from ..subproblem import ForeignTerms
from .agent import PlatformAgent, RunFailure, RunOptions
from .runs import CONTINUE, NEXT_PHASE, STOP, RunTrace, decide, finalize, initial_state
from .transport import (KIND_ABORT, KIND_DATA, KIND_DECISION, KIND_FLAG, Frame, InProcessBus,
                        Transport, TransportAborted, TransportTimeout, make_transport)

PHASE_CODE = {"relaxed": 0, "fixed": 1}


@dataclass
class ExchangeMessage:
    """Received-power terms one platform sends another after a round.

    ``interference`` rows are ``(observer, device, |h_observer^H x_device|^2)``
    over the recipient's devices (observers) and the sender's devices, with
    ``x`` the sum of the device's beams; ``d2d`` rows are
    ``(strong, weak, |g_strong,weak|^2 p_strong)`` over the sender's strong
    devices and the recipient's weak devices.  Powers are in W.
    """

    sender: int
    iteration: int
    interference: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    d2d: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def to_frame(self) -> Frame:
        vals = np.concatenate([[KIND_DATA, len(self.interference), len(self.d2d)],
                               self.interference.ravel(), self.d2d.ravel()])
        return Frame(self.sender, self.iteration, vals)

    @classmethod
    def from_frame(cls, fr: Frame) -> "ExchangeMessage":
        v = fr.values
        if int(v[0]) != KIND_DATA:
            raise ValueError("not a data frame")
        ni, nd = int(v[1]), int(v[2])
        inter = v[3: 3 + 3 * ni].reshape(ni, 3)
        d2d = v[3 + 3 * ni: 3 + 3 * ni + 3 * nd].reshape(nd, 3)
        return cls(fr.sender, fr.round, inter, d2d)

    def check(self) -> None:
        for arr in (self.interference, self.d2d):
            if len(arr) and (not np.all(np.isfinite(arr[:, 2])) or np.any(arr[:, 2] < 0)):
                raise ValueError("exchange scalars must be finite and nonnegative")


def build_message(state: ResourceState, scenario: Scenario, sender_devices: np.ndarray,
                  recipient_devices: np.ndarray, sender: int, iteration: int) -> ExchangeMessage:
    h = scenario.h
    x = state.q_direct + state.q_relay
    obs = np.asarray(recipient_devices, dtype=int)
    own = np.asarray(sender_devices, dtype=int)
    G = np.abs(h[obs].conj() @ x[own].T) ** 2  # (observers, sender devices)
    oo, dd = np.meshgrid(obs, own, indexing="ij")
    inter = np.stack([oo.ravel(), dd.ravel(), G.ravel()], axis=1).astype(float)
    topo = scenario.topology
    g2 = np.abs(scenario.channels.g_d2d) ** 2
    strong = own[topo.is_strong[own]]
    weak = obs[~topo.is_strong[obs]]
    rows = [(s, w, g2[s, w] * state.p[s]) for s in strong for w in weak]
    d2d = np.array(rows, dtype=float).reshape(-1, 3)
    return ExchangeMessage(sender, iteration, inter, d2d)


def foreign_from_messages(messages, scenario: Scenario) -> ForeignTerms:
    """Sum received terms per observer (in sender order) and normalise by the noise power."""
    K = scenario.K
    inter = np.zeros(K)
    d2d = np.zeros(K)
    for msg in sorted(messages, key=lambda m: m.sender):
        for o, _, val in msg.interference:
            inter[int(o)] += val
        for _, w, val in msg.d2d:
            d2d[int(w)] += val
    return ForeignTerms(inter / scenario.sigma2, d2d / scenario.sigma2)


def merge_states(agents: dict, base: ResourceState) -> ResourceState:
    """Global state assembled from every agent's own variables."""
    st = base.copy()
    per_device = ("q_direct", "q_relay", "p", "r", "f", "r_direct", "r_relay1", "r_relay2", "r_aux",
                  "z_direct", "z_relay", "beta_direct", "beta_relay", "relay_selected")
    for ag in agents.values():
        own = ag.own
        src = ag.state
        for name in per_device:
            val = getattr(src, name)
            if val is None:
                continue
            cur = getattr(st, name)
            if cur is None:
                cur = np.zeros_like(val)
            cur = cur.copy()
            cur[own] = val[own]
            setattr(st, name, cur)
        for name in ("z_bs", "beta_bs", "clusters"):
            val = getattr(src, name)
            if val is None:
                continue
            cur = getattr(st, name)
            cur = np.zeros_like(val) if cur is None else cur.copy()
            cur[:, own] = val[:, own]
            setattr(st, name, cur)
        for group in ("gamma", "a"):
            for fam, vals in getattr(src, group).items():
                cur = getattr(st, group).get(fam)
                cur = np.zeros_like(vals) if cur is None else np.array(cur, copy=True)
                cur[own] = np.asarray(vals)[own]
                getattr(st, group)[fam] = cur
        st.nu = src.nu
    return st


def drm_platforms(scenario: Scenario) -> list:
    """Platforms owning at least one device, cloud first."""
    plats = sorted(set(int(p) for p in scenario.topology.platform))
    return plats


class _Worker:
    def __init__(self, agent: PlatformAgent, peers: list, coordinator: int, transport: Transport,
                 opts: RunOptions, records: list, lock: threading.Lock):
        self.agent = agent
        self.pid = agent.platform
        self.peers = [p for p in peers if p != self.pid]
        self.coordinator = coordinator
        self.transport = transport
        self.opts = opts
        self.records = records
        self.lock = lock
        self.error: BaseException | None = None
        self.exchange_time = 0.0
        self.rounds = 0
        self.peer_devices = {}

    def _exchange(self, wire_round: int) -> None:
        if not self.peers:
            return
        t0 = time.perf_counter()
        ag = self.agent
        for p in self.peers:
            msg = build_message(ag.state, ag.scenario, ag.devices, self.peer_devices[p], self.pid, wire_round)
            self.transport.send(p, msg.to_frame())
        frames = self.transport.receive(self.pid, wire_round, KIND_DATA, len(self.peers), self.opts.timeout)
        msgs = [ExchangeMessage.from_frame(fr) for fr in frames]
        for m in msgs:
            m.check()
        ag.foreign = foreign_from_messages(msgs, ag.scenario)
        self.exchange_time += time.perf_counter() - t0

    def _coordinate(self, wire_round: int, phase_rounds: int) -> int:
        ag = self.agent
        if not self.peers:
            return decide(ag.phase, [ag.converged], phase_rounds, self.opts)
        flag = Frame(self.pid, wire_round, np.array([KIND_FLAG, PHASE_CODE[ag.phase], float(ag.converged),
                                                     float(min(ag.improvement, 1e300))]))
        if self.pid == self.coordinator:
            others = self.transport.receive(self.pid, wire_round, KIND_FLAG, len(self.peers), self.opts.timeout)
            flags = [ag.converged] + [bool(fr.values[2]) for fr in others]
            action = decide(ag.phase, flags, phase_rounds, self.opts)
            for p in self.peers:
                self.transport.send(p, Frame(self.pid, wire_round, np.array([KIND_DECISION, action])))
            return action
        self.transport.send(self.coordinator, flag)
        (dec,) = self.transport.receive(self.pid, wire_round, KIND_DECISION, 1, self.opts.timeout)
        return int(dec.values[1])

    def run(self) -> None:
        try:
            self._exchange(0)
            it = 0
            phase_rounds = 0
            while True:
                rec = self.agent.iterate(it)
                with self.lock:
                    self.records.append(rec)
                it += 1
                phase_rounds += 1
                self._exchange(it)
                action = self._coordinate(it, phase_rounds)
                if action == CONTINUE:
                    continue
                if action == NEXT_PHASE:
                    self.agent.start_fixed_phase()
                    phase_rounds = 0
                    continue
                break
            self.rounds = it
        except BaseException as exc:  # reported by the driver
            self.error = exc
            if not isinstance(exc, (TransportAborted, TransportTimeout)):
                for p in self.peers:
                    try:
                        self.transport.send(p, Frame(self.pid, 0, np.array([KIND_ABORT])))
                    except OSError:
                        pass


def drm_run(scenario: Scenario, nu: float, opts: RunOptions | None = None,
            transport: Transport | None = None):
    """Distributed resource management; returns ``(state, trace)``.

    ``transport`` is a :class:`Transport` instance (opened here, closed by
    the caller), a transport name (created and closed here) or ``None`` for
    an in-process bus.  The trace's
    ``critical_path_time`` sums, per round, the slowest platform's local
    iteration time (the wall time on dedicated hardware, exchange excluded).
    """
    opts = opts or RunOptions()
    t0 = time.perf_counter()
    st0 = initial_state(scenario, nu, opts)
    plats = drm_platforms(scenario)
    agents = {p: PlatformAgent(scenario, p, nu, opts, st0) for p in plats}
    own_transport = transport is None or isinstance(transport, str)
    if transport is None:
        transport = InProcessBus()
    elif isinstance(transport, str):
        transport = make_transport(transport)
    transport.open(plats)
    records: list = []
    lock = threading.Lock()
    workers = {p: _Worker(agents[p], plats, plats[0], transport, opts, records, lock) for p in plats}
    for w in workers.values():
        w.peer_devices = {p: agents[p].devices for p in plats}
    try:
        if len(plats) == 1:
            workers[plats[0]].run()
        else:
            threads = [threading.Thread(target=w.run, name=f"platform-{p}") for p, w in workers.items()]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
    finally:
        if own_transport:
            transport.close()
    errors = {p: w.error for p, w in workers.items() if w.error is not None}
    if errors:
        # report the root cause rather than the peers that were aborted
        root = [e for e in errors.values() if not isinstance(e, TransportAborted)] or list(errors.values())
        exc = root[0]
        if isinstance(exc, RunFailure):
            raise exc
        if isinstance(exc, TransportTimeout):
            raise RunFailure(f"transport timeout: {exc}", exc.round_index, None, exc.platform) from exc
        raise RunFailure(f"platform failure: {exc!r}", -1) from exc
    trace = RunTrace(opts.scheme, "drm", float(nu))
    for rec in sorted(records, key=lambda r: (r.iteration, -1 if r.platform is None else r.platform)):
        trace.add(rec)
    merged = merge_states(agents, st0)
    rounds = workers[plats[0]].rounds
    final = finalize(merged, scenario, trace, opts, time.perf_counter() - t0)
    trace.metrics["messages"] = int(transport.sent_by_kind.get(KIND_DATA, 0))
    trace.metrics["messages_per_round"] = (trace.metrics["messages"] / (rounds + 1)) if rounds else 0.0
    trace.metrics["exchange_time"] = float(max(w.exchange_time for w in workers.values()))
    trace.metrics["platforms"] = len(plats)
    return final, trace
