"""Re-evaluation of a final hard-selected state against the original model.

The solver returns rates and delays that satisfy the convexified constraints
up to its tolerance.  Certification recomputes everything from the
beamformers, powers and frequencies with :mod:`conoma.phy`:

* beams outside the selected link and clusters are removed,
* a transmitter above its budget is scaled back onto it,
* each rate is capped at the achievable rate of the selected link,
* computation frequencies are raised when the capped rate needs it to keep
  the delay budget (within the capacity and power limits).

Every constraint is then reported as a relative residual.  A run is accepted
when none of them exceeds the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..phy import (ResourceState, active_bs_links, decode_flags_hard, fronthaul_delay,
                   link_activity, power_cc, power_ec_tx, rates, sinr_all)
from ..scenario import Scenario

TOLERANCE = 1e-6


@dataclass
class Certificate:
    accepted: bool
    state: ResourceState
    residuals: dict = field(default_factory=dict)
    achievable: np.ndarray | None = None
    repaired: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def decode_rule(state: ResourceState, scenario: Scenario, scheme: str) -> np.ndarray:
    topo = scenario.topology
    if scheme == "noma":
        return topo.is_strong.copy()
    if scheme == "sdma":
        return np.zeros(scenario.K, dtype=bool)
    sel = state.relay_selected if state.relay_selected is not None else np.zeros(scenario.K, bool)
    return decode_flags_hard(sel, scenario)


def achievable_rates(state: ResourceState, scenario: Scenario, scheme: str) -> np.ndarray:
    """Per-device rate (bit/s) the hard-selected state supports."""
    topo = scenario.topology
    sic = "direct" if scheme == "noma" else "relay"
    sn = sinr_all(state, scenario, decode_rule(state, scenario, scheme), sic)
    rt = rates(sn, state.nu, scenario.params.bandwidth)
    sel = state.relay_selected if state.relay_selected is not None else np.zeros(scenario.K, bool)
    if scheme == "conoma":
        weak_rate = np.where(sel, np.minimum(rt["relay"], rt["d2d"]), rt["direct"])
    elif scheme == "noma":
        weak_rate = np.minimum(rt["direct"], rt["relay"])
    else:
        weak_rate = rt["direct"]
    return np.where(topo.is_strong, rt["strong"], weak_rate)


def restrict_to_selection(state: ResourceState, scenario: Scenario, scheme: str) -> ResourceState:
    """Copy of ``state`` with every beam the hard decisions switch off removed."""
    st = state.copy()
    topo = scenario.topology
    K = scenario.K
    sel = np.zeros(K, dtype=bool) if st.relay_selected is None else np.asarray(st.relay_selected, bool)
    if scheme != "conoma":
        sel = np.zeros(K, dtype=bool)
    sel = sel & ~topo.is_strong
    st.relay_selected = sel
    st.q_direct[sel] = 0.0
    st.q_relay[~sel] = 0.0
    relaying = np.zeros(K, dtype=bool)
    for s in topo.strong_set:
        relaying[s] = sel[topo.partner[s]] and st.nu < 1
    st.p = np.where(relaying, st.p, 0.0)
    if st.clusters is not None:
        for b in range(scenario.B):
            off = ~np.asarray(st.clusters[b], bool) & (topo.platform == 0)
            st.q_direct[np.ix_(off, np.arange(scenario.N)[scenario.bs_slice(b)])] = 0.0
            st.q_relay[np.ix_(off, np.arange(scenario.N)[scenario.bs_slice(b)])] = 0.0
    return st


def certify(state: ResourceState, scenario: Scenario, scheme: str, tol: float = TOLERANCE,
            repair: bool = True) -> Certificate:
    prm = scenario.params
    topo = scenario.topology
    st = restrict_to_selection(state, scenario, scheme)
    repaired = []
    # power budgets ------------------------------------------------------------
    if repair:
        for b, pb in enumerate(power_cc(st, scenario)):
            if pb > prm.p_bs_max_w:
                sl = scenario.bs_slice(b)
                c = np.sqrt(prm.p_bs_max_w / pb)
                st.q_direct[:, sl] *= c
                st.q_relay[:, sl] *= c
                repaired.append(f"bs{b}_power")
        for e, tx in enumerate(power_ec_tx(st, scenario)):
            mem = topo.platform == e + 1
            room = prm.p_ec_max_w - prm.cpu_coeff * st.f[mem].sum() ** prm.cpu_exp
            if tx > room and room > 0:
                sl = scenario.uav_slice(e)
                c = np.sqrt(room / tx)
                st.q_direct[:, sl] *= c
                st.q_relay[:, sl] *= c
                repaired.append(f"ec{e}_power")
        st.p = np.minimum(st.p, prm.p_dev_max_w)
    # rates ----------------------------------------------------------------------
    ach = achievable_rates(st, scenario, scheme)
    if repair:
        capped = np.minimum(st.r, ach)
        if np.any(capped < st.r):
            repaired.append("rates")
        st.r = capped
    links = active_bs_links(st, scenario)
    lam = fronthaul_delay(scenario, links)
    # delay: raise computation where the capped rate needs it ---------------------
    if repair:
        with np.errstate(divide="ignore"):
            room_t = prm.delay_budget - lam - prm.data_bits / st.r
        need = np.where(room_t > 0, prm.task_cycles / np.where(room_t > 0, room_t, 1.0), np.inf)
        low = need > st.f
        if np.any(low & np.isfinite(need)):
            f_new = np.where(low & np.isfinite(need), need, st.f)
            ok = True
            cc = topo.platform == 0
            if f_new[cc].sum() > prm.f_cc_max:
                ok = False
            for e in range(scenario.E):
                mem = topo.platform == e + 1
                comp = prm.cpu_coeff * f_new[mem].sum() ** prm.cpu_exp
                tx = power_ec_tx(st, scenario)[e]
                if f_new[mem].sum() > prm.f_ec_max or tx + comp > prm.p_ec_max_w:
                    ok = False
            if ok:
                st.f = f_new
                repaired.append("frequencies")
    # residuals ---------------------------------------------------------------------
    res = {}
    res["power_bs"] = float(np.max(np.maximum(power_cc(st, scenario) / prm.p_bs_max_w - 1.0, 0.0),
                                   initial=0.0))
    ec_tot = np.array([power_ec_tx(st, scenario)[e]
                       + prm.cpu_coeff * st.f[topo.platform == e + 1].sum() ** prm.cpu_exp
                       for e in range(scenario.E)])
    res["power_ec"] = float(np.max(np.maximum(ec_tot / prm.p_ec_max_w - 1.0, 0.0), initial=0.0))
    res["power_device"] = float(np.max(np.maximum(st.p / prm.p_dev_max_w - 1.0, 0.0)))
    caps = [(topo.platform == 0, prm.f_cc_max)] + [(topo.platform == e + 1, prm.f_ec_max)
                                                    for e in range(scenario.E)]
    res["computation"] = float(max(max(st.f[m].sum() / c - 1.0, 0.0) for m, c in caps))
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = prm.task_cycles / st.f + lam + prm.data_bits / st.r
        theta = np.where(np.isfinite(theta), theta, np.inf)
    res["delay"] = float(np.max(np.maximum(theta / prm.delay_budget - 1.0, 0.0)))
    load = links.astype(float) @ st.r
    res["fronthaul"] = float(np.max(np.maximum(load / prm.fronthaul_cap - 1.0, 0.0), initial=0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        over = np.where(st.r > 0, (st.r - ach) / np.maximum(ach, 1e-300), 0.0)
    res["rate"] = float(np.max(np.maximum(over, 0.0)))
    d_on, r_on = link_activity(st, scenario)
    weak = ~topo.is_strong
    both = weak & d_on & r_on
    res["exclusivity"] = float(np.count_nonzero(both))
    if scheme != "conoma":
        res["exclusivity"] += float(np.count_nonzero(r_on))
    accepted = all(np.isfinite(v) and v <= tol for v in res.values())
    return Certificate(bool(accepted), st, res, ach, repaired)
