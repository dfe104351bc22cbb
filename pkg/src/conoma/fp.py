"""Quadratic-transform handling of the SINR constraints.

For a ratio ``|n(q)|^2 / I(q)`` and any complex multiplier ``a``,

    2 Re{a^* n(q)} - |a|^2 I(q) <= |n(q)|^2 / I(q),

with equality at ``a = n(q) / I(q)``.  A constraint ``gamma <= SINR(q)`` is
therefore replaced by the convex ``g = gamma - 2 Re{a^* n} + |a|^2 I <= 0``.
Multipliers are stored per device in the same families as the SINRs
(see :mod:`conoma.phy`).  The slot-2 family has a real multiplier and a
numerator ``sqrt(|g|^2 p)``.
"""

from __future__ import annotations

import numpy as np

from .phy import FAMILIES, ResourceState
from .scenario import Scenario


def _terms(state: ResourceState, scenario: Scenario, decode_flags, sic_source: str = "relay",
           extra=None):
    """Numerators (complex amplitudes) and interference-plus-noise per family.

    ``extra = (interference, d2d)`` adds frozen received powers in W: the
    first at every observing device, the second at the D2D receivers.  The
    distributed scheme uses it for beams of other platforms.
    """
    topo = scenario.topology
    K = state.K
    h = scenario.h
    sig2 = scenario.sigma2
    proj_d = h.conj() @ state.q_direct.T
    proj_r = h.conj() @ state.q_relay.T
    Gd = np.abs(proj_d) ** 2
    G = np.abs(proj_d + proj_r) ** 2
    strong, weak = topo.is_strong, ~topo.is_strong
    full = sig2 + Gd[:, strong].sum(axis=1) + G[:, weak].sum(axis=1)
    ext_d2d = np.zeros(K)
    if extra is not None:
        full = full + np.asarray(extra[0], dtype=float)
        ext_d2d = np.asarray(extra[1], dtype=float)
    decode = np.asarray(decode_flags, dtype=bool)
    num = {name: np.zeros(K, dtype=complex) for name in FAMILIES}
    den = {name: np.ones(K) * sig2 for name in FAMILIES}
    g2 = np.abs(scenario.channels.g_d2d) ** 2
    idx = np.arange(K)
    for w in np.flatnonzero(weak):
        s = topo.partner[w]
        num["relay"][w] = proj_r[s, w] if sic_source == "relay" else proj_d[s, w]
        den["relay"][w] = full[s] - G[s, w]
        num["direct"][w] = proj_d[w, w]
        den["direct"][w] = full[w] - G[w, w]
        others = idx[strong & (idx != s)]
        num["d2d"][w] = np.sqrt(g2[s, w] * max(state.p[s], 0.0))
        den["d2d"][w] = sig2 + float(np.sum(g2[others, w] * state.p[others])) + ext_d2d[w]
    for s in np.flatnonzero(strong):
        w = topo.partner[s]
        num["strong"][s] = proj_d[s, s]
        d = full[s] - Gd[s, s]
        if decode[s]:
            d -= G[s, w]
        den["strong"][s] = d
    return num, den


def family_members(scenario: Scenario) -> dict:
    topo = scenario.topology
    return {"strong": topo.is_strong, "relay": ~topo.is_strong,
            "direct": ~topo.is_strong, "d2d": ~topo.is_strong}


def update_aux(prev_state: ResourceState, scenario: Scenario, decode_flags,
               sic_source: str = "relay", extra=None) -> dict:
    """Optimal multipliers ``a = n(q~) / I(q~)`` at the previous iterate."""
    num, den = _terms(prev_state, scenario, decode_flags, sic_source, extra)
    members = family_members(scenario)
    out = {}
    for name in FAMILIES:
        a = np.where(members[name], num[name] / den[name], 0.0)
        out[name] = a.real.astype(float) if name == "d2d" else a.astype(complex)
    return out


def g_functions(state: ResourceState, scenario: Scenario, decode_flags,
                sic_source: str = "relay", a: dict | None = None, gamma: dict | None = None,
                extra=None) -> dict:
    """Residuals ``g`` of every family (constraint ``g <= 0`` per member)."""
    a = state.a if a is None else a
    gamma = state.gamma if gamma is None else gamma
    num, den = _terms(state, scenario, decode_flags, sic_source, extra)
    members = family_members(scenario)
    out = {}
    for name in FAMILIES:
        an = np.asarray(a.get(name, np.zeros(state.K)))
        gm = np.asarray(gamma.get(name, np.zeros(state.K)), dtype=float)
        val = gm - 2.0 * np.real(np.conj(an) * num[name]) + np.abs(an) ** 2 * den[name]
        out[name] = np.where(members[name], val, 0.0)
    return out


def max_feasible_gamma(state: ResourceState, scenario: Scenario, decode_flags, a: dict,
                       sic_source: str = "relay", extra=None) -> dict:
    """Largest ``gamma`` with ``g(state, a, gamma) <= 0`` per family."""
    zero = {name: np.zeros(state.K) for name in FAMILIES}
    g0 = g_functions(state, scenario, decode_flags, sic_source, a=a, gamma=zero, extra=extra)
    return {name: -g0[name] for name in FAMILIES}
