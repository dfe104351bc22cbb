"""Reported metrics of a final state.

Log-rate is the sum of natural logarithms of the device rates in Mbit/s,
the same normalisation as the convex programs' objective.
"""

from __future__ import annotations

import numpy as np

from .phy import ResourceState, active_bs_links, delay
from .scenario import Scenario

LOG_RATE_UNIT = "sum of ln(rate / (1 Mbit/s))"


def log_rate(state: ResourceState) -> float:
    r = np.asarray(state.r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("log-rate needs strictly positive rates")
    return float(np.sum(np.log(r / 1e6)))


def jain_index(state_or_rates) -> float:
    r = np.asarray(getattr(state_or_rates, "r", state_or_rates), dtype=float)
    if not np.any(r > 0):
        raise ValueError("Jain's index needs at least one positive rate")
    r = r / r.max()  # scale-free; avoids underflow of the squares
    return float(r.sum() ** 2 / (len(r) * np.sum(r ** 2)))


def direct_served(state: ResourceState, scenario: Scenario) -> int:
    """Number of weak devices served over their direct link."""
    weak = ~scenario.topology.is_strong
    sel = np.zeros(scenario.K, bool) if state.relay_selected is None else np.asarray(state.relay_selected, bool)
    return int(np.count_nonzero(weak & ~sel))


def delay_report(state: ResourceState, scenario: Scenario) -> dict:
    """Per-component delay averages (s), per-device breakdown and the worst device."""
    br = delay(state, scenario, active_bs_links(state, scenario))
    tot = br.total
    worst = int(np.argmax(tot))
    return {
        "breakdown": br,
        "avg_computation": float(np.mean(br.computation)),
        "avg_fronthaul": float(np.mean(br.fronthaul)),
        "avg_transmission": float(np.mean(br.transmission)),
        "avg_total": float(np.mean(tot)),
        "worst_total": float(tot[worst]),
        "worst_device": worst,
    }
