"""Outer algorithms: centralized and distributed resource management."""

from .agent import IterationRecord, PlatformAgent, RunFailure, RunOptions
from .certify import Certificate, certify
from .drm import ExchangeMessage, drm_run
from .initial import init_state
from .runs import RunTrace, SearchResult, baseline_run, crm_run, nu_search, run_mode

__all__ = [
    "Certificate", "ExchangeMessage", "IterationRecord", "PlatformAgent", "RunFailure", "RunOptions", "RunTrace",
    "SearchResult", "baseline_run", "certify", "crm_run", "drm_run", "init_state", "nu_search", "run_mode",
]
