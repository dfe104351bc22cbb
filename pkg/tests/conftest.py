import numpy as np
import pytest

from conoma.scenario import NetworkParams, make_scenario


def tiny_params(**kw):
    """One BS, no edge computer, one pair, single antennas."""
    base = dict(num_bs=1, num_ec=0, num_devices=2, antennas_bs=1, antennas_ec=1)
    base.update(kw)
    return NetworkParams(**base)


@pytest.fixture(scope="session")
def desk():
    return make_scenario(NetworkParams(), seed=0)


@pytest.fixture(scope="session")
def desk_faded():
    return make_scenario(NetworkParams(additional_fading=15.0), seed=0)


@pytest.fixture(scope="session")
def cc_only():
    """Desk-scale network without edge computers (a single platform)."""
    return make_scenario(NetworkParams(num_ec=0, num_devices=4), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        title, ok, detail = results[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
