import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from slicequad import load_config, run_scenario

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

# acceptance verdicts, echoed again in the terminal summary so they show up
# even when pytest captures stdout
VERDICTS = []


def record(criterion, passed, detail):
    line = "criterion %-3s %s  %s" % (criterion, "PASS" if passed else "FAIL", detail)
    VERDICTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def configs():
    return CONFIGS


@pytest.fixture(scope="session")
def disturbed_hover():
    """The 30 s disturbed-hover run, shared by several criteria.

    The wall time of the run (post-processing included) is attached as
    ``elapsed``.
    """
    cfg = load_config(CONFIGS / "disturbed_hover.yaml")
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = run_scenario(cfg, with_report=True)
    res.elapsed = time.perf_counter() - t0
    res.cfg = cfg
    return res
