import numpy as np
import pytest

from tankmix.process import EnergyState, ModelParams


@pytest.fixture
def m2():
    return ModelParams(2, 1.0)


@pytest.fixture
def centre2():
    return EnergyState.from_x([1 / 3, 1 / 3], 1.0)


def binom_3sigma(p, n):
    return 3.0 * np.sqrt(p * (1 - p) / n)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[k]
        terminalreporter.write_line(mod._line(k, ok, detail))
