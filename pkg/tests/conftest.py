import sys
import numpy as np
import pytest

from bstl.ensemble import MeasurementEnsemble


def unit_columns(rng, m, n):
    a = rng.standard_normal((m, n))
    return a / np.linalg.norm(a, axis=0)


def random_ensemble(rng, M, N, d):
    return MeasurementEnsemble([unit_columns(rng, m, n) for m, n in zip(M, N)], d=d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number][1])
