import numpy as np
import pytest

from lorenz_stability.maps import DoublingMap, ModelMapParams
from lorenz_stability.transfer import invariant_density, ulam_matrix

EPS_GRID = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]

# acceptance verdicts, filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def model():
    return ModelMapParams(gamma=0.75)


@pytest.fixture(scope="session")
def doubling():
    return DoublingMap()


@pytest.fixture(scope="session")
def model_op(model):
    return ulam_matrix(model, 8192)


@pytest.fixture(scope="session")
def model_density(model_op):
    return invariant_density(model_op)


@pytest.fixture(scope="session")
def doubling_op(doubling):
    return ulam_matrix(doubling, 1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
