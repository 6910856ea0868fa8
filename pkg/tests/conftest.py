import numpy as np
import pytest

from horizon.model import ModelConfig, ToyDiT
from horizon.rope import build_frequencies


@pytest.fixture(scope="session")
def model():
    return ToyDiT(ModelConfig())


@pytest.fixture(scope="session")
def table():
    return build_frequencies(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
