from pathlib import Path

import pytest

from membrane_fssp.fssp import data_path
from membrane_fssp.topology import load_topology

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def fig1():
    return load_topology(data_path("fig1.top"))


@pytest.fixture(scope="session")
def fig2():
    return load_topology(data_path("fig2.top"))


@pytest.fixture(scope="session")
def fig3():
    return load_topology(data_path("fig3.top"))
