import numpy as np
import pytest
from rich.console import Console

from nopo_xy.cli.config.settings import Settings
from nopo_xy.cli.workbench import Workbench
from nopo_xy.core import ring_graph
from nopo_xy.network import make_generator

SEED = 20190101


@pytest.fixture
def rng() -> np.random.Generator:
    return make_generator(SEED)


@pytest.fixture
def ring8():
    return ring_graph(8)


@pytest.fixture
def workbench() -> Workbench:
    return Workbench(Settings(threads=1, seed=SEED), console=Console(quiet=True))


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch, tmp_path):
    """Keep developer .env files and shell settings out of the CLI under test."""
    for name in ("NOPO_XY_THREADS", "NOPO_XY_SEED", "NOPO_XY_LOG_LEVEL", "NOPO_XY_LOG_FILE"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
