import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nhidapbc import models

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def diff_drive():
    return models.build_diff_drive(10.0, 1.0)


@pytest.fixture(scope="session")
def knife_edge():
    return models.build_knife_edge(2.0, 0.3)


@pytest.fixture(scope="session")
def arm():
    return models.build_arm3dof([1.0, 1.0, 1.0], [0.5, 0.4, 0.3])


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIO_DIR
