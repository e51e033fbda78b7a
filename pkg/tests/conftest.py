import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crossway.geometry import build_intersection, compute_conflict_graph


@pytest.fixture(scope="session")
def model():
    return build_intersection()


@pytest.fixture(scope="session")
def graph(model):
    return compute_conflict_graph(model)
