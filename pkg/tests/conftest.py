from pathlib import Path

import pytest
from faker import Faker

from mex.qcurvature.catalog import builtin_metric
from mex.qcurvature.geometry import MetricChart
from mex.qcurvature.helpers import create_faker

pytest_plugins = ("mex.common.testing.plugin",)

TEST_DATA_PATH = Path(__file__).parent / "test_data"


@pytest.fixture(name="faker")
def init_faker() -> Faker:
    """Return a fully configured faker instance."""
    return create_faker(0)


@pytest.fixture
def test_data_path() -> Path:
    """Return the folder with spec files used across tests."""
    return TEST_DATA_PATH


@pytest.fixture
def unit_sphere() -> MetricChart:
    """Return the stereographic chart of the unit 4-sphere."""
    return builtin_metric("sphere", 4).chart


@pytest.fixture
def flat_torus() -> MetricChart:
    """Return the flat 3-torus of side 2 pi."""
    return builtin_metric("flat_torus", 3, closed=True).chart
